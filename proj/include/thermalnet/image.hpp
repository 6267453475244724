#pragma once

#include <cstddef>
#include <vector>

#include "thermalnet/tensor.hpp"

namespace thermalnet {

/// Grayscale image, intensities in [0,1], row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int w, int h, double fill = 0.0);

    double& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }
};

/// Bilinear resize with corner-aligned sampling: output corners map onto
/// input corners; a single-sample axis takes the first corner.
Image resize_bilinear(const Image& img, int out_w, int out_h);

/// Packs an image into a [channels, H, W] tensor. channels == 3 replicates
/// the grayscale plane; channels == 1 passes it through.
Tensor to_input_tensor(const Image& img, int channels);

} // namespace thermalnet
