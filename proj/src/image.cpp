#include "thermalnet/image.hpp"

#include <stdexcept>

namespace thermalnet {

Image::Image(int w, int h, double fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw std::invalid_argument("image dimensions must be >= 1");
    pixels.assign(static_cast<size_t>(w) * h, fill);
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw std::invalid_argument("resize target dimensions must be >= 1");
    Image out(out_w, out_h);
    const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;
    const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;
    for (int y = 0; y < out_h; ++y) {
        const double fy = y * sy;
        int y0 = static_cast<int>(fy);
        if (y0 > img.height - 2) y0 = img.height >= 2 ? img.height - 2 : 0;
        const int y1 = img.height >= 2 ? y0 + 1 : y0;
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = x * sx;
            int x0 = static_cast<int>(fx);
            if (x0 > img.width - 2) x0 = img.width >= 2 ? img.width - 2 : 0;
            const int x1 = img.width >= 2 ? x0 + 1 : x0;
            const double wx = fx - x0;
            const double top = img.at(y0, x0) * (1.0 - wx) + img.at(y0, x1) * wx;
            const double bot = img.at(y1, x0) * (1.0 - wx) + img.at(y1, x1) * wx;
            double v = top * (1.0 - wy) + bot * wy;
            if (v < 0.0) v = 0.0;
            if (v > 1.0) v = 1.0;
            out.at(y, x) = v;
        }
    }
    return out;
}

Tensor to_input_tensor(const Image& img, int channels) {
    if (channels != 1 && channels != 3) throw std::invalid_argument("channels must be 1 or 3");
    const size_t plane = img.size();
    Tensor t({static_cast<size_t>(channels), static_cast<size_t>(img.height), static_cast<size_t>(img.width)});
    double* dst = t.data();
    for (int c = 0; c < channels; ++c) {
        for (size_t i = 0; i < plane; ++i) dst[c * plane + i] = img.pixels[i];
    }
    return t;
}

} // namespace thermalnet
