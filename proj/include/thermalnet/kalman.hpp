#pragma once

#include <optional>

#include "thermalnet/image.hpp"

namespace thermalnet {

/// Scalar estimator state: estimate x and its variance p (p >= 0).
struct KalmanState {
    double x = 0.0;
    double p = 1.0;
};

/// Per-pixel denoising configuration. r unset means "estimate the
/// measurement-noise variance from the image".
struct KalmanConfig {
    double q = 1e-4;              // process-noise variance per step
    std::optional<double> r;      // measurement-noise variance; nullopt = auto
    double init_p = 1.0;          // initial estimate variance
    int window = 3;               // odd neighborhood side length

    void validate() const;
};

/// One predict/update cycle with a static state model: the prediction keeps
/// x and inflates p by q; the update blends in measurement z with gain
/// K = p-/(p- + r). The returned variance never exceeds p + q.
KalmanState kalman_step(KalmanState s, double z, double q, double r);

/// Denoises by running the scalar filter per pixel over its window's values,
/// ordered by ascending distance from the center (ties row-major), starting
/// from x = center value and p = init_p. Borders clamp to the edge.
Image denoise_image(const Image& img, const KalmanConfig& cfg);

/// Robust measurement-noise variance: squared median absolute deviation of
/// the 5-point discrete Laplacian, scaled to be consistent for Gaussian
/// noise. Needs at least a 3x3 image.
double estimate_noise_variance(const Image& img);

/// Peak signal-to-noise ratio in dB with peak 1.0. Identical images report
/// +infinity.
double psnr(const Image& a, const Image& b);

} // namespace thermalnet
