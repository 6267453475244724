#include "thermalnet/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace thermalnet {

void KalmanConfig::validate() const {
    if (q < 0.0) throw std::invalid_argument("kalman: q must be >= 0");
    if (r && *r < 0.0) throw std::invalid_argument("kalman: r must be >= 0");
    if (init_p <= 0.0) throw std::invalid_argument("kalman: init_p must be > 0");
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("kalman: window must be odd and >= 1");
    if (window > 1 && r && q == 0.0 && *r == 0.0) {
        throw std::invalid_argument("kalman: q and r must not both be 0 when window > 1");
    }
}

KalmanState kalman_step(KalmanState s, double z, double q, double r) {
    if (q < 0.0 || r < 0.0) throw std::invalid_argument("kalman_step: q and r must be >= 0");
    const double p_prior = s.p + q;
    if (p_prior + r <= 0.0) throw std::invalid_argument("kalman_step: undefined gain (p + q + r == 0)");
    const double gain = p_prior / (p_prior + r);
    KalmanState next;
    next.x = s.x + gain * (z - s.x);
    next.p = (1.0 - gain) * p_prior;
    return next;
}

namespace {

struct Offset {
    int dy;
    int dx;
};

// Window offsets ordered by ascending Euclidean distance from the center,
// ties broken row-major. (0,0) always comes first.
std::vector<Offset> ordered_offsets(int window) {
    const int half = window / 2;
    std::vector<Offset> offsets;
    offsets.reserve(static_cast<size_t>(window) * window);
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) offsets.push_back({dy, dx});
    }
    std::stable_sort(offsets.begin(), offsets.end(), [](const Offset& a, const Offset& b) {
        return a.dy * a.dy + a.dx * a.dx < b.dy * b.dy + b.dx * b.dx;
    });
    return offsets;
}

int clamp_index(int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); }

} // namespace

Image denoise_image(const Image& img, const KalmanConfig& cfg) {
    cfg.validate();
    double r = cfg.r ? *cfg.r : estimate_noise_variance(img);
    if (cfg.window > 1 && cfg.q == 0.0 && r == 0.0) {
        throw std::invalid_argument("kalman: estimated r is 0 and q is 0; filter would be undefined");
    }
    const std::vector<Offset> offsets = ordered_offsets(cfg.window);

    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            KalmanState s{img.at(y, x), cfg.init_p};
            for (const Offset& o : offsets) {
                const int sy = clamp_index(y + o.dy, img.height - 1);
                const int sx = clamp_index(x + o.dx, img.width - 1);
                s = kalman_step(s, img.at(sy, sx), cfg.q, r);
            }
            // convexity already bounds the estimate; the clamp guards rounding
            out.at(y, x) = std::min(1.0, std::max(0.0, s.x));
        }
    }
    return out;
}

double estimate_noise_variance(const Image& img) {
    if (img.width < 3 || img.height < 3) throw std::invalid_argument("noise estimate needs at least 3x3");
    std::vector<double> lap;
    lap.reserve(static_cast<size_t>(img.width - 2) * (img.height - 2));
    for (int y = 1; y < img.height - 1; ++y) {
        for (int x = 1; x < img.width - 1; ++x) {
            const double v = 4.0 * img.at(y, x) - img.at(y - 1, x) - img.at(y + 1, x) -
                             img.at(y, x - 1) - img.at(y, x + 1);
            lap.push_back(std::fabs(v));
        }
    }
    const size_t mid = lap.size() / 2;
    std::nth_element(lap.begin(), lap.begin() + mid, lap.end());
    const double mad = lap[mid];
    // |N(0, 20 sigma^2)| has median 0.6745 * sqrt(20) * sigma
    const double sigma = mad / (0.674489750196082 * std::sqrt(20.0));
    return sigma * sigma;
}

double psnr(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) throw std::invalid_argument("psnr: dimension mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

} // namespace thermalnet
