#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "thermalnet/kalman.hpp"
#include "thermalnet/rng.hpp"

using namespace thermalnet;

namespace {

Image noisy_copy(const Image& clean, double sd, uint64_t seed) {
    Rng rng(seed);
    Image out = clean;
    for (auto& p : out.pixels) {
        p += sd * rng.normal();
        p = std::clamp(p, 0.0, 1.0);
    }
    return out;
}

Image smooth_test_image(int side) {
    Image img(side, side);
    const double c = (side - 1) / 2.0;
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const double d2 = (x - c) * (x - c) + (y - c) * (y - c);
            img.at(y, x) = 0.15 + 0.7 * std::exp(-d2 / (2.0 * side));
        }
    }
    return img;
}

} // namespace

TEST_CASE("kalman_step recurrence") {
    const KalmanState s1 = kalman_step({0.0, 1.0}, 1.0, 0.0, 1.0);
    CHECK(s1.x == doctest::Approx(0.5));
    CHECK(s1.p == doctest::Approx(0.5));

    // zero innovation leaves the estimate alone
    const KalmanState s2 = kalman_step({0.42, 3.0}, 0.42, 0.7, 0.9);
    CHECK(s2.x == doctest::Approx(0.42));

    // perfect measurement
    const KalmanState s3 = kalman_step({0.1, 2.0}, 0.8, 0.5, 0.0);
    CHECK(s3.x == doctest::Approx(0.8));
    CHECK(s3.p == doctest::Approx(0.0));

    CHECK_THROWS_AS(kalman_step({0.0, 0.0}, 1.0, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(kalman_step({0.0, 1.0}, 1.0, -0.1, 1.0), std::invalid_argument);
}

TEST_CASE("gain stays in [0,1] and variance is monotone") {
    Rng rng(17);
    for (int trial = 0; trial < 10000; ++trial) {
        const double p = rng.uniform() * 10.0;
        const double q = rng.uniform() * 2.0;
        const double r = rng.uniform() * 2.0;
        if (p + q + r <= 0.0) continue;
        const double p_prior = p + q;
        const double gain = p_prior / (p_prior + r);
        CHECK(gain >= 0.0);
        CHECK(gain <= 1.0);
        const KalmanState next = kalman_step({0.0, p}, 1.0, q, r);
        CHECK(next.p <= p + q);
        CHECK(next.x >= 0.0);
        CHECK(next.x <= 1.0);  // convex blend of prior 0 and measurement 1
    }
}

TEST_CASE("gains strictly decrease when q = 0") {
    KalmanState s{0.5, 1.0};
    const double r = 0.3;
    double prev_gain = 2.0;
    for (int step = 0; step < 20; ++step) {
        const double gain = s.p / (s.p + r);
        CHECK(gain < prev_gain);
        prev_gain = gain;
        s = kalman_step(s, 0.7, 0.0, r);
    }
}

TEST_CASE("config validation") {
    KalmanConfig cfg;
    cfg.window = 4;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.window = 3;
    cfg.q = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.q = 0.0;
    cfg.r = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.r = 0.1;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("constant image is a fixed point") {
    Image img(9, 7, 0.5);
    const Image out = denoise_image(img, KalmanConfig{});
    for (size_t i = 0; i < img.size(); ++i) CHECK(out.pixels[i] == doctest::Approx(img.pixels[i]));
}

TEST_CASE("q=0 with diffuse prior reproduces the window mean") {
    Rng rng(23);
    Image img(5, 5);
    for (auto& p : img.pixels) p = rng.uniform();

    KalmanConfig cfg;
    cfg.q = 0.0;
    cfg.init_p = 1e9;
    cfg.window = 3;
    const Image out = denoise_image(img, cfg);

    for (int y = 1; y < 4; ++y) {
        for (int x = 1; x < 4; ++x) {
            double mean = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) mean += img.at(y + dy, x + dx);
            }
            mean /= 9.0;
            CHECK(out.at(y, x) == doctest::Approx(mean).epsilon(1e-6));
        }
    }
}

TEST_CASE("each output pixel stays inside its window's value range") {
    Rng rng(31);
    Image img(12, 10);
    for (auto& p : img.pixels) p = rng.uniform();
    const Image out = denoise_image(img, KalmanConfig{});
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double lo = img.at(y, x), hi = img.at(y, x);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int sy = std::clamp(y + dy, 0, img.height - 1);
                    const int sx = std::clamp(x + dx, 0, img.width - 1);
                    lo = std::min(lo, img.at(sy, sx));
                    hi = std::max(hi, img.at(sy, sx));
                }
            }
            CHECK(out.at(y, x) >= lo - 1e-12);
            CHECK(out.at(y, x) <= hi + 1e-12);
        }
    }
}

TEST_CASE("denoising improves PSNR on gaussian noise") {
    const Image clean = smooth_test_image(48);
    double improvement_sum = 0.0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        const Image noisy = noisy_copy(clean, 0.1, seed);
        const Image denoised = denoise_image(noisy, KalmanConfig{});
        improvement_sum += psnr(denoised, clean) - psnr(noisy, clean);
    }
    CHECK(improvement_sum / 20.0 > 0.0);
}

TEST_CASE("estimate_noise_variance") {
    CHECK(estimate_noise_variance(Image(8, 8, 0.4)) == doctest::Approx(0.0));
    CHECK_THROWS_AS(estimate_noise_variance(Image(2, 2, 0.1)), std::invalid_argument);

    Rng rng(77);
    Image noise(64, 64, 0.5);
    for (auto& p : noise.pixels) p = std::clamp(p + 0.1 * rng.normal(), 0.0, 1.0);
    const double est = estimate_noise_variance(noise);
    CHECK(est > 0.007);
    CHECK(est < 0.013);

    // adding a constant (without clamping) does not change the estimate
    Image shifted = noise;
    for (auto& p : shifted.pixels) p += 0.05;
    CHECK(estimate_noise_variance(shifted) == doctest::Approx(est).epsilon(1e-9));
}

TEST_CASE("psnr") {
    Image a(10, 10, 0.5);
    Image b(10, 10, 0.6);  // MSE = 0.01
    CHECK(psnr(a, b) == doctest::Approx(20.0));
    CHECK(std::isinf(psnr(a, a)));
    CHECK_THROWS_AS(psnr(a, Image(9, 10, 0.5)), std::invalid_argument);

    Rng rng(13);
    Image x(6, 6), y(6, 6);
    for (auto& p : x.pixels) p = rng.uniform();
    for (auto& p : y.pixels) p = rng.uniform();
    double mse = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x.pixels[i] - y.pixels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    CHECK(psnr(x, y) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-9));
}

TEST_CASE("denoise output respects the [0,1] image invariant") {
    Rng rng(41);
    Image img(16, 16);
    for (auto& p : img.pixels) p = rng.uniform();
    KalmanConfig cfg;
    cfg.window = 5;
    cfg.q = 0.05;
    const Image out = denoise_image(img, cfg);
    for (double v : out.pixels) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}
