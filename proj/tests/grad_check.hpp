#pragma once

// Finite-difference gradient checking used by both the unit and acceptance
// suites. The objective is a fixed random weighting of the layer output, so
// the upstream gradient is the weighting itself; the numeric side only ever
// calls forward().

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "thermalnet/layers.hpp"
#include "thermalnet/rng.hpp"

namespace gradcheck {

using thermalnet::ForwardContext;
using thermalnet::Layer;
using thermalnet::LossResult;
using thermalnet::Mode;
using thermalnet::ParamSpec;
using thermalnet::Rng;
using thermalnet::Tensor;

struct Result {
    size_t checked = 0;
    size_t failed = 0;
    double worst = 0.0;

    void absorb(const Result& other) {
        checked += other.checked;
        failed += other.failed;
        worst = std::max(worst, other.worst);
    }
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max(std::fabs(analytic) + std::fabs(numeric), 1e-3);
    return std::fabs(analytic - numeric) / denom;
}

inline Tensor random_tensor(const std::vector<size_t>& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    for (size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.uniform();
    return t;
}

// All values distinct by >= step and bounded away from zero; keeps max-pool
// argmax picks and ReLU signs stable under the finite-difference perturbation.
inline Tensor distinct_tensor(const std::vector<size_t>& shape, Rng& rng, double step = 0.01) {
    Tensor t(shape);
    std::vector<size_t> ranks(t.size());
    for (size_t i = 0; i < ranks.size(); ++i) ranks[i] = i;
    rng.shuffle(ranks);
    const double offset = 0.5 * step * static_cast<double>(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        t[i] = (static_cast<double>(ranks[i]) + 0.5) * step - offset;
    }
    return t;
}

inline double weighted_forward(Layer& layer, const Tensor& input, const Tensor& weighting, Mode mode,
                               uint64_t seed) {
    ForwardContext ctx(mode, seed);
    const Tensor out = layer.forward(input, ctx);
    double sum = 0.0;
    for (size_t i = 0; i < out.size(); ++i) sum += out[i] * weighting[i];
    return sum;
}

// Central-difference check of d(objective)/d(tensor coordinate) against the
// analytic gradient for up to max_coords coordinates of one tensor.
inline void check_tensor(Layer& layer, Tensor& tensor, const Tensor& analytic, const Tensor& input,
                         const Tensor& weighting, Mode mode, uint64_t seed, size_t max_coords, Rng& pick,
                         Result& result, double h = 1e-5, double tol = 1e-4) {
    const size_t count = std::min(tensor.size(), max_coords);
    for (size_t c = 0; c < count; ++c) {
        const size_t idx = tensor.size() <= max_coords ? c : static_cast<size_t>(pick.below(tensor.size()));
        const double saved = tensor[idx];
        tensor[idx] = saved + h;
        const double plus = weighted_forward(layer, input, weighting, mode, seed);
        tensor[idx] = saved - h;
        const double minus = weighted_forward(layer, input, weighting, mode, seed);
        tensor[idx] = saved;
        const double numeric = (plus - minus) / (2.0 * h);
        const double err = relative_error(analytic[idx], numeric);
        ++result.checked;
        result.worst = std::max(result.worst, err);
        if (err > tol) ++result.failed;
    }
}

// Checks the input gradient and every trainable parameter gradient of one
// layer, sampling up to max_coords coordinates per tensor.
inline Result check_layer(Layer& layer, Tensor input, Mode mode, uint64_t seed, uint64_t pick_seed,
                          size_t max_coords = 40) {
    Rng pick(pick_seed);
    ForwardContext probe(mode, seed);
    const Tensor out = layer.forward(input, probe);
    Rng wrng(pick_seed ^ 0x5eedULL);
    const Tensor weighting = random_tensor(out.shape(), wrng);

    ForwardContext ctx(mode, seed);
    layer.forward(input, ctx);
    const Tensor dinput = layer.backward(weighting);

    Result result;
    check_tensor(layer, input, dinput, input, weighting, mode, seed, max_coords, pick, result);
    for (const ParamSpec& spec : layer.param_specs()) {
        if (!spec.trainable) continue;
        Tensor* value = layer.find_param(spec.name);
        Tensor* grad = layer.find_grad(spec.name);
        const Tensor analytic = *grad;  // detached: FD forwards must not see updates
        check_tensor(layer, *value, analytic, input, weighting, mode, seed, max_coords, pick, result);
    }
    return result;
}

// Same scheme for a loss function: the objective is the loss itself.
inline Result check_loss(const std::function<LossResult(const Tensor&)>& loss_fn, Tensor logits,
                         size_t max_coords, uint64_t pick_seed, double h = 1e-5, double tol = 1e-4) {
    const Tensor analytic = loss_fn(logits).grad;
    Result result;
    Rng pick(pick_seed);
    const size_t count = std::min(logits.size(), max_coords);
    for (size_t c = 0; c < count; ++c) {
        const size_t idx = logits.size() <= max_coords ? c : static_cast<size_t>(pick.below(logits.size()));
        const double saved = logits[idx];
        logits[idx] = saved + h;
        const double plus = loss_fn(logits).loss;
        logits[idx] = saved - h;
        const double minus = loss_fn(logits).loss;
        logits[idx] = saved;
        const double numeric = (plus - minus) / (2.0 * h);
        const double err = relative_error(analytic[idx], numeric);
        ++result.checked;
        result.worst = std::max(result.worst, err);
        if (err > tol) ++result.failed;
    }
    return result;
}

} // namespace gradcheck
