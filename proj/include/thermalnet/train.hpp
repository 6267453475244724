#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermalnet/dataset.hpp"
#include "thermalnet/kalman.hpp"
#include "thermalnet/metrics.hpp"
#include "thermalnet/model.hpp"

namespace thermalnet {

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    Optimizer optimizer = Optimizer::kSgd;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    uint64_t seed = 0;
    bool denoise = false;
    KalmanConfig denoise_cfg;
    bool freeze_base = false;

    void validate() const;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

/// Thrown when the training loss becomes non-finite.
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Momentum SGD: v' = momentum * v - lr * grad; param' = param + v'.
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum);

/// Bias-corrected Adam on one tensor; t is the 1-based step count.
void adam_step(Tensor& param, const Tensor& grad, Tensor& m1, Tensor& m2, long t, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Mini-batch training. Shuffling, dropout masks and (if needed) parameter
/// initialization all derive from cfg.seed, so a fixed (model, data, cfg)
/// yields a bit-identical history. Denoising, when enabled, is applied once
/// at ingestion. Models with a single output unit train against binary
/// cross-entropy; wider heads use softmax cross-entropy.
TrainHistory train(Model& model, const LabeledDataset& train_set, const LabeledDataset& test_set,
                   const TrainConfig& cfg);

/// Eval-mode metrics. Predictions are argmax (threshold 0.5 for a 1-unit
/// head). When train_class_names is given, the model's output indices are
/// mapped onto the test set's label space by class name; predictions with no
/// matching test class count as wrong.
MetricsReport evaluate(Model& model, const LabeledDataset& test_set,
                       const std::vector<std::string>& train_class_names = {});

/// CSV with header epoch,train_loss,train_acc,test_loss,test_acc and reals
/// to six decimal places. An empty history is rejected.
void write_history_csv(const TrainHistory& h, const std::string& path);

} // namespace thermalnet
