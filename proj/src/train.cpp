#include "thermalnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "thermalnet/rng.hpp"

namespace thermalnet {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("train: momentum must be in [0,1)");
    if (denoise) denoise_cfg.validate();
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum) {
    if (!param.same_shape(grad) || !param.same_shape(velocity)) {
        throw std::invalid_argument("sgd_step: shape mismatch");
    }
    for (size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * grad[i];
        param[i] += velocity[i];
    }
}

void adam_step(Tensor& param, const Tensor& grad, Tensor& m1, Tensor& m2, long t, double lr,
               double beta1, double beta2, double eps) {
    if (!param.same_shape(grad) || !param.same_shape(m1) || !param.same_shape(m2)) {
        throw std::invalid_argument("adam_step: shape mismatch");
    }
    if (t < 1) throw std::invalid_argument("adam_step: step count must be >= 1");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < param.size(); ++i) {
        m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
        m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = m1[i] / bc1;
        const double vhat = m2[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

namespace {

Tensor make_batch(const LabeledDataset& ds, const std::vector<size_t>& indices, size_t first,
                  size_t count, const Model& model, std::vector<int>& labels_out) {
    const size_t channels = model.input_shape()[0];
    const size_t H = model.input_shape()[1];
    const size_t W = model.input_shape()[2];
    Tensor batch({count, channels, H, W});
    labels_out.resize(count);
    for (size_t b = 0; b < count; ++b) {
        const Sample& s = ds.items[indices[first + b]];
        if (static_cast<size_t>(s.image.height) != H || static_cast<size_t>(s.image.width) != W) {
            throw std::invalid_argument("sample size " + std::to_string(s.image.width) + "x" +
                                        std::to_string(s.image.height) + " does not match model input");
        }
        const Tensor one = to_input_tensor(s.image, static_cast<int>(channels));
        std::copy(one.data(), one.data() + one.size(), batch.data() + b * one.size());
        labels_out[b] = s.label;
    }
    return batch;
}

LossResult head_loss(const Model& model, const Tensor& logits, const std::vector<int>& labels) {
    return model.num_outputs() == 1 ? sigmoid_bce(logits, labels) : softmax_cross_entropy(logits, labels);
}

size_t count_correct(const Model& model, const Tensor& logits, const std::vector<int>& labels) {
    const size_t N = logits.dim(0);
    size_t correct = 0;
    if (model.num_outputs() == 1) {
        for (size_t n = 0; n < N; ++n) {
            const int pred = logits[n] > 0.0 ? 1 : 0;
            if (pred == labels[n]) ++correct;
        }
    } else {
        const size_t K = logits.dim(1);
        for (size_t n = 0; n < N; ++n) {
            size_t best = 0;
            for (size_t k = 1; k < K; ++k) {
                if (logits.at(n, k) > logits.at(n, best)) best = k;
            }
            if (static_cast<int>(best) == labels[n]) ++correct;
        }
    }
    return correct;
}

struct OptState {
    std::vector<Tensor> slot1;  // sgd velocity / adam m1
    std::vector<Tensor> slot2;  // adam m2
    long step = 0;
};

void apply_updates(std::vector<ParamRef>& refs, OptState& state, const TrainConfig& cfg, bool frozen_base) {
    ++state.step;
    for (size_t i = 0; i < refs.size(); ++i) {
        ParamRef& ref = refs[i];
        if (!ref.trainable) continue;
        if (frozen_base && ref.base) continue;
        if (cfg.optimizer == Optimizer::kSgd) {
            sgd_step(*ref.value, *ref.grad, state.slot1[i], cfg.learning_rate, cfg.momentum);
        } else {
            adam_step(*ref.value, *ref.grad, state.slot1[i], state.slot2[i], state.step, cfg.learning_rate);
        }
    }
}

LabeledDataset denoised_copy(const LabeledDataset& ds, const KalmanConfig& cfg) {
    LabeledDataset out;
    out.class_names = ds.class_names;
    out.items.reserve(ds.items.size());
    for (const Sample& s : ds.items) out.items.push_back({denoise_image(s.image, cfg), s.label});
    return out;
}

// eval-mode loss and accuracy over a whole dataset
std::pair<double, double> score_dataset(Model& model, const LabeledDataset& ds, size_t batch_size) {
    std::vector<size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t first = 0; first < order.size(); first += batch_size) {
        const size_t count = std::min(batch_size, order.size() - first);
        std::vector<int> labels;
        const Tensor batch = make_batch(ds, order, first, count, model, labels);
        ForwardContext ctx(Mode::kEval);
        const Tensor logits = model.forward(batch, ctx);
        const LossResult res = head_loss(model, logits, labels);
        loss_sum += res.loss * static_cast<double>(count);
        correct += count_correct(model, logits, labels);
    }
    const double n = static_cast<double>(ds.size());
    return {loss_sum / n, static_cast<double>(correct) / n};
}

} // namespace

TrainHistory train(Model& model, const LabeledDataset& train_set, const LabeledDataset& test_set,
                   const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.items.empty() || test_set.items.empty()) {
        throw std::invalid_argument("train: datasets must be nonempty");
    }
    const size_t K = model.num_outputs();
    if (K == 1) {
        if (train_set.num_classes() != 2) {
            throw std::invalid_argument("train: 1-unit head needs a 2-class dataset");
        }
    } else if (train_set.num_classes() != K) {
        throw std::invalid_argument("train: model has " + std::to_string(K) + " outputs but dataset has " +
                                    std::to_string(train_set.num_classes()) + " classes");
    }

    LabeledDataset tr_storage, te_storage;
    const LabeledDataset* tr_ptr = &train_set;
    const LabeledDataset* te_ptr = &test_set;
    if (cfg.denoise) {
        tr_storage = denoised_copy(train_set, cfg.denoise_cfg);
        te_storage = denoised_copy(test_set, cfg.denoise_cfg);
        tr_ptr = &tr_storage;
        te_ptr = &te_storage;
    }
    const LabeledDataset& tr = *tr_ptr;
    const LabeledDataset& te = *te_ptr;

    if (!model.initialized()) model.initialize(derive_seed(cfg.seed, 0));
    model.freeze_base = cfg.freeze_base;

    std::vector<ParamRef> refs = model.named_params();
    OptState opt;
    opt.slot1.reserve(refs.size());
    opt.slot2.reserve(refs.size());
    for (const ParamRef& ref : refs) {
        opt.slot1.emplace_back(ref.value->shape());
        opt.slot2.emplace_back(ref.value->shape());
    }

    Rng shuffle_rng(derive_seed(cfg.seed, 1));
    std::vector<size_t> order(tr.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t correct = 0;
        size_t batch_index = 0;
        for (size_t first = 0; first < order.size(); first += cfg.batch_size, ++batch_index) {
            const size_t count = std::min<size_t>(cfg.batch_size, order.size() - first);
            std::vector<int> labels;
            const Tensor batch = make_batch(tr, order, first, count, model, labels);
            ForwardContext ctx(Mode::kTrain,
                               derive_seed(cfg.seed, 2 + static_cast<uint64_t>(epoch) * 1000003 + batch_index));
            const Tensor logits = model.forward(batch, ctx);
            const LossResult res = head_loss(model, logits, labels);
            if (!std::isfinite(res.loss)) {
                throw TrainingDiverged("training loss is not finite at epoch " + std::to_string(epoch + 1));
            }
            loss_sum += res.loss * static_cast<double>(count);
            correct += count_correct(model, logits, labels);
            model.backward(res.grad);
            apply_updates(refs, opt, cfg, cfg.freeze_base);
        }
        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(tr.size());
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(tr.size());
        const auto [test_loss, test_acc] = score_dataset(model, te, static_cast<size_t>(cfg.batch_size));
        stats.test_loss = test_loss;
        stats.test_accuracy = test_acc;
        history.epochs.push_back(stats);
    }
    return history;
}

MetricsReport evaluate(Model& model, const LabeledDataset& test_set,
                       const std::vector<std::string>& train_class_names) {
    if (test_set.items.empty()) throw std::invalid_argument("evaluate: empty test set");
    if (!model.initialized()) throw std::logic_error("evaluate: model parameters not initialized");
    const size_t K = model.num_outputs();
    const size_t model_classes = K == 1 ? 2 : K;

    // model output index -> test label space index (-1 = no matching class)
    std::vector<int> remap(model_classes);
    if (train_class_names.empty()) {
        for (size_t j = 0; j < model_classes; ++j) {
            remap[j] = j < test_set.num_classes() ? static_cast<int>(j) : -1;
        }
    } else {
        if (train_class_names.size() != model_classes) {
            throw std::invalid_argument("evaluate: train class names do not match model outputs");
        }
        for (size_t j = 0; j < model_classes; ++j) {
            const auto it = std::find(test_set.class_names.begin(), test_set.class_names.end(),
                                      train_class_names[j]);
            remap[j] = it == test_set.class_names.end()
                           ? -1
                           : static_cast<int>(it - test_set.class_names.begin());
        }
    }

    ConfusionMatrix cm(test_set.num_classes());
    std::vector<size_t> order(test_set.size());
    std::iota(order.begin(), order.end(), 0);
    const size_t batch_size = 32;
    for (size_t first = 0; first < order.size(); first += batch_size) {
        const size_t count = std::min(batch_size, order.size() - first);
        std::vector<int> labels;
        const Tensor batch = make_batch(test_set, order, first, count, model, labels);
        ForwardContext ctx(Mode::kEval);
        const Tensor logits = model.forward(batch, ctx);
        for (size_t n = 0; n < count; ++n) {
            size_t pred;
            if (K == 1) {
                pred = logits[n] > 0.0 ? 1 : 0;
            } else {
                pred = 0;
                for (size_t k = 1; k < K; ++k) {
                    if (logits.at(n, k) > logits.at(n, pred)) pred = k;
                }
            }
            cm.add(labels[n], remap[pred]);
        }
    }
    return metrics_from_confusion(cm, test_set.class_names);
}

void write_history_csv(const TrainHistory& h, const std::string& path) {
    if (h.epochs.empty()) throw std::invalid_argument("history must contain at least one epoch");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch,train_loss,train_acc,test_loss,test_acc\n";
    for (size_t i = 0; i < h.epochs.size(); ++i) {
        const EpochStats& e = h.epochs[i];
        char line[160];
        std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%.6f,%.6f\n", i + 1, e.train_loss,
                      e.train_accuracy, e.test_loss, e.test_accuracy);
        out << line;
    }
    if (!out) throw std::runtime_error("short write to " + path);
}

} // namespace thermalnet
