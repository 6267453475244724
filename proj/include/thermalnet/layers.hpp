#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "thermalnet/rng.hpp"
#include "thermalnet/tensor.hpp"

namespace thermalnet {

enum class Mode { kTrain, kEval };

/// Carries the execution mode and the dropout RNG through a forward pass.
/// Eval mode never consults the RNG.
struct ForwardContext {
    Mode mode = Mode::kEval;
    Rng rng;

    explicit ForwardContext(Mode m = Mode::kEval, uint64_t seed = 0) : mode(m), rng(seed) {}
};

struct ParamSpec {
    std::string name;
    std::vector<size_t> shape;
    bool trainable = true;
};

enum class Padding { kSame, kValid };

/// Base layer: named parameter tensors plus forward/backward. A layer caches
/// whatever its backward pass needs during forward; backward throws if no
/// forward preceded it. Gradients are written (not accumulated) per backward
/// call; the batch dimension lives inside the tensors.
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }
    virtual std::string type() const = 0;
    virtual std::string type_display() const = 0;

    virtual std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const = 0;
    virtual std::vector<ParamSpec> param_specs() const { return {}; }

    virtual Tensor forward(const Tensor& input, ForwardContext& ctx) = 0;
    /// Returns the input gradient and fills this layer's parameter gradients.
    virtual Tensor backward(const Tensor& upstream) = 0;

    virtual void materialize();
    virtual void init_params(Rng& rng);
    virtual Tensor* find_param(const std::string& name);
    virtual Tensor* find_grad(const std::string& name);
    bool materialized() const;

    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;
    Tensor& grad(const std::string& name);

protected:
    void require_cache() const;

    std::string name_;
    std::map<std::string, Tensor> params_;
    std::map<std::string, Tensor> grads_;
    bool has_cache_ = false;
};

/// 2-D cross-correlation with square kernels. Same padding uses floor(k/2)
/// on each side; output H' = floor((H + 2p - k)/stride) + 1. Patch
/// accumulation runs in ascending (channel, ky, kx) order.
class Conv2d : public Layer {
public:
    Conv2d(std::string name, size_t in_channels, size_t out_channels, size_t kernel,
           size_t stride = 1, Padding padding = Padding::kSame);

    std::string type() const override { return "conv2d"; }
    std::string type_display() const override { return "Conv2D"; }
    std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const override;
    std::vector<ParamSpec> param_specs() const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& upstream) override;
    void init_params(Rng& rng) override;

    size_t in_channels() const { return in_c_; }
    size_t out_channels() const { return out_c_; }

private:
    size_t pad() const { return padding_ == Padding::kSame ? kernel_ / 2 : 0; }
    void spatial_out(size_t h, size_t w, size_t& oh, size_t& ow) const;

    size_t in_c_, out_c_, kernel_, stride_;
    Padding padding_;
    Tensor cached_input_;
};

/// Max pooling with clipped windows at padded borders. The 2x2/stride-2
/// configuration requires even spatial dimensions. Argmax positions are
/// cached for backward routing; ties take the first occurrence row-major.
class MaxPool2d : public Layer {
public:
    MaxPool2d(std::string name, size_t size = 2, size_t stride = 2, size_t pad = 0);

    std::string type() const override { return "maxpool"; }
    std::string type_display() const override { return "MaxPooling2D"; }
    std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& upstream) override;

private:
    size_t size_, stride_, pad_;
    std::vector<size_t> cached_argmax_;
    std::vector<size_t> cached_input_shape_;
};

class ReLU : public Layer {
public:
    explicit ReLU(std::string name) : Layer(std::move(name)) {}

    std::string type() const override { return "relu"; }
    std::string type_display() const override { return "ReLU"; }
    std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const override { return input_shape; }
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& upstream) override;

private:
    Tensor cached_input_;
};

/// Fully connected layer on [N,K] inputs, weight [K,U], optional fused ReLU.
class Dense : public Layer {
public:
    Dense(std::string name, size_t in_features, size_t units, bool relu = false);

    std::string type() const override { return "dense"; }
    std::string type_display() const override { return "Dense"; }
    std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const override;
    std::vector<ParamSpec> param_specs() const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& upstream) override;
    void init_params(Rng& rng) override;

    size_t units() const { return units_; }

private:
    size_t in_features_, units_;
    bool relu_;
    Tensor cached_input_;
    Tensor cached_preact_;
};

/// Inverted dropout: training zeroes each element with probability `rate`
/// and scales survivors by 1/(1-rate); eval is the identity.
class Dropout : public Layer {
public:
    Dropout(std::string name, double rate);

    std::string type() const override { return "dropout"; }
    std::string type_display() const override { return "Dropout"; }
    std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const override { return input_shape; }
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& upstream) override;

    double rate() const { return rate_; }

private:
    double rate_;
    Tensor cached_mask_;
    bool cached_identity_ = false;
};

/// Per-channel batch normalization on [N,C,H,W]. Training normalizes by
/// biased batch statistics (epsilon 1e-5) and blends them into the moving
/// statistics; eval normalizes by the moving statistics. gamma/beta are
/// trainable, moving_mean/moving_var are not.
class BatchNorm2d : public Layer {
public:
    BatchNorm2d(std::string name, size_t channels, double eps = 1e-5, double momentum = 0.99);

    std::string type() const override { return "batchnorm"; }
    std::string type_display() const override { return "BatchNormalization"; }
    std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const override { return input_shape; }
    std::vector<ParamSpec> param_specs() const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& upstream) override;
    void init_params(Rng& rng) override;

private:
    size_t channels_;
    double eps_, momentum_;
    Tensor cached_xhat_;
    std::vector<double> cached_inv_std_;
    bool cached_train_ = false;
};

/// Bottleneck residual unit: 1x1 reduce (carries the stride), 3x3, 1x1
/// expand, each followed by batch norm, with ReLU between; the skip path is
/// the identity or a strided 1x1 projection + batch norm when the shape
/// changes. Output is ReLU(branch + shortcut).
class ResidualBlock : public Layer {
public:
    ResidualBlock(std::string name, size_t in_channels, size_t mid_channels, size_t out_channels,
                  size_t stride, bool project);

    std::string type() const override { return "residual_block"; }
    std::string type_display() const override { return "ResidualBlock"; }
    std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const override;
    std::vector<ParamSpec> param_specs() const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& upstream) override;
    void materialize() override;
    void init_params(Rng& rng) override;
    Tensor* find_param(const std::string& name) override;
    Tensor* find_grad(const std::string& name) override;

private:
    Layer* child(const std::string& prefix) const;

    size_t in_c_, out_c_, stride_;
    bool project_;
    std::vector<std::pair<std::string, std::unique_ptr<Layer>>> children_;
};

class Flatten : public Layer {
public:
    explicit Flatten(std::string name) : Layer(std::move(name)) {}

    std::string type() const override { return "flatten"; }
    std::string type_display() const override { return "Flatten"; }
    std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& upstream) override;

private:
    std::vector<size_t> cached_input_shape_;
};

class GlobalAvgPool : public Layer {
public:
    explicit GlobalAvgPool(std::string name) : Layer(std::move(name)) {}

    std::string type() const override { return "global_avg_pool"; }
    std::string type_display() const override { return "GlobalAveragePooling2D"; }
    std::vector<size_t> output_shape(const std::vector<size_t>& input_shape) const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor backward(const Tensor& upstream) override;

private:
    std::vector<size_t> cached_input_shape_;
};

struct LossResult {
    double loss = 0.0;
    Tensor grad;
};

/// Mean over the batch of -log softmax(logits)[label], stabilized by
/// max-subtraction. grad = (softmax - onehot) / N.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Mean binary cross-entropy on [N,1] logits with labels in {0,1}, computed
/// in logit space. grad = (sigmoid(z) - y) / N.
LossResult sigmoid_bce(const Tensor& logits, const std::vector<int>& labels);

} // namespace thermalnet
