#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "thermalnet/layers.hpp"

namespace thermalnet {

struct LayerCount {
    std::string display;            // e.g. "dense (Dense)"
    std::vector<size_t> output_shape;  // without batch dimension, [C,H,W] or [K]
    uint64_t params = 0;
};

struct ParamCount {
    uint64_t trainable = 0;
    uint64_t non_trainable = 0;
    uint64_t total = 0;
    std::vector<LayerCount> per_layer;  // one row per summary row
};

/// Reference to a named parameter tensor inside a model. `base` marks
/// feature-extractor tensors (as opposed to head tensors).
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    bool trainable = true;
    bool base = true;
};

/// Ordered layer stack with a base (feature extractor) / head split.
/// Parameter tensors are allocated lazily: counting and summaries work from
/// layer specs alone; forward/save require initialize() or load_weights().
class Model {
public:
    Model(std::string name, std::vector<size_t> input_shape);

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    Layer& add_base(std::unique_ptr<Layer> layer);
    Layer& add_head(std::unique_ptr<Layer> layer);

    const std::string& name() const { return name_; }
    const std::vector<size_t>& input_shape() const { return input_shape_; }  // [C,H,W]
    size_t num_layers() const { return layers_.size(); }
    size_t base_layer_count() const { return base_count_; }
    Layer& layer(size_t i) { return *layers_[i]; }
    const Layer& layer(size_t i) const { return *layers_[i]; }

    /// Output units of the final layer (head width of the last dense).
    size_t num_outputs() const;

    std::vector<size_t> output_shape() const;

    bool initialized() const;
    void initialize(uint64_t seed);

    Tensor forward(const Tensor& batch, ForwardContext& ctx);
    /// Backpropagates through every layer; parameter gradients land in the
    /// layers. Returns the input gradient.
    Tensor backward(const Tensor& upstream);

    /// Flat list of all named parameters ("layer.param"), in layer order.
    std::vector<ParamRef> named_params();

    bool freeze_base = false;

private:
    void require_initialized() const;

    std::string name_;
    std::vector<size_t> input_shape_;
    std::vector<std::unique_ptr<Layer>> layers_;
    size_t base_count_ = 0;
    bool initialized_ = false;
};

/// VGG-19 feature stack (conv blocks 2-2-4-4-4 with 64/128/256/512/512
/// filters, 3x3 same-padding convolutions, five 2x2 max pools) plus a
/// flatten / dense / dropout / dense head. Input must be divisible by 32.
Model build_vgg19(size_t input_hw, size_t num_outputs, size_t head_width = 256, double dropout = 0.5);

/// ResNet-50: 7x7/2 stem conv + BN + ReLU + 3x3/2 max pool, bottleneck
/// stages [3,4,6,3] with output widths 256/512/1024/2048 and projection
/// shortcuts at stage entries, plus the same head as the VGG builder.
Model build_resnet50(size_t input_hw, size_t num_outputs, size_t head_width = 256, double dropout = 0.5);

/// Reduced desk-scale CNN: two conv/ReLU/pool blocks on single-channel
/// input, then the standard head. Input must be divisible by 4.
Model build_small_cnn(size_t input_hw, size_t num_outputs, size_t head_width = 32, double dropout = 0.0);

Model build_model(const std::string& kind, size_t input_hw, size_t num_outputs);

/// Exact parameter counts from layer specs; no parameter data is touched.
ParamCount count_params(const Model& m);

/// Text table mirroring the usual framework summary: one row per top-level
/// layer with the base collapsed into a single functional row, shapes shown
/// as (None, H, W, C).
std::string summarize(const Model& m);

/// Weighted convolution census: total counts every conv layer in the graph,
/// trunk excludes projection shortcuts.
struct ConvCensus {
    size_t total = 0;
    size_t trunk = 0;
};
ConvCensus conv_census(const Model& m);

} // namespace thermalnet
