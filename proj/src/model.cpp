#include "thermalnet/model.hpp"

#include <sstream>
#include <stdexcept>

namespace thermalnet {

Model::Model(std::string name, std::vector<size_t> input_shape)
    : name_(std::move(name)), input_shape_(std::move(input_shape)) {
    if (input_shape_.size() != 3) throw std::invalid_argument("model input shape must be [C,H,W]");
}

Layer& Model::add_base(std::unique_ptr<Layer> layer) {
    if (base_count_ != layers_.size()) {
        throw std::logic_error("base layers must be added before head layers");
    }
    layers_.push_back(std::move(layer));
    ++base_count_;
    return *layers_.back();
}

Layer& Model::add_head(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    return *layers_.back();
}

size_t Model::num_outputs() const {
    const std::vector<size_t> out = output_shape();
    return out.back();
}

std::vector<size_t> Model::output_shape() const {
    std::vector<size_t> shape = {1, input_shape_[0], input_shape_[1], input_shape_[2]};
    for (const auto& layer : layers_) shape = layer->output_shape(shape);
    shape.erase(shape.begin());
    return shape;
}

bool Model::initialized() const { return initialized_; }

void Model::initialize(uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : layers_) {
        if (!layer->materialized()) layer->materialize();
        layer->init_params(rng);
    }
    initialized_ = true;
}

void Model::require_initialized() const {
    if (!initialized_) throw std::logic_error("model parameters not initialized; call initialize() or load weights");
}

Tensor Model::forward(const Tensor& batch, ForwardContext& ctx) {
    require_initialized();
    if (batch.rank() != 4 || batch.dim(1) != input_shape_[0] || batch.dim(2) != input_shape_[1] ||
        batch.dim(3) != input_shape_[2]) {
        throw std::invalid_argument("model input must be [N," + std::to_string(input_shape_[0]) + "," +
                                    std::to_string(input_shape_[1]) + "," + std::to_string(input_shape_[2]) + "]");
    }
    Tensor x = batch;
    for (auto& layer : layers_) x = layer->forward(x, ctx);
    return x;
}

Tensor Model::backward(const Tensor& upstream) {
    require_initialized();
    Tensor g = upstream;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<ParamRef> Model::named_params() {
    std::vector<ParamRef> refs;
    for (size_t i = 0; i < layers_.size(); ++i) {
        Layer& layer = *layers_[i];
        for (const ParamSpec& spec : layer.param_specs()) {
            ParamRef ref;
            ref.name = layer.name() + "." + spec.name;
            ref.value = layer.find_param(spec.name);
            ref.grad = layer.find_grad(spec.name);
            ref.trainable = spec.trainable;
            ref.base = i < base_count_;
            refs.push_back(ref);
        }
    }
    return refs;
}

// ---------------------------------------------------------------------------
// Builders

namespace {

void check_divisible(size_t input_hw, size_t factor, const std::string& kind) {
    if (input_hw == 0 || input_hw % factor != 0) {
        throw std::invalid_argument(kind + ": input size must be a positive multiple of " +
                                    std::to_string(factor));
    }
}

void add_head(Model& m, size_t features, size_t head_width, double dropout, size_t num_outputs) {
    m.add_head(std::make_unique<Flatten>("flatten"));
    m.add_head(std::make_unique<Dense>("dense", features, head_width, true));
    m.add_head(std::make_unique<Dropout>("dropout", dropout));
    m.add_head(std::make_unique<Dense>("dense_1", head_width, num_outputs, false));
}

} // namespace

Model build_vgg19(size_t input_hw, size_t num_outputs, size_t head_width, double dropout) {
    check_divisible(input_hw, 32, "vgg19");
    if (num_outputs < 1) throw std::invalid_argument("vgg19: num_outputs must be >= 1");

    Model m("vgg19", {3, input_hw, input_hw});
    const size_t filters[5] = {64, 128, 256, 512, 512};
    const size_t convs[5] = {2, 2, 4, 4, 4};
    size_t in_c = 3;
    for (size_t b = 0; b < 5; ++b) {
        const std::string block = "block" + std::to_string(b + 1);
        for (size_t i = 0; i < convs[b]; ++i) {
            const std::string idx = std::to_string(i + 1);
            m.add_base(std::make_unique<Conv2d>(block + "_conv" + idx, in_c, filters[b], 3, 1, Padding::kSame));
            m.add_base(std::make_unique<ReLU>(block + "_relu" + idx));
            in_c = filters[b];
        }
        m.add_base(std::make_unique<MaxPool2d>(block + "_pool", 2, 2));
    }
    const size_t spatial = input_hw / 32;
    add_head(m, 512 * spatial * spatial, head_width, dropout, num_outputs);
    return m;
}

Model build_resnet50(size_t input_hw, size_t num_outputs, size_t head_width, double dropout) {
    check_divisible(input_hw, 32, "resnet50");
    if (num_outputs < 1) throw std::invalid_argument("resnet50: num_outputs must be >= 1");

    Model m("resnet50", {3, input_hw, input_hw});
    m.add_base(std::make_unique<Conv2d>("conv1", 3, 64, 7, 2, Padding::kSame));
    m.add_base(std::make_unique<BatchNorm2d>("conv1_bn", 64));
    m.add_base(std::make_unique<ReLU>("conv1_relu"));
    m.add_base(std::make_unique<MaxPool2d>("pool1", 3, 2, 1));

    const size_t blocks[4] = {3, 4, 6, 3};
    const size_t mids[4] = {64, 128, 256, 512};
    size_t in_c = 64;
    for (size_t s = 0; s < 4; ++s) {
        const size_t out_c = mids[s] * 4;
        for (size_t b = 0; b < blocks[s]; ++b) {
            const bool entry = b == 0;
            const size_t stride = entry && s > 0 ? 2 : 1;
            const std::string name = "conv" + std::to_string(s + 2) + "_block" + std::to_string(b + 1);
            m.add_base(std::make_unique<ResidualBlock>(name, in_c, mids[s], out_c, stride, entry));
            in_c = out_c;
        }
    }
    const size_t spatial = input_hw / 32;
    add_head(m, 2048 * spatial * spatial, head_width, dropout, num_outputs);
    return m;
}

Model build_small_cnn(size_t input_hw, size_t num_outputs, size_t head_width, double dropout) {
    check_divisible(input_hw, 4, "smallcnn");
    if (num_outputs < 1) throw std::invalid_argument("smallcnn: num_outputs must be >= 1");

    Model m("smallcnn", {1, input_hw, input_hw});
    m.add_base(std::make_unique<Conv2d>("conv1", 1, 8, 3, 1, Padding::kSame));
    m.add_base(std::make_unique<ReLU>("relu1"));
    m.add_base(std::make_unique<MaxPool2d>("pool1", 2, 2));
    m.add_base(std::make_unique<Conv2d>("conv2", 8, 16, 3, 1, Padding::kSame));
    m.add_base(std::make_unique<ReLU>("relu2"));
    m.add_base(std::make_unique<MaxPool2d>("pool2", 2, 2));
    const size_t spatial = input_hw / 4;
    add_head(m, 16 * spatial * spatial, head_width, dropout, num_outputs);
    return m;
}

Model build_model(const std::string& kind, size_t input_hw, size_t num_outputs) {
    if (kind == "vgg19") return build_vgg19(input_hw, num_outputs);
    if (kind == "resnet50") return build_resnet50(input_hw, num_outputs);
    if (kind == "smallcnn") return build_small_cnn(input_hw, num_outputs);
    throw std::invalid_argument("unknown model kind '" + kind + "' (expected vgg19, resnet50 or smallcnn)");
}

// ---------------------------------------------------------------------------
// Counting and summaries

namespace {

uint64_t spec_count(const ParamSpec& spec) {
    uint64_t n = 1;
    for (size_t d : spec.shape) n *= d;
    return n;
}

std::string shape_display(const std::vector<size_t>& shape) {
    // batchless [C,H,W] renders channel-last as (None, H, W, C)
    std::ostringstream out;
    out << "(None";
    if (shape.size() == 3) {
        out << ", " << shape[1] << ", " << shape[2] << ", " << shape[0];
    } else {
        for (size_t d : shape) out << ", " << d;
    }
    out << ")";
    return out.str();
}

} // namespace

ParamCount count_params(const Model& m) {
    ParamCount pc;
    uint64_t base_params = 0;
    std::vector<size_t> shape = {1, m.input_shape()[0], m.input_shape()[1], m.input_shape()[2]};
    std::vector<size_t> base_out;

    for (size_t i = 0; i < m.num_layers(); ++i) {
        const Layer& layer = m.layer(i);
        shape = layer.output_shape(shape);
        uint64_t layer_total = 0;
        for (const ParamSpec& spec : layer.param_specs()) {
            const uint64_t n = spec_count(spec);
            layer_total += n;
            if (spec.trainable) {
                pc.trainable += n;
            } else {
                pc.non_trainable += n;
            }
        }
        if (i < m.base_layer_count()) {
            base_params += layer_total;
            if (i + 1 == m.base_layer_count()) {
                base_out.assign(shape.begin() + 1, shape.end());
            }
        } else {
            pc.per_layer.push_back({layer.name() + " (" + layer.type_display() + ")",
                                    std::vector<size_t>(shape.begin() + 1, shape.end()), layer_total});
        }
    }
    pc.total = pc.trainable + pc.non_trainable;
    if (m.base_layer_count() > 0) {
        pc.per_layer.insert(pc.per_layer.begin(), {m.name() + " (Functional)", base_out, base_params});
    }
    return pc;
}

std::string summarize(const Model& m) {
    const ParamCount pc = count_params(m);
    std::ostringstream out;
    out << "Model: " << m.name() << "\n";
    const std::string rule(64, '_');
    out << rule << "\n";

    auto row = [&out](const std::string& a, const std::string& b, const std::string& c) {
        out << a;
        for (size_t i = a.size(); i < 30; ++i) out << ' ';
        out << b;
        for (size_t i = b.size(); i < 24; ++i) out << ' ';
        out << c << "\n";
    };
    row("Layer (Type)", "Output Shape", "Param #");
    out << std::string(64, '=') << "\n";
    for (const LayerCount& lc : pc.per_layer) {
        row(lc.display, shape_display(lc.output_shape), std::to_string(lc.params));
    }
    out << std::string(64, '=') << "\n";
    out << "Total params: " << pc.total << "\n";
    out << "Trainable params: " << pc.trainable << "\n";
    out << "Non-trainable params: " << pc.non_trainable << "\n";
    return out.str();
}

ConvCensus conv_census(const Model& m) {
    ConvCensus census;
    for (size_t i = 0; i < m.num_layers(); ++i) {
        for (const ParamSpec& spec : m.layer(i).param_specs()) {
            if (spec.shape.size() != 4) continue;  // conv kernels are the only rank-4 tensors
            ++census.total;
            if (spec.name.find("proj") == std::string::npos) ++census.trunk;
        }
    }
    return census;
}

} // namespace thermalnet
