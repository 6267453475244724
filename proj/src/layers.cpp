#include "thermalnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace thermalnet {

namespace {

// c[m,n] += a[m,k] * b[k,n]; ascending-k accumulation per element
void gemm_acc(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = b + kk * n;
            for (size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

// c[m,n] += a[m,t] * b[n,t]^T
void gemm_nt_acc(const double* a, const double* b, double* c, size_t m, size_t t, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * t;
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * t;
            double sum = 0.0;
            for (size_t tt = 0; tt < t; ++tt) sum += arow[tt] * brow[tt];
            crow[j] += sum;
        }
    }
}

// c[m,n] += a[t,m]^T * b[t,n]
void gemm_tn_acc(const double* a, const double* b, double* c, size_t t, size_t m, size_t n) {
    for (size_t tt = 0; tt < t; ++tt) {
        const double* arow = a + tt * m;
        const double* brow = b + tt * n;
        for (size_t i = 0; i < m; ++i) {
            const double aim = arow[i];
            double* crow = c + i * n;
            for (size_t j = 0; j < n; ++j) crow[j] += aim * brow[j];
        }
    }
}

// Unrolls kernel patches of one [C,H,W] sample into col[C*k*k, OH*OW].
void im2col(const double* src, size_t C, size_t H, size_t W, size_t k, size_t stride, size_t pad,
            size_t OH, size_t OW, double* col) {
    size_t row = 0;
    for (size_t c = 0; c < C; ++c) {
        const double* plane = src + c * H * W;
        for (size_t ky = 0; ky < k; ++ky) {
            for (size_t kx = 0; kx < k; ++kx, ++row) {
                double* dst = col + row * OH * OW;
                for (size_t oy = 0; oy < OH; ++oy) {
                    const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                    if (iy < 0 || iy >= static_cast<long>(H)) {
                        for (size_t ox = 0; ox < OW; ++ox) *dst++ = 0.0;
                        continue;
                    }
                    for (size_t ox = 0; ox < OW; ++ox) {
                        const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                        *dst++ = (ix < 0 || ix >= static_cast<long>(W)) ? 0.0 : plane[iy * W + ix];
                    }
                }
            }
        }
    }
}

// Scatter-adds col gradients back into one [C,H,W] input gradient.
void col2im_acc(const double* col, size_t C, size_t H, size_t W, size_t k, size_t stride, size_t pad,
                size_t OH, size_t OW, double* dst) {
    size_t row = 0;
    for (size_t c = 0; c < C; ++c) {
        double* plane = dst + c * H * W;
        for (size_t ky = 0; ky < k; ++ky) {
            for (size_t kx = 0; kx < k; ++kx, ++row) {
                const double* src = col + row * OH * OW;
                for (size_t oy = 0; oy < OH; ++oy) {
                    const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                    if (iy < 0 || iy >= static_cast<long>(H)) {
                        src += OW;
                        continue;
                    }
                    for (size_t ox = 0; ox < OW; ++ox, ++src) {
                        const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                        if (ix >= 0 && ix < static_cast<long>(W)) plane[iy * W + ix] += *src;
                    }
                }
            }
        }
    }
}

void require_rank4(const Tensor& t, const std::string& who) {
    if (t.rank() != 4) throw std::invalid_argument(who + ": expected [N,C,H,W] input, got " + t.shape_str());
}

} // namespace

// ---------------------------------------------------------------------------
// Layer base

void Layer::materialize() {
    for (const ParamSpec& spec : param_specs()) {
        params_.emplace(spec.name, Tensor(spec.shape));
        grads_.emplace(spec.name, Tensor(spec.shape));
    }
}

bool Layer::materialized() const {
    const std::vector<ParamSpec> specs = param_specs();
    if (specs.empty()) return true;
    return const_cast<Layer*>(this)->find_param(specs.front().name) != nullptr;
}

void Layer::init_params(Rng&) {}

Tensor* Layer::find_param(const std::string& name) {
    auto it = params_.find(name);
    return it == params_.end() ? nullptr : &it->second;
}

Tensor* Layer::find_grad(const std::string& name) {
    auto it = grads_.find(name);
    return it == grads_.end() ? nullptr : &it->second;
}

Tensor& Layer::param(const std::string& name) {
    Tensor* t = find_param(name);
    if (!t) throw std::invalid_argument(name_ + ": no parameter '" + name + "'");
    return *t;
}

const Tensor& Layer::param(const std::string& name) const {
    return const_cast<Layer*>(this)->param(name);
}

Tensor& Layer::grad(const std::string& name) {
    Tensor* t = find_grad(name);
    if (!t) throw std::invalid_argument(name_ + ": no gradient '" + name + "'");
    return *t;
}

void Layer::require_cache() const {
    if (!has_cache_) throw std::logic_error(name_ + ": backward called without a preceding forward");
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, size_t in_channels, size_t out_channels, size_t kernel,
               size_t stride, Padding padding)
    : Layer(std::move(name)), in_c_(in_channels), out_c_(out_channels), kernel_(kernel),
      stride_(stride), padding_(padding) {
    if (in_c_ == 0 || out_c_ == 0 || kernel_ == 0 || stride_ == 0) {
        throw std::invalid_argument(name_ + ": conv hyperparameters must be >= 1");
    }
}

void Conv2d::spatial_out(size_t h, size_t w, size_t& oh, size_t& ow) const {
    const size_t p = pad();
    if (h + 2 * p < kernel_ || w + 2 * p < kernel_) {
        throw std::invalid_argument(name_ + ": kernel larger than padded input");
    }
    oh = (h + 2 * p - kernel_) / stride_ + 1;
    ow = (w + 2 * p - kernel_) / stride_ + 1;
}

std::vector<size_t> Conv2d::output_shape(const std::vector<size_t>& in) const {
    if (in.size() != 4) throw std::invalid_argument(name_ + ": expected rank-4 input shape");
    if (in[1] != in_c_) {
        throw std::invalid_argument(name_ + ": channel mismatch, got " + std::to_string(in[1]) +
                                    " expected " + std::to_string(in_c_));
    }
    size_t oh, ow;
    spatial_out(in[2], in[3], oh, ow);
    return {in[0], out_c_, oh, ow};
}

std::vector<ParamSpec> Conv2d::param_specs() const {
    return {{"weight", {out_c_, in_c_, kernel_, kernel_}, true}, {"bias", {out_c_}, true}};
}

void Conv2d::init_params(Rng& rng) {
    Tensor& w = param("weight");
    const double sd = std::sqrt(2.0 / static_cast<double>(in_c_ * kernel_ * kernel_));
    for (size_t i = 0; i < w.size(); ++i) w[i] = sd * rng.normal();
    Tensor& b = param("bias");
    for (size_t i = 0; i < b.size(); ++i) b[i] = 0.0;
}

Tensor Conv2d::forward(const Tensor& input, ForwardContext&) {
    const std::vector<size_t> out_shape = output_shape(input.shape());
    const size_t N = input.dim(0), H = input.dim(2), W = input.dim(3);
    const size_t OH = out_shape[2], OW = out_shape[3];
    const size_t ckk = in_c_ * kernel_ * kernel_;
    const size_t spatial = OH * OW;

    Tensor out(out_shape);
    Tensor col({ckk, spatial});
    const Tensor& weight = param("weight");
    const Tensor& bias = param("bias");
    for (size_t n = 0; n < N; ++n) {
        im2col(input.data() + n * in_c_ * H * W, in_c_, H, W, kernel_, stride_, pad(), OH, OW, col.data());
        double* out_n = out.data() + n * out_c_ * spatial;
        for (size_t f = 0; f < out_c_; ++f) {
            std::fill(out_n + f * spatial, out_n + (f + 1) * spatial, bias[f]);
        }
        gemm_acc(weight.data(), col.data(), out_n, out_c_, ckk, spatial);
    }
    cached_input_ = input;
    has_cache_ = true;
    return out;
}

Tensor Conv2d::backward(const Tensor& upstream) {
    require_cache();
    const Tensor& input = cached_input_;
    const size_t N = input.dim(0), H = input.dim(2), W = input.dim(3);
    const std::vector<size_t> out_shape = output_shape(input.shape());
    if (upstream.shape() != out_shape) {
        throw std::invalid_argument(name_ + ": upstream shape " + upstream.shape_str() + " mismatch");
    }
    const size_t OH = out_shape[2], OW = out_shape[3];
    const size_t ckk = in_c_ * kernel_ * kernel_;
    const size_t spatial = OH * OW;

    Tensor& dw = grad("weight");
    Tensor& db = grad("bias");
    std::fill(dw.data(), dw.data() + dw.size(), 0.0);
    std::fill(db.data(), db.data() + db.size(), 0.0);

    const Tensor& weight = param("weight");
    Tensor dinput(input.shape());
    Tensor col({ckk, spatial});
    Tensor dcol({ckk, spatial});
    for (size_t n = 0; n < N; ++n) {
        const double* up_n = upstream.data() + n * out_c_ * spatial;
        im2col(input.data() + n * in_c_ * H * W, in_c_, H, W, kernel_, stride_, pad(), OH, OW, col.data());
        gemm_nt_acc(up_n, col.data(), dw.data(), out_c_, spatial, ckk);
        for (size_t f = 0; f < out_c_; ++f) {
            double sum = 0.0;
            for (size_t s = 0; s < spatial; ++s) sum += up_n[f * spatial + s];
            db[f] += sum;
        }
        std::fill(dcol.data(), dcol.data() + dcol.size(), 0.0);
        gemm_tn_acc(weight.data(), up_n, dcol.data(), out_c_, ckk, spatial);
        col2im_acc(dcol.data(), in_c_, H, W, kernel_, stride_, pad(), OH, OW,
                   dinput.data() + n * in_c_ * H * W);
    }
    return dinput;
}

// ---------------------------------------------------------------------------
// MaxPool2d

MaxPool2d::MaxPool2d(std::string name, size_t size, size_t stride, size_t pad)
    : Layer(std::move(name)), size_(size), stride_(stride), pad_(pad) {
    if (size_ == 0 || stride_ == 0) throw std::invalid_argument(name_ + ": pool size/stride must be >= 1");
    if (pad_ >= size_) throw std::invalid_argument(name_ + ": pool pad must be < size");
}

std::vector<size_t> MaxPool2d::output_shape(const std::vector<size_t>& in) const {
    if (in.size() != 4) throw std::invalid_argument(name_ + ": expected rank-4 input shape");
    const size_t H = in[2], W = in[3];
    if (size_ == 2 && stride_ == 2 && pad_ == 0 && (H % 2 != 0 || W % 2 != 0)) {
        throw std::invalid_argument(name_ + ": 2x2/2 pooling requires even spatial dimensions");
    }
    if (H + 2 * pad_ < size_ || W + 2 * pad_ < size_) {
        throw std::invalid_argument(name_ + ": pool window larger than padded input");
    }
    return {in[0], in[1], (H + 2 * pad_ - size_) / stride_ + 1, (W + 2 * pad_ - size_) / stride_ + 1};
}

Tensor MaxPool2d::forward(const Tensor& input, ForwardContext&) {
    const std::vector<size_t> out_shape = output_shape(input.shape());
    const size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const size_t OH = out_shape[2], OW = out_shape[3];

    Tensor out(out_shape);
    cached_argmax_.assign(out.size(), 0);
    const double* src = input.data();
    double* dst = out.data();
    size_t o = 0;
    for (size_t n = 0; n < N; ++n) {
        for (size_t c = 0; c < C; ++c) {
            const double* plane = src + (n * C + c) * H * W;
            for (size_t oy = 0; oy < OH; ++oy) {
                for (size_t ox = 0; ox < OW; ++ox, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    size_t best_idx = 0;
                    for (size_t ky = 0; ky < size_; ++ky) {
                        const long iy = static_cast<long>(oy * stride_ + ky) - static_cast<long>(pad_);
                        if (iy < 0 || iy >= static_cast<long>(H)) continue;
                        for (size_t kx = 0; kx < size_; ++kx) {
                            const long ix = static_cast<long>(ox * stride_ + kx) - static_cast<long>(pad_);
                            if (ix < 0 || ix >= static_cast<long>(W)) continue;
                            const size_t idx = static_cast<size_t>(iy) * W + static_cast<size_t>(ix);
                            if (plane[idx] > best) {
                                best = plane[idx];
                                best_idx = (n * C + c) * H * W + idx;
                            }
                        }
                    }
                    dst[o] = best;
                    cached_argmax_[o] = best_idx;
                }
            }
        }
    }
    cached_input_shape_ = input.shape();
    has_cache_ = true;
    return out;
}

Tensor MaxPool2d::backward(const Tensor& upstream) {
    require_cache();
    if (upstream.size() != cached_argmax_.size()) {
        throw std::invalid_argument(name_ + ": upstream size mismatch");
    }
    Tensor dinput(cached_input_shape_);
    for (size_t o = 0; o < upstream.size(); ++o) dinput[cached_argmax_[o]] += upstream[o];
    return dinput;
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward(const Tensor& input, ForwardContext&) {
    cached_input_ = input;
    has_cache_ = true;
    return map_elementwise(input, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor ReLU::backward(const Tensor& upstream) {
    require_cache();
    if (!upstream.same_shape(cached_input_)) throw std::invalid_argument(name_ + ": upstream shape mismatch");
    Tensor dinput(cached_input_.shape());
    for (size_t i = 0; i < dinput.size(); ++i) {
        dinput[i] = cached_input_[i] > 0.0 ? upstream[i] : 0.0;
    }
    return dinput;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, size_t in_features, size_t units, bool relu)
    : Layer(std::move(name)), in_features_(in_features), units_(units), relu_(relu) {
    if (in_features_ == 0 || units_ == 0) throw std::invalid_argument(name_ + ": dense dims must be >= 1");
}

std::vector<size_t> Dense::output_shape(const std::vector<size_t>& in) const {
    if (in.size() != 2 || in[1] != in_features_) {
        throw std::invalid_argument(name_ + ": expected [N," + std::to_string(in_features_) + "] input");
    }
    return {in[0], units_};
}

std::vector<ParamSpec> Dense::param_specs() const {
    return {{"weight", {in_features_, units_}, true}, {"bias", {units_}, true}};
}

void Dense::init_params(Rng& rng) {
    Tensor& w = param("weight");
    const double sd = std::sqrt(2.0 / static_cast<double>(in_features_));
    for (size_t i = 0; i < w.size(); ++i) w[i] = sd * rng.normal();
    Tensor& b = param("bias");
    for (size_t i = 0; i < b.size(); ++i) b[i] = 0.0;
}

Tensor Dense::forward(const Tensor& input, ForwardContext&) {
    output_shape(input.shape());
    const size_t N = input.dim(0);
    Tensor out({N, units_});
    const Tensor& bias = param("bias");
    for (size_t n = 0; n < N; ++n) {
        for (size_t u = 0; u < units_; ++u) out.at(n, u) = bias[u];
    }
    gemm_acc(input.data(), param("weight").data(), out.data(), N, in_features_, units_);
    cached_input_ = input;
    if (relu_) {
        cached_preact_ = out;
        for (size_t i = 0; i < out.size(); ++i) {
            if (out[i] < 0.0) out[i] = 0.0;
        }
    }
    has_cache_ = true;
    return out;
}

Tensor Dense::backward(const Tensor& upstream) {
    require_cache();
    const size_t N = cached_input_.dim(0);
    if (upstream.rank() != 2 || upstream.dim(0) != N || upstream.dim(1) != units_) {
        throw std::invalid_argument(name_ + ": upstream shape mismatch");
    }
    Tensor up = upstream;
    if (relu_) {
        for (size_t i = 0; i < up.size(); ++i) {
            if (cached_preact_[i] <= 0.0) up[i] = 0.0;
        }
    }
    Tensor& dw = grad("weight");
    Tensor& db = grad("bias");
    std::fill(dw.data(), dw.data() + dw.size(), 0.0);
    std::fill(db.data(), db.data() + db.size(), 0.0);
    gemm_tn_acc(cached_input_.data(), up.data(), dw.data(), N, in_features_, units_);
    for (size_t n = 0; n < N; ++n) {
        for (size_t u = 0; u < units_; ++u) db[u] += up.at(n, u);
    }
    Tensor dinput({N, in_features_});
    gemm_nt_acc(up.data(), param("weight").data(), dinput.data(), N, units_, in_features_);
    return dinput;
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(std::string name, double rate) : Layer(std::move(name)), rate_(rate) {
    if (rate_ < 0.0 || rate_ >= 1.0) throw std::invalid_argument(name_ + ": dropout rate must be in [0,1)");
}

Tensor Dropout::forward(const Tensor& input, ForwardContext& ctx) {
    has_cache_ = true;
    if (ctx.mode == Mode::kEval || rate_ == 0.0) {
        cached_identity_ = true;
        return input;
    }
    cached_identity_ = false;
    const double scale = 1.0 / (1.0 - rate_);
    cached_mask_ = Tensor(input.shape());
    Tensor out(input.shape());
    for (size_t i = 0; i < input.size(); ++i) {
        const double keep = ctx.rng.uniform() >= rate_ ? scale : 0.0;
        cached_mask_[i] = keep;
        out[i] = input[i] * keep;
    }
    return out;
}

Tensor Dropout::backward(const Tensor& upstream) {
    require_cache();
    if (cached_identity_) return upstream;
    if (!upstream.same_shape(cached_mask_)) throw std::invalid_argument(name_ + ": upstream shape mismatch");
    Tensor dinput(upstream.shape());
    for (size_t i = 0; i < dinput.size(); ++i) dinput[i] = upstream[i] * cached_mask_[i];
    return dinput;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, size_t channels, double eps, double momentum)
    : Layer(std::move(name)), channels_(channels), eps_(eps), momentum_(momentum) {
    if (channels_ == 0) throw std::invalid_argument(name_ + ": channels must be >= 1");
}

std::vector<ParamSpec> BatchNorm2d::param_specs() const {
    return {{"gamma", {channels_}, true},
            {"beta", {channels_}, true},
            {"moving_mean", {channels_}, false},
            {"moving_var", {channels_}, false}};
}

void BatchNorm2d::init_params(Rng&) {
    Tensor& g = param("gamma");
    for (size_t i = 0; i < g.size(); ++i) g[i] = 1.0;
    Tensor& mv = param("moving_var");
    for (size_t i = 0; i < mv.size(); ++i) mv[i] = 1.0;
    // beta and moving_mean stay 0
}

Tensor BatchNorm2d::forward(const Tensor& input, ForwardContext& ctx) {
    require_rank4(input, name_);
    if (input.dim(1) != channels_) throw std::invalid_argument(name_ + ": channel mismatch");
    const size_t N = input.dim(0), H = input.dim(2), W = input.dim(3);
    const size_t plane = H * W;
    const size_t m = N * plane;
    const bool train = ctx.mode == Mode::kTrain;
    if (train && N < 2) throw std::invalid_argument(name_ + ": train mode needs batch size >= 2");

    const Tensor& gamma = param("gamma");
    const Tensor& beta = param("beta");
    Tensor out(input.shape());
    cached_xhat_ = Tensor(input.shape());
    cached_inv_std_.assign(channels_, 0.0);
    cached_train_ = train;

    for (size_t c = 0; c < channels_; ++c) {
        double mean, var;
        if (train) {
            double sum = 0.0;
            for (size_t n = 0; n < N; ++n) {
                const double* p = input.data() + (n * channels_ + c) * plane;
                for (size_t i = 0; i < plane; ++i) sum += p[i];
            }
            mean = sum / static_cast<double>(m);
            double sq = 0.0;
            for (size_t n = 0; n < N; ++n) {
                const double* p = input.data() + (n * channels_ + c) * plane;
                for (size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mean;
                    sq += d * d;
                }
            }
            var = sq / static_cast<double>(m);
            Tensor& mm = param("moving_mean");
            Tensor& mv = param("moving_var");
            mm[c] = momentum_ * mm[c] + (1.0 - momentum_) * mean;
            mv[c] = momentum_ * mv[c] + (1.0 - momentum_) * var;
        } else {
            mean = param("moving_mean")[c];
            var = param("moving_var")[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        cached_inv_std_[c] = inv;
        for (size_t n = 0; n < N; ++n) {
            const double* p = input.data() + (n * channels_ + c) * plane;
            double* xh = cached_xhat_.data() + (n * channels_ + c) * plane;
            double* po = out.data() + (n * channels_ + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                xh[i] = (p[i] - mean) * inv;
                po[i] = gamma[c] * xh[i] + beta[c];
            }
        }
    }
    has_cache_ = true;
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& upstream) {
    require_cache();
    if (!upstream.same_shape(cached_xhat_)) throw std::invalid_argument(name_ + ": upstream shape mismatch");
    const size_t N = upstream.dim(0), H = upstream.dim(2), W = upstream.dim(3);
    const size_t plane = H * W;
    const double m = static_cast<double>(N * plane);

    const Tensor& gamma = param("gamma");
    Tensor& dgamma = grad("gamma");
    Tensor& dbeta = grad("beta");
    Tensor& dmm = grad("moving_mean");
    Tensor& dmv = grad("moving_var");
    std::fill(dmm.data(), dmm.data() + dmm.size(), 0.0);
    std::fill(dmv.data(), dmv.data() + dmv.size(), 0.0);

    Tensor dinput(upstream.shape());
    for (size_t c = 0; c < channels_; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (size_t n = 0; n < N; ++n) {
            const double* dy = upstream.data() + (n * channels_ + c) * plane;
            const double* xh = cached_xhat_.data() + (n * channels_ + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xh[i];
            }
        }
        dgamma[c] = sum_dy_xhat;
        dbeta[c] = sum_dy;
        const double inv = cached_inv_std_[c];
        for (size_t n = 0; n < N; ++n) {
            const double* dy = upstream.data() + (n * channels_ + c) * plane;
            const double* xh = cached_xhat_.data() + (n * channels_ + c) * plane;
            double* dx = dinput.data() + (n * channels_ + c) * plane;
            if (cached_train_) {
                // normalization couples every element through the batch stats
                for (size_t i = 0; i < plane; ++i) {
                    dx[i] = gamma[c] * inv / m * (m * dy[i] - sum_dy - xh[i] * sum_dy_xhat);
                }
            } else {
                for (size_t i = 0; i < plane; ++i) dx[i] = gamma[c] * inv * dy[i];
            }
        }
    }
    return dinput;
}

// ---------------------------------------------------------------------------
// ResidualBlock

ResidualBlock::ResidualBlock(std::string name, size_t in_channels, size_t mid_channels,
                             size_t out_channels, size_t stride, bool project)
    : Layer(std::move(name)), in_c_(in_channels), out_c_(out_channels), stride_(stride),
      project_(project) {
    if (!project_ && (in_c_ != out_c_ || stride_ != 1)) {
        throw std::invalid_argument(name_ + ": identity shortcut requires matching shape (add a projection)");
    }
    children_.emplace_back("conv1", std::make_unique<Conv2d>(name_ + "/conv1", in_c_, mid_channels, 1, stride_, Padding::kValid));
    children_.emplace_back("bn1", std::make_unique<BatchNorm2d>(name_ + "/bn1", mid_channels));
    children_.emplace_back("relu1", std::make_unique<ReLU>(name_ + "/relu1"));
    children_.emplace_back("conv2", std::make_unique<Conv2d>(name_ + "/conv2", mid_channels, mid_channels, 3, 1, Padding::kSame));
    children_.emplace_back("bn2", std::make_unique<BatchNorm2d>(name_ + "/bn2", mid_channels));
    children_.emplace_back("relu2", std::make_unique<ReLU>(name_ + "/relu2"));
    children_.emplace_back("conv3", std::make_unique<Conv2d>(name_ + "/conv3", mid_channels, out_c_, 1, 1, Padding::kValid));
    children_.emplace_back("bn3", std::make_unique<BatchNorm2d>(name_ + "/bn3", out_c_));
    if (project_) {
        children_.emplace_back("proj", std::make_unique<Conv2d>(name_ + "/proj", in_c_, out_c_, 1, stride_, Padding::kValid));
        children_.emplace_back("proj_bn", std::make_unique<BatchNorm2d>(name_ + "/proj_bn", out_c_));
    }
    children_.emplace_back("relu_out", std::make_unique<ReLU>(name_ + "/relu_out"));
}

Layer* ResidualBlock::child(const std::string& prefix) const {
    for (const auto& [key, layer] : children_) {
        if (key == prefix) return layer.get();
    }
    return nullptr;
}

std::vector<size_t> ResidualBlock::output_shape(const std::vector<size_t>& in) const {
    if (in.size() != 4 || in[1] != in_c_) throw std::invalid_argument(name_ + ": input shape mismatch");
    std::vector<size_t> shape = child("conv1")->output_shape(in);
    shape[1] = out_c_;
    return shape;
}

std::vector<ParamSpec> ResidualBlock::param_specs() const {
    std::vector<ParamSpec> specs;
    for (const auto& [key, layer] : children_) {
        for (ParamSpec spec : layer->param_specs()) {
            spec.name = key + "." + spec.name;
            specs.push_back(std::move(spec));
        }
    }
    return specs;
}

void ResidualBlock::materialize() {
    for (auto& [key, layer] : children_) layer->materialize();
}

void ResidualBlock::init_params(Rng& rng) {
    for (auto& [key, layer] : children_) layer->init_params(rng);
}

Tensor* ResidualBlock::find_param(const std::string& name) {
    const size_t dot = name.find('.');
    if (dot == std::string::npos) return nullptr;
    Layer* c = child(name.substr(0, dot));
    return c ? c->find_param(name.substr(dot + 1)) : nullptr;
}

Tensor* ResidualBlock::find_grad(const std::string& name) {
    const size_t dot = name.find('.');
    if (dot == std::string::npos) return nullptr;
    Layer* c = child(name.substr(0, dot));
    return c ? c->find_grad(name.substr(dot + 1)) : nullptr;
}

Tensor ResidualBlock::forward(const Tensor& input, ForwardContext& ctx) {
    Tensor branch = child("conv1")->forward(input, ctx);
    branch = child("bn1")->forward(branch, ctx);
    branch = child("relu1")->forward(branch, ctx);
    branch = child("conv2")->forward(branch, ctx);
    branch = child("bn2")->forward(branch, ctx);
    branch = child("relu2")->forward(branch, ctx);
    branch = child("conv3")->forward(branch, ctx);
    branch = child("bn3")->forward(branch, ctx);

    Tensor shortcut = input;
    if (project_) {
        shortcut = child("proj")->forward(input, ctx);
        shortcut = child("proj_bn")->forward(shortcut, ctx);
    }
    if (!branch.same_shape(shortcut)) {
        throw std::invalid_argument(name_ + ": branch/shortcut shape mismatch without projection");
    }
    Tensor sum(branch.shape());
    for (size_t i = 0; i < sum.size(); ++i) sum[i] = branch[i] + shortcut[i];
    has_cache_ = true;
    return child("relu_out")->forward(sum, ctx);
}

Tensor ResidualBlock::backward(const Tensor& upstream) {
    require_cache();
    Tensor dsum = child("relu_out")->backward(upstream);

    Tensor dbranch = child("bn3")->backward(dsum);
    dbranch = child("conv3")->backward(dbranch);
    dbranch = child("relu2")->backward(dbranch);
    dbranch = child("bn2")->backward(dbranch);
    dbranch = child("conv2")->backward(dbranch);
    dbranch = child("relu1")->backward(dbranch);
    dbranch = child("bn1")->backward(dbranch);
    Tensor dinput = child("conv1")->backward(dbranch);

    if (project_) {
        Tensor dshort = child("proj_bn")->backward(dsum);
        dshort = child("proj")->backward(dshort);
        for (size_t i = 0; i < dinput.size(); ++i) dinput[i] += dshort[i];
    } else {
        for (size_t i = 0; i < dinput.size(); ++i) dinput[i] += dsum[i];
    }
    return dinput;
}

// ---------------------------------------------------------------------------
// Flatten / GlobalAvgPool

std::vector<size_t> Flatten::output_shape(const std::vector<size_t>& in) const {
    if (in.size() < 2) throw std::invalid_argument(name_ + ": expected rank >= 2");
    size_t rest = 1;
    for (size_t i = 1; i < in.size(); ++i) rest *= in[i];
    return {in[0], rest};
}

Tensor Flatten::forward(const Tensor& input, ForwardContext&) {
    cached_input_shape_ = input.shape();
    has_cache_ = true;
    return input.reshape(output_shape(input.shape()));
}

Tensor Flatten::backward(const Tensor& upstream) {
    require_cache();
    return upstream.reshape(cached_input_shape_);
}

std::vector<size_t> GlobalAvgPool::output_shape(const std::vector<size_t>& in) const {
    if (in.size() != 4) throw std::invalid_argument(name_ + ": expected rank-4 input shape");
    return {in[0], in[1]};
}

Tensor GlobalAvgPool::forward(const Tensor& input, ForwardContext&) {
    require_rank4(input, name_);
    const size_t N = input.dim(0), C = input.dim(1), plane = input.dim(2) * input.dim(3);
    Tensor out({N, C});
    for (size_t n = 0; n < N; ++n) {
        for (size_t c = 0; c < C; ++c) {
            const double* p = input.data() + (n * C + c) * plane;
            double sum = 0.0;
            for (size_t i = 0; i < plane; ++i) sum += p[i];
            out.at(n, c) = sum / static_cast<double>(plane);
        }
    }
    cached_input_shape_ = input.shape();
    has_cache_ = true;
    return out;
}

Tensor GlobalAvgPool::backward(const Tensor& upstream) {
    require_cache();
    const size_t N = cached_input_shape_[0], C = cached_input_shape_[1];
    const size_t plane = cached_input_shape_[2] * cached_input_shape_[3];
    Tensor dinput(cached_input_shape_);
    for (size_t n = 0; n < N; ++n) {
        for (size_t c = 0; c < C; ++c) {
            const double g = upstream.at(n, c) / static_cast<double>(plane);
            double* p = dinput.data() + (n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) p[i] = g;
        }
    }
    return dinput;
}

// ---------------------------------------------------------------------------
// Losses

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw std::invalid_argument("softmax_cross_entropy: expected [N,K] logits");
    const size_t N = logits.dim(0), K = logits.dim(1);
    if (K < 2) throw std::invalid_argument("softmax_cross_entropy: needs K >= 2 classes");
    if (labels.size() != N) throw std::invalid_argument("softmax_cross_entropy: label count mismatch");

    LossResult result;
    result.grad = Tensor({N, K});
    double total = 0.0;
    for (size_t n = 0; n < N; ++n) {
        const int label = labels[n];
        if (label < 0 || static_cast<size_t>(label) >= K) {
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        }
        const double* row = logits.data() + n * K;
        double mx = row[0];
        for (size_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double denom = 0.0;
        for (size_t k = 0; k < K; ++k) denom += std::exp(row[k] - mx);
        const double log_denom = std::log(denom);
        total += log_denom - (row[label] - mx);
        for (size_t k = 0; k < K; ++k) {
            const double p = std::exp(row[k] - mx) / denom;
            result.grad.at(n, k) = (p - (static_cast<size_t>(label) == k ? 1.0 : 0.0)) / static_cast<double>(N);
        }
    }
    result.loss = total / static_cast<double>(N);
    return result;
}

LossResult sigmoid_bce(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2 || logits.dim(1) != 1) throw std::invalid_argument("sigmoid_bce: expected [N,1] logits");
    const size_t N = logits.dim(0);
    if (labels.size() != N) throw std::invalid_argument("sigmoid_bce: label count mismatch");

    LossResult result;
    result.grad = Tensor({N, 1});
    double total = 0.0;
    for (size_t n = 0; n < N; ++n) {
        if (labels[n] != 0 && labels[n] != 1) throw std::invalid_argument("sigmoid_bce: labels must be 0 or 1");
        const double z = logits[n];
        const double y = static_cast<double>(labels[n]);
        // max(z,0) - z*y + log(1 + exp(-|z|)) is exact and never overflows
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
        const double sig = 1.0 / (1.0 + std::exp(-z));
        result.grad[n] = (sig - y) / static_cast<double>(N);
    }
    result.loss = total / static_cast<double>(N);
    return result;
}

} // namespace thermalnet
