#include "thermalnet/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace thermalnet {

size_t shape_product(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

static void validate_shape(const std::vector<size_t>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
    for (size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be >= 1");
    }
}

Tensor::Tensor(std::vector<size_t> shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape(shape_);
    if (data_.size() != shape_product(shape_)) {
        throw std::invalid_argument("tensor value count " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str());
    }
}

Tensor Tensor::reshape(const std::vector<size_t>& new_shape) const {
    validate_shape(new_shape);
    if (shape_product(new_shape) != data_.size()) {
        throw std::invalid_argument("reshape element count mismatch: " + shape_str());
    }
    return Tensor(new_shape, data_);
}

std::string Tensor::shape_str() const {
    std::ostringstream out;
    out << "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
        if (i) out << ",";
        out << shape_[i];
    }
    out << "]";
    return out.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw std::invalid_argument("matmul requires rank-2 tensors");
    if (a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul inner dimension mismatch: " + a.shape_str() + " x " + b.shape_str());
    }
    const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n}, 0.0);
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (size_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        double* crow = pc + i * n;
        for (size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = pb + kk * n;
            for (size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Tensor map_elementwise(const Tensor& t, const std::function<double(double)>& f) {
    Tensor out(t.shape());
    const double* src = t.data();
    double* dst = out.data();
    for (size_t i = 0; i < t.size(); ++i) dst[i] = f(src[i]);
    return out;
}

} // namespace thermalnet
