#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace thermalnet {

/// Dense N-dimensional array of doubles, row-major, value semantics.
/// The shape is fixed at construction; reshape returns a new tensor.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<size_t> shape, double fill = 0.0);
    Tensor(std::vector<size_t> shape, std::vector<double> values);

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    size_t dim(size_t axis) const { return shape_[axis]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& at(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    double at(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

    double& at(size_t n, size_t c, size_t h, size_t w) {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double at(size_t n, size_t c, size_t h, size_t w) const {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    Tensor reshape(const std::vector<size_t>& new_shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const;

private:
    std::vector<size_t> shape_;
    std::vector<double> data_;
};

size_t shape_product(const std::vector<size_t>& shape);

/// Matrix product of rank-2 tensors [m,k] x [k,n]. Accumulation over k is in
/// ascending index order for every output element, so results are bit-stable.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Applies f to every element; shape is preserved.
Tensor map_elementwise(const Tensor& t, const std::function<double(double)>& f);

} // namespace thermalnet
