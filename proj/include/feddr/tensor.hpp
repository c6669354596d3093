#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "feddr/common.hpp"

namespace feddr {

// ---------------------------------------------------------------------------
// Dense n-d tensor over a scalar type, row-major, backed by Eigen storage.
// float is the training precision; double is the verification mode used by
// the finite-difference and aggregation oracles.
// ---------------------------------------------------------------------------

template <class Scalar>
class Tensor {
public:
    using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using MatrixMap = Eigen::Map<
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstMatrixMap = Eigen::Map<
        const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ArrayMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
    using ConstArrayMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;

    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
        for (auto d : shape_) {
            if (d <= 0) throw ShapeError("tensor dimensions must be positive");
        }
        data_.setZero(element_count(shape_));
    }

    Tensor(std::vector<std::int64_t> shape, std::vector<Scalar> values)
        : shape_(std::move(shape)) {
        if (static_cast<std::int64_t>(values.size()) != element_count(shape_))
            throw ShapeError("tensor value count does not match shape");
        data_ = Eigen::Map<const VectorType>(values.data(), values.size());
    }

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor constant(std::vector<std::int64_t> shape, Scalar value) {
        Tensor t(std::move(shape));
        t.data_.setConstant(t.size(), value);
        return t;
    }

    static Tensor ones(std::vector<std::int64_t> shape) {
        return constant(std::move(shape), Scalar(1));
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::int64_t size() const { return data_.size(); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    Scalar& operator[](std::int64_t i) { return data_[i]; }
    Scalar operator[](std::int64_t i) const { return data_[i]; }

    VectorType& vec() { return data_; }
    const VectorType& vec() const { return data_; }

    ArrayMap array() { return ArrayMap(data_.data(), data_.size()); }
    ConstArrayMap array() const { return ConstArrayMap(data_.data(), data_.size()); }

    // 2-d view with explicit dimensions; the product must equal size().
    MatrixMap matrix(std::int64_t rows, std::int64_t cols) {
        if (rows * cols != size()) throw ShapeError("matrix view does not cover tensor");
        return MatrixMap(data_.data(), rows, cols);
    }
    ConstMatrixMap matrix(std::int64_t rows, std::int64_t cols) const {
        if (rows * cols != size()) throw ShapeError("matrix view does not cover tensor");
        return ConstMatrixMap(data_.data(), rows, cols);
    }

    // Row-major [rows, cols...] view for 2-d tensors.
    MatrixMap matrix() { return matrix(leading_dim(), size() / leading_dim()); }
    ConstMatrixMap matrix() const { return matrix(leading_dim(), size() / leading_dim()); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (std::int64_t i = 0; i < size(); ++i) {
            if (!std::isfinite(static_cast<double>(data_[i]))) return false;
        }
        return true;
    }

    template <class Other>
    Tensor<Other> cast() const {
        Tensor<Other> out(shape_);
        for (std::int64_t i = 0; i < size(); ++i)
            out[i] = static_cast<Other>(data_[i]);
        return out;
    }

    Tensor reshaped(std::vector<std::int64_t> new_shape) const {
        if (element_count(new_shape) != size())
            throw ShapeError("reshape changes element count");
        Tensor out = *this;
        out.shape_ = std::move(new_shape);
        return out;
    }

    static std::int64_t element_count(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape_.size(); ++i)
            os << (i ? "," : "") << shape_[i];
        os << "]";
        return os.str();
    }

private:
    std::int64_t leading_dim() const {
        if (shape_.empty()) throw ShapeError("matrix view of rank-0 tensor");
        return shape_[0];
    }

    std::vector<std::int64_t> shape_;
    VectorType data_;
};

template <class Scalar>
bool bitwise_equal(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), sizeof(Scalar) * a.size()) == 0;
}

// ---------------------------------------------------------------------------
// ParameterSet: ordered, named collection of tensors. The unit exchanged
// between institutions and the server, and the payload of checkpoints.
// ---------------------------------------------------------------------------

template <class Scalar>
struct NamedTensor {
    std::string name;
    Tensor<Scalar> tensor;
};

template <class Scalar>
class ParameterSet {
public:
    ParameterSet() = default;

    void add(std::string name, Tensor<Scalar> tensor) {
        if (find(name) >= 0) throw ConfigError("duplicate parameter name: " + name);
        items_.push_back({std::move(name), std::move(tensor)});
    }

    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

    NamedTensor<Scalar>& operator[](std::size_t i) { return items_[i]; }
    const NamedTensor<Scalar>& operator[](std::size_t i) const { return items_[i]; }

    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    // index of a name, -1 when absent
    int find(std::string_view name) const {
        for (std::size_t i = 0; i < items_.size(); ++i)
            if (items_[i].name == name) return static_cast<int>(i);
        return -1;
    }

    Tensor<Scalar>& at(std::string_view name) {
        int i = find(name);
        if (i < 0) throw ConfigError("no parameter named " + std::string(name));
        return items_[static_cast<std::size_t>(i)].tensor;
    }
    const Tensor<Scalar>& at(std::string_view name) const {
        int i = find(name);
        if (i < 0) throw ConfigError("no parameter named " + std::string(name));
        return items_[static_cast<std::size_t>(i)].tensor;
    }

    // same names, same order, same shapes
    bool aligned_with(const ParameterSet& other) const {
        if (items_.size() != other.items_.size()) return false;
        for (std::size_t i = 0; i < items_.size(); ++i) {
            if (items_[i].name != other.items_[i].name) return false;
            if (!items_[i].tensor.same_shape(other.items_[i].tensor)) return false;
        }
        return true;
    }

    std::int64_t scalar_count() const {
        std::int64_t n = 0;
        for (const auto& it : items_) n += it.tensor.size();
        return n;
    }

    template <class Other>
    ParameterSet<Other> cast() const {
        ParameterSet<Other> out;
        for (const auto& it : items_)
            out.add(it.name, it.tensor.template cast<Other>());
        return out;
    }

private:
    std::vector<NamedTensor<Scalar>> items_;
};

template <class Scalar>
bool bitwise_equal(const ParameterSet<Scalar>& a, const ParameterSet<Scalar>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name) return false;
        if (!bitwise_equal(a[i].tensor, b[i].tensor)) return false;
    }
    return true;
}

// out[i] = params[i] - lr * grads[i]
template <class Scalar>
ParameterSet<Scalar> sgd_step(const ParameterSet<Scalar>& params,
                              const ParameterSet<Scalar>& grads, double lr) {
    if (lr <= 0) throw UsageError("sgd_step: learning rate must be positive");
    if (!params.aligned_with(grads))
        throw ShapeError("sgd_step: parameter and gradient sets are not aligned");
    ParameterSet<Scalar> out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<Scalar> t = params[i].tensor;
        t.vec() -= static_cast<Scalar>(lr) * grads[i].tensor.vec();
        out.add(params[i].name, std::move(t));
    }
    return out;
}

// in-place variant used by the training loop
template <class Scalar>
void sgd_step_inplace(ParameterSet<Scalar>& params, const ParameterSet<Scalar>& grads,
                      double lr) {
    if (lr <= 0) throw UsageError("sgd_step: learning rate must be positive");
    if (!params.aligned_with(grads))
        throw ShapeError("sgd_step: parameter and gradient sets are not aligned");
    for (std::size_t i = 0; i < params.size(); ++i)
        params[i].tensor.vec() -= static_cast<Scalar>(lr) * grads[i].tensor.vec();
}

}  // namespace feddr
