#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bdd/errors.hpp"

namespace bdd::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

/// Dense n-dimensional array: a shape plus flat row-major doubles. The
/// flat storage is Eigen-backed so matrix views over it are free.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        for (int extent : shape_) {
            if (extent <= 0) {
                throw ShapeError("tensor extents must be positive");
            }
        }
        data_.setZero(flat_size(shape_));
    }

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<int>& shape() const noexcept { return shape_; }
    int rank() const noexcept { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::int64_t size() const noexcept { return data_.size(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::int64_t i) { return data_[i]; }
    double operator[](std::int64_t i) const { return data_[i]; }

    Eigen::VectorXd& flat() noexcept { return data_; }
    const Eigen::VectorXd& flat() const noexcept { return data_; }

    /// Matrix view of the flat data; rows*cols must equal size().
    MatMap as_matrix(int rows, int cols) {
        check_view(rows, cols);
        return MatMap(data_.data(), rows, cols);
    }
    ConstMatMap as_matrix(int rows, int cols) const {
        check_view(rows, cols);
        return ConstMatMap(data_.data(), rows, cols);
    }

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    static std::int64_t flat_size(const std::vector<int>& shape) noexcept {
        std::int64_t n = 1;
        for (int extent : shape) {
            n *= extent;
        }
        return n;
    }

    static std::string shape_string(const std::vector<int>& shape) {
        std::string out = "(";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i > 0) {
                out += ",";
            }
            out += std::to_string(shape[i]);
        }
        return out + ")";
    }

private:
    void check_view(int rows, int cols) const {
        if (static_cast<std::int64_t>(rows) * cols != data_.size()) {
            throw ShapeError("matrix view " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " does not cover tensor of size " +
                             std::to_string(data_.size()));
        }
    }

    std::vector<int> shape_;
    Eigen::VectorXd data_;
};

} // namespace bdd::nn
