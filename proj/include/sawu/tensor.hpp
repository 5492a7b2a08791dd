#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "sawu/errors.hpp"

namespace sawu {

// Dense row-major tensor of doubles. The model only ever needs matrices,
// vectors and scalars, so shapes are kept to rank <= 2 (a scalar is 1x1,
// a vector is 1xN or Nx1).
class Tensor {
public:
    Tensor() = default;

    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : shape_{rows, cols}, data_(rows * cols, fill) {}

    Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
        : shape_{rows, cols}, data_(std::move(values)) {
        if (data_.size() != rows * cols)
            throw DimensionError("tensor init: " + std::to_string(rows) + "x" + std::to_string(cols) +
                                 " needs " + std::to_string(rows * cols) + " values, got " +
                                 std::to_string(data_.size()));
    }

    static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

    static Tensor row(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor(1, n, std::move(values));
    }

    static Tensor column(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor(n, 1, std::move(values));
    }

    std::size_t rows() const { return shape_[0]; }
    std::size_t cols() const { return shape_[1]; }
    std::size_t size() const { return data_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double item() const {
        if (size() != 1) throw UsageError("item(): tensor is not scalar");
        return data_[0];
    }

    bool all_finite() const;

    std::string shape_str() const {
        return std::to_string(shape_[0]) + "x" + std::to_string(shape_[1]);
    }

private:
    std::vector<std::size_t> shape_{0, 0};
    std::vector<double> data_;
};

// Raw dense kernels shared by the autodiff graph and the direct inference
// path. All accumulate in ascending index order, so results are
// reproducible bit-for-bit run to run.
namespace kernels {

// C = A * B
Tensor matmul_nn(const Tensor& a, const Tensor& b);
// C = A * B^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// C = A^T * B
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

// Row-wise softmax with max-shift.
Tensor softmax_rows(const Tensor& a);

// Per-block square matmul: a is (nblocks*block) x block row-stacked square
// matrices, b is (nblocks*block) x cols; each block of a multiplies the
// matching block of b.
Tensor block_matmul(const Tensor& a, const Tensor& b, std::size_t block);

// Sums groups of `block` consecutive rows.
Tensor block_row_sum(const Tensor& a, std::size_t block);

// Sums each row into an Nx1 column.
Tensor row_sum(const Tensor& a);

// s[r] = a[r] / (sum|a[r]| + eps)
Tensor l1_normalize_rows(const Tensor& a, double eps);

// Spectral angle per row pair, Nx1 column of radians. Throws DomainError
// on a zero row.
Tensor sad_rows(const Tensor& a, const Tensor& b);

// Row sums of elementwise sqrt; input must be nonnegative.
Tensor l_half_rows(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

}  // namespace kernels

}  // namespace sawu
