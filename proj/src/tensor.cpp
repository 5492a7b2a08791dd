#include "sawu/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace sawu {

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace kernels {

namespace {

// Column-tile width: keeps the active B/C panels inside L2 so wide
// operands are streamed once instead of once per output row. Every
// element still accumulates in ascending reduction order, so tiled and
// untiled kernels agree bit for bit.
constexpr std::size_t kTile = 512;

}  // namespace

Tensor matmul_nn(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: " + a.shape_str() + " * " + b.shape_str());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c(m, n, 0.0);
    double* cd = c.data();
    const double* ad = a.data();
    const double* bd = b.data();
    const bool par = m * n * k > 65536;
#pragma omp parallel if (par)
    for (std::size_t j0 = 0; j0 < n; j0 += kTile) {
        const std::size_t j1 = std::min(j0 + kTile, n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
            double* crow = cd + i * n;
            for (std::size_t t = 0; t < k; ++t) {
                const double av = ad[i * k + t];
                const double* brow = bd + t * n;
                for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
            }
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt: " + a.shape_str() + " * " + b.shape_str() + "^T");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor c(m, n, 0.0);
    const double* ad = a.data();
    const double* bd = b.data();
    double* cd = c.data();
    const bool par = m * n * k > 65536;
#pragma omp parallel if (par)
    for (std::size_t t0 = 0; t0 < k; t0 += kTile) {
        const std::size_t t1 = std::min(t0 + kTile, k);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
            const double* arow = ad + i * k;
            double* crow = cd + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = bd + j * k;
                // four independent lanes, fixed combine tree
                double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                std::size_t t = t0;
                for (; t + 4 <= t1; t += 4) {
                    a0 += arow[t] * brow[t];
                    a1 += arow[t + 1] * brow[t + 1];
                    a2 += arow[t + 2] * brow[t + 2];
                    a3 += arow[t + 3] * brow[t + 3];
                }
                for (; t < t1; ++t) a0 += arow[t] * brow[t];
                crow[j] += (a0 + a1) + (a2 + a3);
            }
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn: " + a.shape_str() + "^T * " + b.shape_str());
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    Tensor c(m, n, 0.0);
    const double* ad = a.data();
    const double* bd = b.data();
    double* cd = c.data();
    const bool par = m * n * k > 65536;
#pragma omp parallel if (par)
    for (std::size_t j0 = 0; j0 < n; j0 += kTile) {
        const std::size_t j1 = std::min(j0 + kTile, n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
            double* crow = cd + i * n;
            for (std::size_t t = 0; t < k; ++t) {
                const double av = ad[t * m + i];
                if (av == 0.0) continue;
                const double* brow = bd + t * n;
                for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
            }
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    Tensor t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Tensor softmax_rows(const Tensor& a) {
    Tensor out(a.rows(), a.cols());
#pragma omp parallel for schedule(static) if (a.rows() * a.cols() > 16384)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(a.rows()); ++r) {
        double mx = a.at(r, 0);
        for (std::size_t c = 1; c < a.cols(); ++c) mx = std::max(mx, a.at(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) {
            const double e = std::exp(a.at(r, c) - mx);
            out.at(r, c) = e;
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (std::size_t c = 0; c < a.cols(); ++c) out.at(r, c) *= inv;
    }
    return out;
}

Tensor block_matmul(const Tensor& a, const Tensor& b, std::size_t block) {
    if (block == 0 || a.rows() % block != 0 || a.cols() != block || a.rows() != b.rows())
        throw DimensionError("block_matmul: blocks of " + std::to_string(block) + " from " +
                             a.shape_str() + " and " + b.shape_str());
    const std::size_t nblocks = a.rows() / block;
    const std::size_t n = b.cols();
    Tensor c(b.rows(), n, 0.0);
    const double* bd = b.data();
#pragma omp parallel for schedule(static) if (a.rows() * block * n > 65536)
    for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(nblocks); ++blk) {
        const std::size_t r0 = blk * block;
        for (std::size_t i = 0; i < block; ++i) {
            double* crow = c.data() + (r0 + i) * n;
            for (std::size_t t = 0; t < block; ++t) {
                const double av = a.at(r0 + i, t);
                const double* brow = bd + (r0 + t) * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
    return c;
}

Tensor block_row_sum(const Tensor& a, std::size_t block) {
    if (block == 0 || a.rows() % block != 0)
        throw DimensionError("block_row_sum: " + std::to_string(a.rows()) + " rows, block " +
                             std::to_string(block));
    const std::size_t nblocks = a.rows() / block;
    Tensor c(nblocks, a.cols(), 0.0);
    for (std::size_t blk = 0; blk < nblocks; ++blk)
        for (std::size_t i = 0; i < block; ++i)
            for (std::size_t j = 0; j < a.cols(); ++j) c.at(blk, j) += a.at(blk * block + i, j);
    return c;
}

Tensor row_sum(const Tensor& a) {
    Tensor c(a.rows(), 1, 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a.at(i, j);
        c.at(i, 0) = acc;
    }
    return c;
}

Tensor l1_normalize_rows(const Tensor& a, double eps) {
    Tensor c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(a.at(i, j));
        const double inv = 1.0 / (s + eps);
        for (std::size_t j = 0; j < a.cols(); ++j) c.at(i, j) = a.at(i, j) * inv;
    }
    return c;
}

Tensor sad_rows(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("sad_rows: " + a.shape_str() + " vs " + b.shape_str());
    Tensor c(a.rows(), 1);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            dot += a.at(i, j) * b.at(i, j);
            na += a.at(i, j) * a.at(i, j);
            nb += b.at(i, j) * b.at(i, j);
        }
        if (na == 0.0 || nb == 0.0)
            throw DomainError("sad: zero vector at row " + std::to_string(i));
        const double u = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
        c.at(i, 0) = std::acos(u);
    }
    return c;
}

Tensor l_half_rows(const Tensor& a) {
    Tensor c(a.rows(), 1, 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double v = a.at(i, j);
            if (v < 0.0)
                throw DomainError("l_half: negative entry " + std::to_string(v) + " at row " +
                                  std::to_string(i));
            acc += std::sqrt(v);
        }
        c.at(i, 0) = acc;
    }
    return c;
}

Tensor sigmoid(const Tensor& a) {
    Tensor c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        c[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    return c;
}

Tensor relu(const Tensor& a) {
    Tensor c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] > 0.0 ? a[i] : 0.0;
    return c;
}

}  // namespace kernels
}  // namespace sawu
