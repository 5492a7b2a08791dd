#pragma once

// Independent brute-force oracles for test expectations. These deliberately
// avoid the library's kernel implementations.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracles {

// Plain triple-loop matmul over flat row-major buffers.
inline std::vector<double> matmul(const std::vector<double>& a, std::size_t m, std::size_t k,
                                  const std::vector<double>& b, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t t = 0; t < k; ++t) c[i * n + j] += a[i * k + t] * b[t * n + j];
    return c;
}

// Mirror-without-edge-repeat index fold.
inline std::size_t reflect(long idx, std::size_t n) {
    if (n == 1) return 0;
    while (idx < 0 || idx >= static_cast<long>(n)) {
        if (idx < 0) idx = -idx;
        if (idx >= static_cast<long>(n)) idx = 2 * static_cast<long>(n) - 2 - idx;
    }
    return static_cast<std::size_t>(idx);
}

// Scalar Adam recurrence, stepped by hand.
struct ScalarAdam {
    double m = 0.0, v = 0.0;
    unsigned long t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    double step(double param, double grad, double lr) {
        ++t;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad * grad;
        const double mhat = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
        const double vhat = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
        return param - lr * mhat / (std::sqrt(vhat) + eps);
    }
};

// Spectral angle by direct evaluation.
inline double sad(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    double u = dot / std::sqrt(na * nb);
    if (u > 1.0) u = 1.0;
    if (u < -1.0) u = -1.0;
    return std::acos(u);
}

}  // namespace oracles
