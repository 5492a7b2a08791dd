#include "sawu/vca.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "sawu/errors.hpp"
#include "sawu/rng.hpp"

namespace sawu {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// eigenpairs sorted by descending eigenvalue; eigenvectors are columns.
void jacobi_eigen(Tensor a, std::vector<double>& eigvals, Tensor& eigvecs) {
    const std::size_t n = a.rows();
    eigvecs = Tensor(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eigvecs.at(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = eigvecs.at(k, p), vkq = eigvecs.at(k, q);
                    eigvecs.at(k, p) = c * vkp - s * vkq;
                    eigvecs.at(k, q) = s * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a.at(x, x) > a.at(y, y); });
    eigvals.resize(n);
    Tensor sorted(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        eigvals[c] = a.at(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) sorted.at(r, c) = eigvecs.at(r, order[c]);
    }
    eigvecs = std::move(sorted);
}

// Top-d eigenvectors (L x d) of cov = data^T data / N.
Tensor principal_directions(const Tensor& data, std::size_t d) {
    Tensor cov = kernels::matmul_tn(data, data);
    const double invn = 1.0 / static_cast<double>(data.rows());
    for (std::size_t i = 0; i < cov.size(); ++i) cov[i] *= invn;
    std::vector<double> eigvals;
    Tensor eigvecs;
    jacobi_eigen(std::move(cov), eigvals, eigvecs);
    Tensor ud(eigvecs.rows(), d);
    for (std::size_t r = 0; r < eigvecs.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) ud.at(r, c) = eigvecs.at(r, c);
    return ud;
}

}  // namespace

VcaResult vca(const HsiCube& cube, std::size_t p, std::uint64_t seed) {
    const std::size_t n = cube.pixels();
    const std::size_t l = cube.bands;
    if (p == 0) throw UsageError("vca: P must be positive");
    if (p >= l) throw UsageError("vca: need P < L");
    if (n < p) throw UsageError("vca: fewer pixels than endmembers");

    // pixels as rows
    Tensor y(n, l, std::vector<double>(cube.data.begin(), cube.data.end()));

    Tensor mean_row(1, l, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t b = 0; b < l; ++b) mean_row.at(0, b) += y.at(i, b);
    for (std::size_t b = 0; b < l; ++b) mean_row.at(0, b) /= static_cast<double>(n);

    Tensor y0 = y;
    double total_var = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t b = 0; b < l; ++b) {
            y0.at(i, b) -= mean_row.at(0, b);
            total_var += y0.at(i, b) * y0.at(i, b);
        }
    if (total_var < 1e-24)
        throw DegeneracyError("vca: rank-deficient data (all pixels identical)");

    Rng rng(seed);

    if (p == 1) {
        Tensor u1 = principal_directions(y, 1);
        std::size_t best = 0;
        double best_mag = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double proj = 0.0;
            for (std::size_t b = 0; b < l; ++b) proj += y.at(i, b) * u1.at(b, 0);
            if (std::abs(proj) > best_mag) {
                best_mag = std::abs(proj);
                best = i;
            }
        }
        VcaResult res;
        res.indices = {best};
        res.endmembers = Tensor(l, 1);
        for (std::size_t b = 0; b < l; ++b) res.endmembers.at(b, 0) = y.at(best, b);
        return res;
    }

    // SNR estimate from the projected-power split
    double snr_db;
    {
        Tensor ud = principal_directions(y0, p);
        Tensor xp = kernels::matmul_nn(y0, ud);  // N x p
        double py = 0.0, px = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) py += y[i] * y[i];
        for (std::size_t i = 0; i < xp.size(); ++i) px += xp[i] * xp[i];
        for (std::size_t b = 0; b < l; ++b) m2 += mean_row.at(0, b) * mean_row.at(0, b);
        py /= static_cast<double>(n);
        px = px / static_cast<double>(n) + m2;
        snr_db = py - px <= 0.0
                     ? std::numeric_limits<double>::infinity()
                     : 10.0 * std::log10((px - static_cast<double>(p) / l * py) / (py - px));
    }
    const double snr_threshold = 15.0 + 10.0 * std::log10(static_cast<double>(p));

    // Build the working point set (N x p rows)
    Tensor work(n, p);
    if (snr_db > snr_threshold) {
        // high SNR: projective projection in the p-dim signal subspace
        Tensor ud = principal_directions(y, p);
        Tensor x = kernels::matmul_nn(y, ud);  // N x p
        std::vector<double> u(p, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < p; ++c) u[c] += x.at(i, c);
        for (std::size_t c = 0; c < p; ++c) u[c] *= static_cast<double>(p) / n;
        for (std::size_t i = 0; i < n; ++i) {
            double denom = 0.0;
            for (std::size_t c = 0; c < p; ++c) denom += x.at(i, c) * u[c];
            for (std::size_t c = 0; c < p; ++c) work.at(i, c) = x.at(i, c) / denom;
        }
    } else {
        // low SNR: (p-1)-dim subspace of mean-removed data, lifted by a
        // constant coordinate
        const std::size_t d = p - 1;
        Tensor ud = principal_directions(y0, d);
        Tensor x = kernels::matmul_nn(y0, ud);  // N x d
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double norm2 = 0.0;
            for (std::size_t t = 0; t < d; ++t) norm2 += x.at(i, t) * x.at(i, t);
            c = std::max(c, norm2);
        }
        c = std::sqrt(c);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < d; ++t) work.at(i, t) = x.at(i, t);
            work.at(i, d) = c;
        }
    }

    // Greedy simplex-vertex search
    std::vector<std::size_t> indices(p, 0);
    Tensor a(p, p, 0.0);
    a.at(p - 1, 0) = 1.0;
    std::vector<std::vector<double>> basis;  // orthonormal span of chosen columns

    auto rebuild_basis = [&](std::size_t cols) {
        basis.clear();
        for (std::size_t cidx = 0; cidx < cols; ++cidx) {
            std::vector<double> v(p);
            for (std::size_t r = 0; r < p; ++r) v[r] = a.at(r, cidx);
            for (const auto& b : basis) {
                double dot = 0.0;
                for (std::size_t r = 0; r < p; ++r) dot += v[r] * b[r];
                for (std::size_t r = 0; r < p; ++r) v[r] -= dot * b[r];
            }
            double norm = 0.0;
            for (double t : v) norm += t * t;
            norm = std::sqrt(norm);
            if (norm < 1e-12) continue;
            for (double& t : v) t /= norm;
            basis.push_back(std::move(v));
        }
    };

    for (std::size_t i = 0; i < p; ++i) {
        rebuild_basis(i == 0 ? 1 : i);
        std::vector<double> f(p);
        double fnorm = 0.0;
        for (int attempt = 0; attempt < 100 && fnorm < 1e-12; ++attempt) {
            for (std::size_t r = 0; r < p; ++r) f[r] = rng.normal();
            for (const auto& b : basis) {
                double dot = 0.0;
                for (std::size_t r = 0; r < p; ++r) dot += f[r] * b[r];
                for (std::size_t r = 0; r < p; ++r) f[r] -= dot * b[r];
            }
            fnorm = 0.0;
            for (double t : f) fnorm += t * t;
            fnorm = std::sqrt(fnorm);
        }
        if (fnorm < 1e-12) throw DegeneracyError("vca: projected data spans fewer than P directions");
        for (double& t : f) t /= fnorm;

        std::size_t best = 0;
        double best_mag = -1.0;
        for (std::size_t px = 0; px < n; ++px) {
            double v = 0.0;
            for (std::size_t c = 0; c < p; ++c) v += work.at(px, c) * f[c];
            if (std::abs(v) > best_mag) {
                best_mag = std::abs(v);
                best = px;
            }
        }
        indices[i] = best;
        for (std::size_t r = 0; r < p; ++r) a.at(r, i) = work.at(best, r);
    }

    VcaResult res;
    res.indices = indices;
    res.endmembers = Tensor(l, p);
    for (std::size_t e = 0; e < p; ++e)
        for (std::size_t b = 0; b < l; ++b) res.endmembers.at(b, e) = y.at(indices[e], b);
    return res;
}

}  // namespace sawu
