#include "sawu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sawu/errors.hpp"
#include "sawu/format.hpp"

namespace sawu {

double spectral_angle(const double* a, const double* b, std::size_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DomainError("spectral_angle: zero vector");
    return std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0));
}

namespace {

std::vector<std::vector<double>> sad_cost(const Tensor& est, const Tensor& gt) {
    const std::size_t p = est.cols();
    const std::size_t l = est.rows();
    std::vector<double> ecol(l), gcol(l);
    std::vector<std::vector<double>> cost(p, std::vector<double>(p));
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t b = 0; b < l; ++b) ecol[b] = est.at(b, i);
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t b = 0; b < l; ++b) gcol[b] = gt.at(b, j);
            cost[i][j] = spectral_angle(ecol.data(), gcol.data(), l);
        }
    }
    return cost;
}

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j)
                if (!used[j]) {
                    const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<std::size_t> res(n);
    for (int j = 1; j <= n; ++j) res[p[j] - 1] = static_cast<std::size_t>(j - 1);
    return res;
}

}  // namespace

std::vector<std::size_t> match_endmembers(const Tensor& est, const Tensor& gt) {
    if (est.rows() != gt.rows() || est.cols() != gt.cols())
        throw UsageError("match_endmembers: " + est.shape_str() + " vs " + gt.shape_str());
    const std::size_t p = est.cols();
    auto cost = sad_cost(est, gt);

    if (p <= 8) {
        std::vector<std::size_t> perm(p), best(p);
        std::iota(perm.begin(), perm.end(), 0);
        best = perm;
        double best_total = std::numeric_limits<double>::infinity();
        do {
            double total = 0.0;
            for (std::size_t i = 0; i < p; ++i) total += cost[i][perm[i]];
            if (total < best_total) {
                best_total = total;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    return hungarian(cost);
}

std::vector<double> sad_report(const Tensor& est, const Tensor& gt,
                               const std::vector<std::size_t>& perm) {
    if (est.rows() != gt.rows() || est.cols() != gt.cols() || perm.size() != est.cols())
        throw UsageError("sad_report: shape/permutation mismatch");
    const std::size_t p = est.cols(), l = est.rows();
    std::vector<double> ecol(l), gcol(l), out(p);
    for (std::size_t e = 0; e < p; ++e) {
        for (std::size_t b = 0; b < l; ++b) {
            ecol[b] = est.at(b, e);
            gcol[b] = gt.at(b, perm[e]);
        }
        out[e] = spectral_angle(ecol.data(), gcol.data(), l);
    }
    return out;
}

std::vector<double> rmse_report(const HsiCube& est_ab, const HsiCube& gt_ab,
                                const std::vector<std::size_t>& perm) {
    if (est_ab.height != gt_ab.height || est_ab.width != gt_ab.width ||
        est_ab.bands != gt_ab.bands || perm.size() != est_ab.bands)
        throw UsageError("rmse_report: shape/permutation mismatch");
    const std::size_t p = est_ab.bands;
    const std::size_t n = est_ab.pixels();
    std::vector<double> out(p, 0.0);
    for (std::size_t e = 0; e < p; ++e) {
        double acc = 0.0;
        for (std::size_t px = 0; px < n; ++px) {
            const double d = gt_ab.data[px * p + perm[e]] - est_ab.data[px * p + e];
            acc += d * d;
        }
        out[e] = std::sqrt(acc / static_cast<double>(n));
    }
    return out;
}

double MetricsReport::avg_sad() const {
    double acc = 0.0;
    for (double v : sad) acc += v;
    return acc / static_cast<double>(sad.size());
}

double MetricsReport::avg_rmse() const {
    double acc = 0.0;
    for (double v : rmse) acc += v;
    return acc / static_cast<double>(rmse.size());
}

MetricsReport score(const Tensor& est_endmembers, const Tensor& gt_endmembers,
                    const HsiCube* est_abundances, const HsiCube* gt_abundances) {
    MetricsReport r;
    r.matching = match_endmembers(est_endmembers, gt_endmembers);
    r.sad = sad_report(est_endmembers, gt_endmembers, r.matching);
    if (est_abundances && gt_abundances)
        r.rmse = rmse_report(*est_abundances, *gt_abundances, r.matching);
    return r;
}

void write_report(const MetricsReport& report, std::ostream& os) {
    os << "seed=" << report.seed << "\n";
    char hexbuf[32];
    std::snprintf(hexbuf, sizeof(hexbuf), "%016llx",
                  static_cast<unsigned long long>(report.config_hash));
    os << "config_hash=" << hexbuf << "\n";
    os << "matching=";
    for (std::size_t i = 0; i < report.matching.size(); ++i)
        os << (i ? "," : "") << report.matching[i];
    os << "\n";
    for (std::size_t e = 0; e < report.sad.size(); ++e)
        os << "sad_" << e + 1 << "=" << fmt_double(report.sad[e]) << "\n";
    os << "sad_avg=" << fmt_double(report.avg_sad()) << "\n";
    for (std::size_t e = 0; e < report.rmse.size(); ++e)
        os << "rmse_" << e + 1 << "=" << fmt_double(report.rmse[e]) << "\n";
    if (!report.rmse.empty()) os << "rmse_avg=" << fmt_double(report.avg_rmse()) << "\n";
}

std::string human_table(const MetricsReport& report) {
    std::ostringstream os;
    const bool with_rmse = !report.rmse.empty();
    os << "EM    SAD (x1e-2)";
    if (with_rmse) os << "   RMSE (x1e-2)";
    os << "\n";
    for (std::size_t e = 0; e < report.sad.size(); ++e) {
        os << "#" << e + 1 << "    " << fmt_fixed(report.sad[e] * 100.0, 2);
        if (with_rmse) os << "          " << fmt_fixed(report.rmse[e] * 100.0, 2);
        os << "\n";
    }
    os << "Avg   " << fmt_fixed(report.avg_sad() * 100.0, 2);
    if (with_rmse) os << "          " << fmt_fixed(report.avg_rmse() * 100.0, 2);
    os << "\n";
    return os.str();
}

}  // namespace sawu
