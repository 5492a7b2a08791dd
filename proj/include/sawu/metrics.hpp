#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sawu/cube.hpp"
#include "sawu/tensor.hpp"

namespace sawu {

// Spectral angle between two spectra, radians.
double spectral_angle(const double* a, const double* b, std::size_t n);

// Permutation minimizing total SAD over all column assignments: estimated
// column e is matched to ground-truth column perm[e]. Exhaustive search for
// P <= 8, Hungarian assignment beyond.
std::vector<std::size_t> match_endmembers(const Tensor& est, const Tensor& gt);

// Per-endmember SAD (radians) under the given matching.
std::vector<double> sad_report(const Tensor& est, const Tensor& gt,
                               const std::vector<std::size_t>& perm);

// Per-endmember abundance RMSE over all pixels under the given matching.
std::vector<double> rmse_report(const HsiCube& est_ab, const HsiCube& gt_ab,
                                const std::vector<std::size_t>& perm);

struct MetricsReport {
    std::vector<std::size_t> matching;
    std::vector<double> sad;   // radians, per endmember
    std::vector<double> rmse;  // per endmember; empty when no abundance GT
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;

    double avg_sad() const;
    double avg_rmse() const;
};

MetricsReport score(const Tensor& est_endmembers, const Tensor& gt_endmembers,
                    const HsiCube* est_abundances, const HsiCube* gt_abundances);

// Machine form: one `name=value` per line, raw radians, locale independent.
void write_report(const MetricsReport& report, std::ostream& os);

// Human table mirroring the usual x1e-2 presentation.
std::string human_table(const MetricsReport& report);

}  // namespace sawu
