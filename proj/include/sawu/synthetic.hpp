#pragma once

#include <cstdint>

#include "sawu/cube.hpp"

namespace sawu {

struct SyntheticData {
    HsiCube cube;
    GroundTruth gt;
    double achieved_snr_db = 0.0;  // +inf when noise is off
};

// Linear-mixture synthetic scene: smooth positive endmember spectra,
// Dirichlet(1) abundances smoothed by a 3x3 mean filter (no pure pixels:
// any abundance above 0.8 is remixed toward uniform), then white Gaussian
// noise scaled to the requested SNR. Pass snr_db = +inf for a noiseless
// cube. Deterministic per seed.
SyntheticData generate_synthetic(std::size_t p, std::size_t l, std::size_t height,
                                 std::size_t width, double snr_db, std::uint64_t seed);

// Re-measure the realized SNR of a cube against the clean mixture implied
// by the ground truth.
double measure_snr_db(const HsiCube& cube, const GroundTruth& gt);

}  // namespace sawu
