#pragma once

#include <cstdint>
#include <vector>

#include "sawu/cube.hpp"
#include "sawu/tensor.hpp"

namespace sawu {

struct VcaResult {
    Tensor endmembers;                 // L x P, columns are input pixel spectra
    std::vector<std::size_t> indices;  // flat pixel index (i*W + j) per endmember
};

// Vertex component analysis. Estimates the signal subspace from the data
// SNR, projects, and greedily picks the pixels spanning the largest
// simplex: each step draws a random direction orthogonal to the chosen
// vertices and takes the pixel with the extreme projection. Deterministic
// per seed. Throws DegeneracyError on rank-deficient input.
VcaResult vca(const HsiCube& cube, std::size_t p, std::uint64_t seed);

}  // namespace sawu
