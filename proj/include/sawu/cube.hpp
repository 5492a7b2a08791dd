#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sawu/tensor.hpp"

namespace sawu {

enum class Padding { Reflect, Edge };

// H x W x L reflectance cube, pixel-major with bands interleaved per pixel:
// value(i, j, b) = data[(i*W + j)*L + b].
struct HsiCube {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t bands = 0;
    std::vector<double> data;

    HsiCube() = default;
    HsiCube(std::size_t h, std::size_t w, std::size_t l)
        : height(h), width(w), bands(l), data(h * w * l, 0.0) {}

    std::size_t pixels() const { return height * width; }

    double& at(std::size_t i, std::size_t j, std::size_t b) {
        return data[(i * width + j) * bands + b];
    }
    double at(std::size_t i, std::size_t j, std::size_t b) const {
        return data[(i * width + j) * bands + b];
    }

    const double* pixel(std::size_t i, std::size_t j) const {
        return data.data() + (i * width + j) * bands;
    }

    void validate() const;  // throws on bad dims / non-finite values
};

// K x K patch around a center pixel; pixels in row-major window order,
// row p*K + q holds the spectrum of offset (p, q).
struct Window {
    std::size_t center_i = 0;
    std::size_t center_j = 0;
    std::size_t k = 0;
    Tensor pixels;  // K^2 x L
};

struct GroundTruth {
    Tensor endmembers;   // L x P
    HsiCube abundances;  // H x W with bands = P
};

// Shuffled full-coverage batch schedule for one epoch.
struct BatchPlan {
    std::uint64_t seed = 0;
    std::size_t batch_size = 128;
};

struct WindowBatch {
    std::vector<std::pair<std::size_t, std::size_t>> centers;
};

std::size_t reflect_index(std::ptrdiff_t idx, std::size_t n);

Window extract_window(const HsiCube& cube, std::size_t i, std::size_t j, std::size_t k,
                      Padding padding);

// Center-pixel matrix (B x L) and stacked window matrix (B*K^2 x L) for a
// batch; window rows of batch member b occupy rows [b*K^2, (b+1)*K^2).
struct BatchMatrices {
    Tensor centers;  // B x L
    Tensor windows;  // B*K^2 x L
};
BatchMatrices assemble_batch(const HsiCube& cube, const WindowBatch& batch, std::size_t k,
                             Padding padding);

// Center-pixel matrix only (B x L); the plain autoencoder path needs no
// windows.
Tensor assemble_centers(const HsiCube& cube, const WindowBatch& batch);

// One epoch worth of batches: each pixel center exactly once, shuffled by
// plan.seed, ceil(H*W / batch_size) batches with a possibly short tail.
std::vector<WindowBatch> make_batches(const HsiCube& cube, const BatchPlan& plan, std::size_t k,
                                      Padding padding);

// Self-describing binary cube format, little-endian throughout:
//   "HSICUBE1" | u32 H | u32 W | u32 L | f64 * H*W*L (pixel-major)
void save_cube(const HsiCube& cube, const std::string& path);
HsiCube load_cube(const std::string& path);

// Whitespace-separated pixels-x-bands matrix; caller supplies H and W.
HsiCube load_cube_text(const std::string& path, std::size_t height, std::size_t width);

// Text matrix helpers (endmembers are stored as an L x P text matrix).
Tensor load_matrix_text(const std::string& path);
void save_matrix_text(const Tensor& m, const std::string& path);

}  // namespace sawu
