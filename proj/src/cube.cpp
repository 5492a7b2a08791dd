#include "sawu/cube.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sawu/errors.hpp"
#include "sawu/rng.hpp"

namespace sawu {

namespace {

constexpr char kCubeMagic[8] = {'H', 'S', 'I', 'C', 'U', 'B', 'E', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    std::array<unsigned char, 4> b{static_cast<unsigned char>(v & 0xff),
                                   static_cast<unsigned char>((v >> 8) & 0xff),
                                   static_cast<unsigned char>((v >> 16) & 0xff),
                                   static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b.data()), 4);
}

std::uint32_t get_u32(std::istream& is) {
    std::array<unsigned char, 4> b{};
    is.read(reinterpret_cast<char*>(b.data()), 4);
    if (!is) throw IoError("cube file: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b.data()), 8);
}

double get_f64(const unsigned char* b) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void HsiCube::validate() const {
    if (bands < 2) throw DimensionError("cube: need at least 2 bands, got " + std::to_string(bands));
    if (height * width < 1) throw DimensionError("cube: empty spatial extent");
    if (data.size() != height * width * bands)
        throw DimensionError("cube: data size " + std::to_string(data.size()) + " != " +
                             std::to_string(height * width * bands));
    for (double v : data)
        if (!std::isfinite(v)) throw DomainError("cube: non-finite value");
}

std::size_t reflect_index(std::ptrdiff_t idx, std::size_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(n);
    // mirror without repeating the edge sample; period 2(n-1)
    std::ptrdiff_t p = idx % (2 * (m - 1));
    if (p < 0) p += 2 * (m - 1);
    if (p >= m) p = 2 * (m - 1) - p;
    return static_cast<std::size_t>(p);
}

Window extract_window(const HsiCube& cube, std::size_t i, std::size_t j, std::size_t k,
                      Padding padding) {
    if (k % 2 == 0 || k == 0) throw UsageError("extract_window: K must be odd, got " + std::to_string(k));
    if (i >= cube.height || j >= cube.width)
        throw UsageError("extract_window: center outside cube");
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
    Window w;
    w.center_i = i;
    w.center_j = j;
    w.k = k;
    w.pixels = Tensor(k * k, cube.bands);
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = 0; q < k; ++q) {
            const std::ptrdiff_t ri = static_cast<std::ptrdiff_t>(i) + static_cast<std::ptrdiff_t>(p) - half;
            const std::ptrdiff_t rj = static_cast<std::ptrdiff_t>(j) + static_cast<std::ptrdiff_t>(q) - half;
            std::size_t si, sj;
            if (padding == Padding::Reflect) {
                si = reflect_index(ri, cube.height);
                sj = reflect_index(rj, cube.width);
            } else {
                si = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(ri, 0, cube.height - 1));
                sj = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(rj, 0, cube.width - 1));
            }
            const double* src = cube.pixel(si, sj);
            double* dst = &w.pixels.at(p * k + q, 0);
            std::memcpy(dst, src, cube.bands * sizeof(double));
        }
    }
    return w;
}

BatchMatrices assemble_batch(const HsiCube& cube, const WindowBatch& batch, std::size_t k,
                             Padding padding) {
    const std::size_t b = batch.centers.size();
    const std::size_t l = cube.bands;
    BatchMatrices m{Tensor(b, l), Tensor(b * k * k, l)};
    for (std::size_t idx = 0; idx < b; ++idx) {
        const auto [ci, cj] = batch.centers[idx];
        std::memcpy(&m.centers.at(idx, 0), cube.pixel(ci, cj), l * sizeof(double));
        Window w = extract_window(cube, ci, cj, k, padding);
        std::memcpy(&m.windows.at(idx * k * k, 0), w.pixels.data(),
                    k * k * l * sizeof(double));
    }
    return m;
}

Tensor assemble_centers(const HsiCube& cube, const WindowBatch& batch) {
    const std::size_t b = batch.centers.size();
    Tensor m(b, cube.bands);
    for (std::size_t idx = 0; idx < b; ++idx) {
        const auto [ci, cj] = batch.centers[idx];
        std::memcpy(&m.at(idx, 0), cube.pixel(ci, cj), cube.bands * sizeof(double));
    }
    return m;
}

std::vector<WindowBatch> make_batches(const HsiCube& cube, const BatchPlan& plan, std::size_t k,
                                      Padding padding) {
    (void)k;
    (void)padding;
    if (plan.batch_size == 0) throw UsageError("make_batches: batch_size must be positive");
    std::vector<std::pair<std::size_t, std::size_t>> order;
    order.reserve(cube.pixels());
    for (std::size_t i = 0; i < cube.height; ++i)
        for (std::size_t j = 0; j < cube.width; ++j) order.emplace_back(i, j);
    Rng rng(plan.seed);
    rng.shuffle(order);

    std::vector<WindowBatch> batches;
    for (std::size_t start = 0; start < order.size(); start += plan.batch_size) {
        WindowBatch b;
        const std::size_t end = std::min(start + plan.batch_size, order.size());
        b.centers.assign(order.begin() + start, order.begin() + end);
        batches.push_back(std::move(b));
    }
    return batches;
}

void save_cube(const HsiCube& cube, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write(kCubeMagic, 8);
    put_u32(os, static_cast<std::uint32_t>(cube.height));
    put_u32(os, static_cast<std::uint32_t>(cube.width));
    put_u32(os, static_cast<std::uint32_t>(cube.bands));
    for (double v : cube.data) put_f64(os, v);
    if (!os) throw IoError("write failed: " + path);
}

HsiCube load_cube(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCubeMagic, 8) != 0)
        throw IoError("not a cube file (bad magic): " + path);
    HsiCube cube;
    cube.height = get_u32(is);
    cube.width = get_u32(is);
    cube.bands = get_u32(is);
    if (cube.height == 0 || cube.width == 0 || cube.bands == 0)
        throw IoError("cube file: zero dimension in header: " + path);
    const std::size_t n = cube.height * cube.width * cube.bands;
    std::vector<unsigned char> raw(n * 8);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(is.gcount()) != raw.size())
        throw IoError("cube file: truncated payload (" + std::to_string(is.gcount()) + " of " +
                      std::to_string(raw.size()) + " bytes): " + path);
    cube.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) cube.data[i] = get_f64(raw.data() + i * 8);
    for (double v : cube.data)
        if (!std::isfinite(v)) throw IoError("cube file: non-finite value: " + path);
    return cube;
}

HsiCube load_cube_text(const std::string& path, std::size_t height, std::size_t width) {
    Tensor m = load_matrix_text(path);
    if (m.rows() != height * width)
        throw IoError("text cube: " + std::to_string(m.rows()) + " pixel rows, expected " +
                      std::to_string(height * width) + ": " + path);
    HsiCube cube(height, width, m.cols());
    std::memcpy(cube.data.data(), m.data(), m.size() * sizeof(double));
    cube.validate();
    return cube;
}

Tensor load_matrix_text(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    std::vector<double> values;
    std::size_t cols = 0, rows = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::size_t n = 0;
        double v;
        while (ls >> v) {
            if (!std::isfinite(v)) throw IoError("text matrix: non-finite value: " + path);
            values.push_back(v);
            ++n;
        }
        if (n == 0) continue;
        if (cols == 0) cols = n;
        else if (n != cols)
            throw IoError("text matrix: ragged row " + std::to_string(rows) + " (" +
                          std::to_string(n) + " vs " + std::to_string(cols) + "): " + path);
        ++rows;
    }
    if (rows == 0) throw IoError("text matrix: no data: " + path);
    return Tensor(rows, cols, std::move(values));
}

void save_matrix_text(const Tensor& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    char buf[32];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), m.at(r, c));
            os.write(buf, end - buf);
            os.put(c + 1 == m.cols() ? '\n' : ' ');
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace sawu
