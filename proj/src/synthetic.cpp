#include "sawu/synthetic.hpp"

#include <cmath>
#include <limits>

#include "sawu/errors.hpp"
#include "sawu/rng.hpp"

namespace sawu {

namespace {

double spectral_angle(const double* a, const double* b, std::size_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0));
}

// Smooth positive spectrum: a low baseline plus a few Gaussian bumps,
// peak-normalized to 1.
std::vector<double> draw_spectrum(std::size_t l, Rng& rng) {
    std::vector<double> s(l, 0.1);
    const std::size_t nbumps = 3 + static_cast<std::size_t>(rng.bounded(3));
    for (std::size_t k = 0; k < nbumps; ++k) {
        const double amp = rng.uniform(0.2, 1.0);
        const double center = rng.uniform(0.0, static_cast<double>(l));
        const double sigma = rng.uniform(static_cast<double>(l) / 20.0, static_cast<double>(l) / 6.0);
        for (std::size_t b = 0; b < l; ++b) {
            const double d = (static_cast<double>(b) - center) / sigma;
            s[b] += amp * std::exp(-0.5 * d * d);
        }
    }
    double mx = 0.0;
    for (double v : s) mx = std::max(mx, v);
    for (double& v : s) v /= mx;
    return s;
}

}  // namespace

SyntheticData generate_synthetic(std::size_t p, std::size_t l, std::size_t height,
                                 std::size_t width, double snr_db, std::uint64_t seed) {
    if (p < 2) throw UsageError("generate_synthetic: need P >= 2");
    if (l <= p) throw UsageError("generate_synthetic: need L > P");
    if (height == 0 || width == 0) throw UsageError("generate_synthetic: empty spatial extent");

    Rng rng(seed);
    const std::size_t n = height * width;

    // endmembers, pairwise separated by at least 0.15 rad
    Tensor endmembers(l, p);
    for (std::size_t e = 0; e < p; ++e) {
        std::vector<double> s;
        bool ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
            s = draw_spectrum(l, rng);
            ok = true;
            for (std::size_t prev = 0; prev < e && ok; ++prev) {
                std::vector<double> other(l);
                for (std::size_t b = 0; b < l; ++b) other[b] = endmembers.at(b, prev);
                if (spectral_angle(s.data(), other.data(), l) < 0.15) ok = false;
            }
        }
        if (!ok) throw DegeneracyError("generate_synthetic: could not draw distinct endmembers");
        for (std::size_t b = 0; b < l; ++b) endmembers.at(b, e) = s[b];
    }

    // Dirichlet(1) abundances drawn per 8x8 region, so material patches are
    // spatially coherent and survive the smoothing pass. Each endmember
    // additionally gets two seeded high-purity regions, mirroring scenes
    // where every material shows up nearly pure somewhere.
    const std::size_t region = std::min<std::size_t>(5, std::max<std::size_t>(2, std::min(height, width) / 2));
    const std::size_t rows = (height + region - 1) / region;
    const std::size_t cols = (width + region - 1) / region;
    std::vector<std::vector<double>> region_ab(rows * cols, std::vector<double>(p));
    for (auto& r : region_ab) {
        double sum = 0.0;
        for (std::size_t e = 0; e < p; ++e) {
            r[e] = -std::log(1.0 - rng.uniform());
            sum += r[e];
        }
        for (std::size_t e = 0; e < p; ++e) r[e] /= sum;
    }
    if (rows * cols >= 2 * p) {
        std::vector<std::size_t> order(rows * cols);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        std::size_t next = 0;
        for (std::size_t e = 0; e < p; ++e)
            for (int rep = 0; rep < 2; ++rep) {
                auto& r = region_ab[order[next++]];
                for (std::size_t j = 0; j < p; ++j) r[j] = (1.0 - 0.97) / (p - 1);
                r[e] = 0.97;
            }
    }
    HsiCube raw_ab(height, width, p);
    for (std::size_t i = 0; i < height; ++i)
        for (std::size_t j = 0; j < width; ++j) {
            const auto& r = region_ab[(i / region) * cols + (j / region)];
            for (std::size_t e = 0; e < p; ++e) raw_ab.at(i, j, e) = r[e];
        }

    // 3x3 mean filter with reflected borders, then renormalize
    HsiCube ab(height, width, p);
    for (std::size_t i = 0; i < height; ++i)
        for (std::size_t j = 0; j < width; ++j) {
            for (std::size_t e = 0; e < p; ++e) {
                double acc = 0.0;
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        const std::size_t si = reflect_index(static_cast<std::ptrdiff_t>(i) + di, height);
                        const std::size_t sj = reflect_index(static_cast<std::ptrdiff_t>(j) + dj, width);
                        acc += raw_ab.at(si, sj, e);
                    }
                ab.at(i, j, e) = acc / 9.0;
            }
            double sum = 0.0;
            for (std::size_t e = 0; e < p; ++e) sum += ab.at(i, j, e);
            for (std::size_t e = 0; e < p; ++e) ab.at(i, j, e) /= sum;
        }

    // remove near-pure pixels: remix toward uniform so the max lands at the cap
    const double cap = 0.95;
    const double uniform = 1.0 / static_cast<double>(p);
    for (std::size_t px = 0; px < n; ++px) {
        double mx = 0.0;
        for (std::size_t e = 0; e < p; ++e) mx = std::max(mx, ab.data[px * p + e]);
        if (mx > cap) {
            const double theta = (cap - uniform) / (mx - uniform);
            for (std::size_t e = 0; e < p; ++e)
                ab.data[px * p + e] = theta * ab.data[px * p + e] + (1.0 - theta) * uniform;
        }
    }

    // clean mixture
    HsiCube cube(height, width, l);
    for (std::size_t px = 0; px < n; ++px)
        for (std::size_t b = 0; b < l; ++b) {
            double acc = 0.0;
            for (std::size_t e = 0; e < p; ++e) acc += endmembers.at(b, e) * ab.data[px * p + e];
            cube.data[px * l + b] = acc;
        }

    SyntheticData out;
    out.gt.endmembers = endmembers;
    out.gt.abundances = ab;

    if (std::isinf(snr_db)) {
        out.achieved_snr_db = std::numeric_limits<double>::infinity();
        out.cube = std::move(cube);
        return out;
    }

    // white Gaussian noise scaled against the empirical noise power, so the
    // realized SNR hits the target exactly
    std::vector<double> noise(cube.data.size());
    double psig = 0.0, pnoise = 0.0;
    for (double v : cube.data) psig += v * v;
    for (double& v : noise) {
        v = rng.normal();
        pnoise += v * v;
    }
    const double sigma = std::sqrt(psig / (pnoise * std::pow(10.0, snr_db / 10.0)));
    for (std::size_t i = 0; i < cube.data.size(); ++i) cube.data[i] += sigma * noise[i];

    out.achieved_snr_db = 10.0 * std::log10(psig / (sigma * sigma * pnoise));
    out.cube = std::move(cube);
    return out;
}

double measure_snr_db(const HsiCube& cube, const GroundTruth& gt) {
    const std::size_t p = gt.endmembers.cols();
    const std::size_t l = gt.endmembers.rows();
    if (cube.bands != l || cube.height != gt.abundances.height || cube.width != gt.abundances.width ||
        gt.abundances.bands != p)
        throw DimensionError("measure_snr_db: cube/ground-truth shape mismatch");
    double psig = 0.0, pnoise = 0.0;
    for (std::size_t px = 0; px < cube.pixels(); ++px)
        for (std::size_t b = 0; b < l; ++b) {
            double clean = 0.0;
            for (std::size_t e = 0; e < p; ++e)
                clean += gt.endmembers.at(b, e) * gt.abundances.data[px * p + e];
            const double d = cube.data[px * l + b] - clean;
            psig += clean * clean;
            pnoise += d * d;
        }
    if (pnoise == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(psig / pnoise);
}

}  // namespace sawu
