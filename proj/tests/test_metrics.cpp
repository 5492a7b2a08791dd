#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "sawu/errors.hpp"
#include "sawu/metrics.hpp"
#include "sawu/pgm.hpp"
#include "sawu/rng.hpp"

using namespace sawu;

namespace {

Tensor random_endmembers(std::size_t l, std::size_t p, Rng& rng) {
    Tensor t(l, p);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0.05, 1.0);
    return t;
}

// Exhaustive assignment oracle over an arbitrary cost matrix.
std::vector<std::size_t> brute_force_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t p = cost.size();
    std::vector<std::size_t> perm(p), best(p);
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    double best_total = 1e300;
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

std::vector<std::vector<double>> sad_cost_matrix(const Tensor& est, const Tensor& gt) {
    const std::size_t p = est.cols(), l = est.rows();
    std::vector<std::vector<double>> cost(p, std::vector<double>(p));
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            std::vector<double> a(l), b(l);
            for (std::size_t r = 0; r < l; ++r) {
                a[r] = est.at(r, i);
                b[r] = gt.at(r, j);
            }
            cost[i][j] = oracles::sad(a, b);
        }
    return cost;
}

}  // namespace

TEST_CASE("matching: identical endmembers give the identity permutation") {
    Rng rng(3);
    Tensor gt = random_endmembers(20, 4, rng);
    auto perm = match_endmembers(gt, gt);
    for (std::size_t i = 0; i < 4; ++i) CHECK(perm[i] == i);
}

TEST_CASE("matching: swapped columns are unswapped") {
    Rng rng(5);
    Tensor gt = random_endmembers(20, 4, rng);
    Tensor est = gt;
    for (std::size_t r = 0; r < 20; ++r) std::swap(est.at(r, 1), est.at(r, 3));
    auto perm = match_endmembers(est, gt);
    CHECK(perm[0] == 0);
    CHECK(perm[1] == 3);
    CHECK(perm[2] == 2);
    CHECK(perm[3] == 1);
}

TEST_CASE("matching equals the exhaustive oracle for P=4 random pairs") {
    Rng rng(7);
    for (int it = 0; it < 120; ++it) {
        Tensor est = random_endmembers(12, 4, rng);
        Tensor gt = random_endmembers(12, 4, rng);
        auto got = match_endmembers(est, gt);
        auto want = brute_force_assignment(sad_cost_matrix(est, gt));
        // compare achieved totals (ties can pick a different argmin)
        auto total = [&](const std::vector<std::size_t>& p) {
            auto cost = sad_cost_matrix(est, gt);
            double acc = 0.0;
            for (std::size_t i = 0; i < 4; ++i) acc += cost[i][p[i]];
            return acc;
        };
        CHECK(total(got) == doctest::Approx(total(want)).epsilon(1e-12));
    }
}

TEST_CASE("matching is exhaustive-optimal for every P up to 6") {
    Rng rng(11);
    for (std::size_t p = 2; p <= 6; ++p)
        for (int it = 0; it < 25; ++it) {
            Tensor est = random_endmembers(10, p, rng);
            Tensor gt = random_endmembers(10, p, rng);
            auto got = match_endmembers(est, gt);
            auto cost = sad_cost_matrix(est, gt);
            auto want = brute_force_assignment(cost);
            double got_total = 0.0, want_total = 0.0;
            for (std::size_t i = 0; i < p; ++i) {
                got_total += cost[i][got[i]];
                want_total += cost[i][want[i]];
            }
            CHECK(got_total == doctest::Approx(want_total).epsilon(1e-12));
        }
}

TEST_CASE("matching beyond the exhaustive cutoff still reaches the optimum") {
    Rng rng(13);
    Tensor est = random_endmembers(15, 9, rng);
    Tensor gt = random_endmembers(15, 9, rng);
    auto got = match_endmembers(est, gt);  // hungarian path
    auto cost = sad_cost_matrix(est, gt);
    auto want = brute_force_assignment(cost);
    double got_total = 0.0, want_total = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
        got_total += cost[i][got[i]];
        want_total += cost[i][want[i]];
    }
    CHECK(got_total == doctest::Approx(want_total).epsilon(1e-10));
    // result is a bijection
    std::vector<bool> seen(9, false);
    for (auto v : got) {
        CHECK(!seen[v]);
        seen[v] = true;
    }
}

TEST_CASE("sad report: exact match is all zeros, average is the mean") {
    Rng rng(17);
    Tensor gt = random_endmembers(25, 4, rng);
    auto perm = match_endmembers(gt, gt);
    auto sad = sad_report(gt, gt, perm);
    for (double v : sad) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));

    // reference row shape: per-endmember values scaled 1e-2 average to the
    // published row average
    MetricsReport r;
    r.matching = {0, 1, 2, 3};
    r.sad = {2.63e-2, 3.03e-2, 2.50e-2, 1.68e-2};
    CHECK(r.avg_sad() == doctest::Approx(2.46e-2).epsilon(1e-12));
}

TEST_CASE("rmse report basics") {
    HsiCube est(1, 1, 2);
    est.data = {0.0, 1.0};
    HsiCube gt(1, 1, 2);
    gt.data = {1.0, 0.0};
    auto rmse = rmse_report(est, gt, {0, 1});
    CHECK(rmse[0] == doctest::Approx(1.0));
    CHECK(rmse[1] == doctest::Approx(1.0));

    auto zero = rmse_report(gt, gt, {0, 1});
    CHECK(zero[0] == 0.0);
    CHECK(zero[1] == 0.0);

    MetricsReport samson;
    samson.sad = {0.0};
    samson.rmse = {5.66e-2, 5.31e-2, 4.03e-2};
    CHECK(samson.avg_rmse() == doctest::Approx(5.00e-2).epsilon(1e-12));
}

TEST_CASE("metrics are invariant under a shared column permutation") {
    Rng rng(19);
    Tensor est = random_endmembers(18, 4, rng);
    Tensor gt = random_endmembers(18, 4, rng);
    HsiCube est_ab(3, 3, 4), gt_ab(3, 3, 4);
    for (double& v : est_ab.data) v = rng.uniform(0.0, 1.0);
    for (double& v : gt_ab.data) v = rng.uniform(0.0, 1.0);

    MetricsReport base = score(est, gt, &est_ab, &gt_ab);

    // apply the same permutation to est and gt (columns and planes)
    const std::vector<std::size_t> shuffle{2, 0, 3, 1};
    Tensor est2(18, 4), gt2(18, 4);
    HsiCube est_ab2(3, 3, 4), gt_ab2(3, 3, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t r = 0; r < 18; ++r) {
            est2.at(r, i) = est.at(r, shuffle[i]);
            gt2.at(r, i) = gt.at(r, shuffle[i]);
        }
        for (std::size_t px = 0; px < 9; ++px) {
            est_ab2.data[px * 4 + i] = est_ab.data[px * 4 + shuffle[i]];
            gt_ab2.data[px * 4 + i] = gt_ab.data[px * 4 + shuffle[i]];
        }
    }
    MetricsReport moved = score(est2, gt2, &est_ab2, &gt_ab2);

    auto sorted = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    auto bs = sorted(base.sad), ms = sorted(moved.sad);
    for (std::size_t i = 0; i < 4; ++i) CHECK(bs[i] == doctest::Approx(ms[i]).epsilon(1e-12));
    auto br = sorted(base.rmse), mr = sorted(moved.rmse);
    for (std::size_t i = 0; i < 4; ++i) CHECK(br[i] == doctest::Approx(mr[i]).epsilon(1e-12));
    CHECK(base.avg_sad() == doctest::Approx(moved.avg_sad()).epsilon(1e-12));
    CHECK(base.avg_rmse() == doctest::Approx(moved.avg_rmse()).epsilon(1e-12));
}

TEST_CASE("machine report re-parses and the averages recompute") {
    MetricsReport r;
    r.matching = {1, 0, 2};
    r.sad = {0.021, 0.034, 0.019};
    r.rmse = {0.06, 0.049, 0.055};
    r.seed = 77;
    r.config_hash = 0xdeadbeef;

    std::ostringstream os;
    write_report(r, os);

    std::map<std::string, std::string> kv;
    std::istringstream is(os.str());
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        REQUIRE(eq != std::string::npos);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    CHECK(kv["seed"] == "77");
    CHECK(kv["matching"] == "1,0,2");

    const double s1 = std::stod(kv["sad_1"]);
    const double s2 = std::stod(kv["sad_2"]);
    const double s3 = std::stod(kv["sad_3"]);
    CHECK(std::stod(kv["sad_avg"]) == doctest::Approx((s1 + s2 + s3) / 3).epsilon(1e-15));
    const double r1 = std::stod(kv["rmse_1"]);
    const double r2 = std::stod(kv["rmse_2"]);
    const double r3 = std::stod(kv["rmse_3"]);
    CHECK(std::stod(kv["rmse_avg"]) == doctest::Approx((r1 + r2 + r3) / 3).epsilon(1e-15));

    // human table scales by 1e2
    const std::string table = human_table(r);
    CHECK(table.find("2.10") != std::string::npos);   // 0.021 -> 2.10
    CHECK(table.find("4.90") != std::string::npos);   // 0.049 -> 4.90
}

TEST_CASE("pgm writer: linear scale, pure abundance renders as 255") {
    const auto path = std::filesystem::temp_directory_path() / "sawu_test.pgm";
    write_pgm(path.string(), 2, 2, {1.0, 0.0, 0.5, 2.0});
    std::ifstream is(path, std::ios::binary);
    std::string magic, dims, maxval;
    std::getline(is, magic);
    std::getline(is, dims);
    std::getline(is, maxval);
    CHECK(magic == "P5");
    CHECK(dims == "2 2");
    CHECK(maxval == "255");
    unsigned char px[4];
    is.read(reinterpret_cast<char*>(px), 4);
    CHECK(px[0] == 255);
    CHECK(px[1] == 0);
    CHECK(px[2] == 128);
    CHECK(px[3] == 255);  // clamped
    std::filesystem::remove(path);
}

TEST_CASE("metric error paths") {
    Rng rng(23);
    Tensor a = random_endmembers(10, 3, rng);
    Tensor b = random_endmembers(10, 4, rng);
    CHECK_THROWS_AS(match_endmembers(a, b), UsageError);

    Tensor zeroed = a;
    for (std::size_t r = 0; r < 10; ++r) zeroed.at(r, 0) = 0.0;
    CHECK_THROWS_AS(sad_report(zeroed, a, {0, 1, 2}), DomainError);

    HsiCube ab1(2, 2, 3), ab2(2, 3, 3);
    CHECK_THROWS_AS(rmse_report(ab1, ab2, {0, 1, 2}), UsageError);
}
