#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sawu/errors.hpp"
#include "sawu/grad_check.hpp"
#include "sawu/model.hpp"
#include "sawu/rng.hpp"
#include "sawu/synthetic.hpp"

using namespace sawu;

namespace {

ModelConfig toy_config(std::size_t k, std::size_t p, std::size_t l) {
    ModelConfig c;
    c.window = k;
    c.endmembers = p;
    c.bands = l;
    c.dropout_rate = 0.0;
    c.seed = 7;
    return c;
}

ModelParams random_params(const ModelConfig& c, NetVariant variant, std::uint64_t seed) {
    Rng rng(seed);
    Tensor dec(c.bands, c.endmembers);
    for (std::size_t i = 0; i < dec.size(); ++i) dec[i] = rng.uniform(0.05, 1.0);
    return init_params(c, variant, dec, rng);
}

}  // namespace

TEST_CASE("pixel attention: zero gate params halve the spectrum") {
    ModelConfig c = toy_config(3, 2, 5);
    ModelParams params = random_params(c, NetVariant::Sawu, 1);
    params.pa_scale = Tensor(1, 5, 0.0);
    params.pa_bias = Tensor(1, 5, 0.0);
    Tensor x(1, 5, {0.1, 0.4, 0.9, 0.2, 0.7});
    Tensor out = pixel_attention(x, params, true);
    for (std::size_t i = 0; i < 5; ++i) CHECK(out[i] == doctest::Approx(0.5 * x[i]).epsilon(1e-15));
}

TEST_CASE("pixel attention: saturated gate passes the spectrum through") {
    ModelConfig c = toy_config(3, 2, 4);
    ModelParams params = random_params(c, NetVariant::Sawu, 2);
    params.pa_scale = Tensor(1, 4, 0.0);
    params.pa_bias = Tensor(1, 4, 60.0);  // sigmoid(60) == 1 to machine precision
    Tensor x(1, 4, {0.3, 0.8, 0.1, 0.5});
    Tensor out = pixel_attention(x, params, true);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("pixel attention matches the scalar-loop oracle; off switch is identity") {
    ModelConfig c = toy_config(3, 2, 8);
    ModelParams params = random_params(c, NetVariant::Sawu, 3);
    Rng rng(9);
    Tensor x(1, 8);
    for (std::size_t i = 0; i < 8; ++i) x[i] = rng.uniform(0.0, 1.0);

    Tensor out = pixel_attention(x, params, true);
    for (std::size_t i = 0; i < 8; ++i) {
        const double z = params.pa_scale[i] * x[i] + params.pa_bias[i];
        const double want = x[i] / (1.0 + std::exp(-z));
        CHECK(out[i] == doctest::Approx(want).epsilon(1e-12));
    }

    Tensor off = pixel_attention(x, params, false);
    for (std::size_t i = 0; i < 8; ++i) CHECK(off[i] == x[i]);
}

TEST_CASE("window attention: K=1 is a single certain weight") {
    ModelConfig c = toy_config(1, 2, 6);
    ModelParams params = random_params(c, NetVariant::Sawu, 4);
    Rng rng(11);
    Tensor x(1, 6);
    for (std::size_t i = 0; i < 6; ++i) x[i] = rng.uniform(0.0, 1.0);
    Tensor d = window_attention(x, params, 1);
    REQUIRE(d.rows() == 1);
    REQUIRE(d.cols() == 1);
    CHECK(d.item() == 1.0);
}

TEST_CASE("window attention: zero projection gives the uniform map") {
    ModelConfig c = toy_config(3, 2, 6);
    ModelParams params = random_params(c, NetVariant::Sawu, 5);
    params.wa_weight = Tensor(6, 81, 0.0);
    params.wa_bias = Tensor(1, 81, 0.0);
    Tensor x(1, 6, 0.5);
    Tensor d = window_attention(x, params, 3);
    for (std::size_t i = 0; i < d.size(); ++i)
        CHECK(d[i] == doctest::Approx(1.0 / 9).epsilon(1e-12));
}

TEST_CASE("window attention rows are stochastic for random inputs") {
    ModelConfig c = toy_config(3, 2, 10);
    Rng rng(13);
    for (int it = 0; it < 50; ++it) {
        ModelParams params = random_params(c, NetVariant::Sawu, 100 + it);
        Tensor x(1, 10);
        for (std::size_t i = 0; i < 10; ++i) x[i] = rng.uniform(0.0, 1.0);
        Tensor d = window_attention(x, params, 3);
        for (std::size_t r = 0; r < 9; ++r) {
            double sum = 0.0;
            for (std::size_t col = 0; col < 9; ++col) {
                CHECK(d.at(r, col) > 0.0);
                sum += d.at(r, col);
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("window attention rejects a mis-shaped projection") {
    ModelConfig c = toy_config(3, 2, 6);
    ModelParams params = random_params(c, NetVariant::Sawu, 6);
    Tensor x(1, 6, 0.5);
    CHECK_THROWS_AS(window_attention(x, params, 5), DimensionError);
}

TEST_CASE("encode: zero weights give zero codes") {
    ModelConfig c = toy_config(3, 2, 5);
    ModelParams params = random_params(c, NetVariant::Sawu, 7);
    params.enc_weight = Tensor(2, 5, 0.0);
    HsiCube cube(4, 4, 5);
    Rng rng(15);
    for (double& v : cube.data) v = rng.uniform(0.0, 1.0);
    Window w = extract_window(cube, 1, 1, 3, Padding::Reflect);
    Tensor h = encode(w, params, c, Mode::Train, &rng);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i] == 0.0);
}

TEST_CASE("encode in infer mode ignores the dropout rate") {
    ModelConfig c = toy_config(3, 3, 6);
    ModelParams params = random_params(c, NetVariant::Sawu, 8);
    HsiCube cube(5, 5, 6);
    Rng rng(17);
    for (double& v : cube.data) v = rng.uniform(0.0, 1.0);
    Window w = extract_window(cube, 2, 2, 3, Padding::Reflect);

    ModelConfig c_heavy = c;
    c_heavy.dropout_rate = 0.9;
    Tensor a = encode(w, params, c, Mode::Infer);
    Tensor b = encode(w, params, c_heavy, Mode::Infer);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("encode matches a hand computation (P=2, L=3, K=1, frozen BN)") {
    ModelConfig c = toy_config(1, 2, 3);
    ModelParams params = random_params(c, NetVariant::Sawu, 9);
    params.enc_weight = Tensor(2, 3, {1, 0, 2, 0, -1, 1});
    params.bn_gamma = Tensor(1, 2, {2.0, 0.5});
    params.bn_beta = Tensor(1, 2, {0.1, -0.2});
    params.bn.mean = Tensor(1, 2, {0.2, -0.1});
    params.bn.var = Tensor(1, 2, {0.04, 0.09});

    HsiCube cube(1, 1, 3);
    cube.data = {0.5, 1.0, 0.25};
    Window w = extract_window(cube, 0, 0, 1, Padding::Reflect);
    Tensor h = encode(w, params, c, Mode::Infer);
    REQUIRE(h.rows() == 2);
    REQUIRE(h.cols() == 1);

    // z = (1.0, -0.75); y_f = gamma*(z - mean)/sqrt(var + 1e-5) + beta; relu
    const double y0 = 2.0 * (1.0 - 0.2) / std::sqrt(0.04 + 1e-5) + 0.1;
    const double y1 = 0.5 * (-0.75 + 0.1) / std::sqrt(0.09 + 1e-5) - 0.2;
    CHECK(h.at(0, 0) == doctest::Approx(y0).epsilon(1e-12));
    CHECK(h.at(1, 0) == doctest::Approx(y1 > 0 ? y1 : 0.0).epsilon(1e-12));
    CHECK(h.at(1, 0) == 0.0);  // y1 is negative, relu clips it
}

TEST_CASE("weighted fold: identity attention sums the window columns") {
    Rng rng(19);
    Tensor h(3, 9);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = rng.uniform(0.0, 1.0);
    Tensor eye(9, 9, 0.0);
    for (std::size_t i = 0; i < 9; ++i) eye.at(i, i) = 1.0;

    Tensor hhat = weighted_fold(eye, h);
    REQUIRE(hhat.rows() == 3);
    for (std::size_t e = 0; e < 3; ++e) {
        double want = 0.0;
        for (std::size_t t = 0; t < 9; ++t) want += h.at(e, t);
        CHECK(hhat.at(e, 0) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("weighted fold: K=1 returns the single column") {
    Tensor h(4, 1, {0.2, 0.4, 0.1, 0.9});
    Tensor one(1, 1, {1.0});
    Tensor hhat = weighted_fold(one, h);
    for (std::size_t e = 0; e < 4; ++e) CHECK(hhat.at(e, 0) == h.at(e, 0));
}

TEST_CASE("weighted fold: uniform attention equals the column-sum oracle") {
    Rng rng(23);
    Tensor h(3, 4);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = rng.uniform(0.0, 1.0);
    Tensor uniform(4, 4, 0.25);

    Tensor hhat = weighted_fold(uniform, h);
    // explicit loops: H[e][slot] = sum_t h[e][t] * D[slot][t]; fold sums slots
    for (std::size_t e = 0; e < 3; ++e) {
        double want = 0.0;
        for (std::size_t slot = 0; slot < 4; ++slot)
            for (std::size_t t = 0; t < 4; ++t) want += h.at(e, t) * 0.25;
        CHECK(hhat.at(e, 0) == doctest::Approx(want).epsilon(1e-12));
        // which collapses to the plain column sum
        double colsum = 0.0;
        for (std::size_t t = 0; t < 4; ++t) colsum += h.at(e, t);
        CHECK(hhat.at(e, 0) == doctest::Approx(colsum).epsilon(1e-12));
    }
}

TEST_CASE("normalize_abundance examples") {
    Tensor v(3, 1, {2, 3, 5});
    Tensor s = normalize_abundance(v, 1e-9);
    CHECK(s.at(0, 0) == doctest::Approx(0.2).epsilon(1e-8));
    CHECK(s.at(1, 0) == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(s.at(2, 0) == doctest::Approx(0.5).epsilon(1e-8));

    Tensor z = normalize_abundance(Tensor(3, 1, 0.0), 1e-9);
    for (std::size_t i = 0; i < 3; ++i) CHECK(z[i] == 0.0);

    Rng rng(29);
    Tensor r(5, 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        r[i] = rng.uniform(0.1, 2.0);
        sum += r[i];
    }
    Tensor sn = normalize_abundance(r, 1e-9);
    double got = 0.0;
    for (std::size_t i = 0; i < 5; ++i) got += sn[i];
    CHECK(got == doctest::Approx(sum / (sum + 1e-9)).epsilon(1e-15));
}

TEST_CASE("decode: one-hot picks an endmember column, zero gives zero") {
    ModelConfig c = toy_config(3, 3, 7);
    ModelParams params = random_params(c, NetVariant::Sawu, 10);

    Tensor onehot(3, 1, {0, 1, 0});
    Tensor x = decode(onehot, params);
    for (std::size_t b = 0; b < 7; ++b) CHECK(x.at(b, 0) == params.dec_weight.at(b, 1));

    Tensor zero = decode(Tensor(3, 1, 0.0), params);
    for (std::size_t b = 0; b < 7; ++b) CHECK(zero.at(b, 0) == 0.0);

    // random abundance vs triple-loop oracle
    Rng rng(31);
    Tensor s(3, 1);
    for (std::size_t i = 0; i < 3; ++i) s[i] = rng.uniform(0.0, 1.0);
    Tensor got = decode(s, params);
    for (std::size_t b = 0; b < 7; ++b) {
        double want = 0.0;
        for (std::size_t e = 0; e < 3; ++e) want += params.dec_weight.at(b, e) * s[e];
        CHECK(got.at(b, 0) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("loss: scale-invariant reconstruction leaves only the sparsity term") {
    Tensor x(1, 4, {0.2, 0.5, 0.1, 0.9});
    Tensor xhat = x;
    for (std::size_t i = 0; i < 4; ++i) xhat[i] *= 3.7;
    Tensor onehot(1, 3, {1, 0, 0});
    CHECK(loss_value(x, xhat, onehot, 12.0, 2e-3) == doctest::Approx(0.002).epsilon(1e-9));
}

TEST_CASE("loss: orthogonal reconstruction costs lambda1 * pi/2") {
    Tensor x(1, 2, {1, 0});
    Tensor xhat(1, 2, {0, 1});
    Tensor s(1, 2, {0.5, 0.5});
    CHECK(loss_value(x, xhat, s, 12.0, 0.0) ==
          doctest::Approx(12.0 * std::acos(0.0)).epsilon(1e-12));
}

TEST_CASE("loss: zero reconstruction is a domain error") {
    Tensor x(1, 3, {1, 2, 3});
    Tensor zero(1, 3, 0.0);
    Tensor s(1, 2, {0.5, 0.5});
    CHECK_THROWS_AS(loss_value(x, zero, s, 12.0, 2e-3), DomainError);
}

TEST_CASE("batched forward equals the composed single-sample ops") {
    ModelConfig c = toy_config(3, 3, 8);
    c.dropout_rate = 0.0;
    ModelParams params = random_params(c, NetVariant::Sawu, 12);
    SyntheticData d = generate_synthetic(3, 8, 6, 6, 30.0, 41);

    InferResult inf = infer_abundances(params, d.cube, c);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            Window w = extract_window(d.cube, i, j, 3, Padding::Reflect);
            Tensor center(1, 8, std::vector<double>(d.cube.pixel(i, j), d.cube.pixel(i, j) + 8));
            Tensor xpa = pixel_attention(center, params, c.use_pixel_attention);
            Tensor attn = window_attention(xpa, params, 3);
            Tensor h = encode(w, params, c, Mode::Infer);
            Tensor hhat = weighted_fold(attn, h);
            Tensor s = normalize_abundance(hhat, c.asc_eps);
            for (std::size_t e = 0; e < 3; ++e)
                CHECK(inf.abundances.at(i, j, e) == doctest::Approx(s.at(e, 0)).epsilon(1e-12));
        }
}

TEST_CASE("inference abundances satisfy ASC and ANC") {
    ModelConfig c = toy_config(3, 4, 12);
    ModelParams params = random_params(c, NetVariant::Sawu, 13);
    SyntheticData d = generate_synthetic(4, 12, 10, 10, 30.0, 43);

    InferResult inf = infer_abundances(params, d.cube, c);
    std::size_t degenerate = 0;
    for (std::size_t px = 0; px < 100; ++px) {
        double sum = 0.0;
        for (std::size_t e = 0; e < 4; ++e) {
            const double v = inf.abundances.data[px * 4 + e];
            CHECK(v >= 0.0);
            sum += v;
        }
        if (sum == 0.0) {
            ++degenerate;
        } else {
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
    CHECK(degenerate == inf.degenerate_pixels);
}

TEST_CASE("forward with pixel attention off differs only through the attention map") {
    ModelConfig c = toy_config(3, 3, 8);
    c.dropout_rate = 0.0;
    ModelParams params = random_params(c, NetVariant::Sawu, 14);
    // flatten the attention response: uniform map regardless of input
    params.wa_weight = Tensor(8, 81, 0.0);
    params.wa_bias = Tensor(1, 81, 0.0);
    SyntheticData d = generate_synthetic(3, 8, 5, 5, 30.0, 47);

    ModelConfig c_off = c;
    c_off.use_pixel_attention = false;
    InferResult on = infer_abundances(params, d.cube, c);
    InferResult off = infer_abundances(params, d.cube, c_off);
    // with a constant attention map the gate cannot influence anything
    for (std::size_t i = 0; i < on.abundances.data.size(); ++i)
        CHECK(on.abundances.data[i] == off.abundances.data[i]);
}

TEST_CASE("full-model gradients match finite differences per parameter group") {
    ModelConfig c = toy_config(3, 3, 6);
    c.dropout_rate = 0.1;
    ModelParams params = random_params(c, NetVariant::Sawu, 15);
    SyntheticData d = generate_synthetic(3, 6, 4, 4, 30.0, 53);

    WindowBatch batch;
    batch.centers = {{1, 1}, {2, 2}};
    BatchMatrices mats = assemble_batch(d.cube, batch, 3, Padding::Reflect);

    auto check_group = [&](const char* name, const Tensor& tensor) {
        auto f = [&, name](Graph& g, Var v) {
            ParamVars pv;
            pv.pa_scale = std::string(name) == "pa_scale" ? v : g.leaf(params.pa_scale);
            pv.pa_bias = std::string(name) == "pa_bias" ? v : g.leaf(params.pa_bias);
            pv.wa_weight = std::string(name) == "wa_weight" ? v : g.leaf(params.wa_weight);
            pv.wa_bias = std::string(name) == "wa_bias" ? v : g.leaf(params.wa_bias);
            pv.enc_weight = std::string(name) == "enc_weight" ? v : g.leaf(params.enc_weight);
            pv.bn_gamma = std::string(name) == "bn_gamma" ? v : g.leaf(params.bn_gamma);
            pv.bn_beta = std::string(name) == "bn_beta" ? v : g.leaf(params.bn_beta);
            pv.dec_weight = std::string(name) == "dec_weight" ? v : g.leaf(params.dec_weight);
            BnRunningStats running = params.bn;  // fresh per call
            Rng drop_rng(999);                   // same dropout mask per call
            ForwardResult fwd = build_forward(g, pv, mats.centers, mats.windows, c,
                                              NetVariant::Sawu, Mode::Train, running, &drop_rng);
            return fwd.loss;
        };
        const double err = grad_check(f, tensor, 1e-5);
        INFO("group ", name, " rel err ", err);
        CHECK(err < 1e-4);
    };

    check_group("pa_scale", params.pa_scale);
    check_group("pa_bias", params.pa_bias);
    check_group("wa_weight", params.wa_weight);
    check_group("wa_bias", params.wa_bias);
    check_group("enc_weight", params.enc_weight);
    check_group("bn_gamma", params.bn_gamma);
    check_group("bn_beta", params.bn_beta);
    check_group("dec_weight", params.dec_weight);
}

TEST_CASE("degenerate batch rows are kept, counted, and excluded from the loss") {
    ModelConfig c = toy_config(1, 3, 5);
    c.dropout_rate = 0.0;
    ModelParams params = random_params(c, NetVariant::Baseline, 16);
    // all encoder rows equal: batch norm then splits the two pixels by
    // magnitude, relu kills the smaller one entirely
    for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t b = 0; b < 5; ++b) params.enc_weight.at(f, b) = 0.3;

    Tensor centers(2, 5);
    for (std::size_t b = 0; b < 5; ++b) {
        centers.at(0, b) = 1.0;
        centers.at(1, b) = 0.1;
    }

    Graph g;
    ParamVars pv = register_params(g, params, NetVariant::Baseline, true);
    BnRunningStats running = params.bn;
    ForwardResult fwd = build_forward(g, pv, centers, Tensor(), c, NetVariant::Baseline,
                                      Mode::Train, running, nullptr);
    CHECK(fwd.degenerate_rows == 1);
    CHECK(std::isfinite(g.value(fwd.loss).item()));
    // the dead pixel keeps its zero abundance vector
    for (std::size_t e = 0; e < 3; ++e) CHECK(g.value(fwd.abundances).at(1, e) == 0.0);
    g.backward(fwd.loss);  // must not throw

    // a batch where everything dies is a training error
    Tensor one(1, 5, 0.5);
    Graph g2;
    ParamVars pv2 = register_params(g2, params, NetVariant::Baseline, true);
    BnRunningStats running2 = params.bn;
    params.bn_beta = Tensor(1, 3, -5.0);
    CHECK_THROWS_AS(build_forward(g2, register_params(g2, params, NetVariant::Baseline, true), one,
                                  Tensor(), c, NetVariant::Baseline, Mode::Train, running2, nullptr),
                    TrainingError);
}
