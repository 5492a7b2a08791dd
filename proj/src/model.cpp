#include "sawu/model.hpp"

#include <cmath>
#include <cstring>
#include <ostream>

#include "sawu/adam.hpp"
#include "sawu/errors.hpp"
#include "sawu/format.hpp"
#include "sawu/vca.hpp"

namespace sawu {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
    return t;
}

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
    }
}

}  // namespace

void ModelConfig::validate() const {
    if (window == 0 || window % 2 == 0)
        throw UsageError("config: window K must be odd, got " + std::to_string(window));
    if (endmembers == 0 || bands == 0 || endmembers >= bands)
        throw UsageError("config: need 0 < P < L, got P=" + std::to_string(endmembers) +
                         " L=" + std::to_string(bands));
    if (lambda1 < 0.0 || lambda2 < 0.0) throw UsageError("config: loss weights must be >= 0");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw UsageError("config: dropout_rate must be in [0,1)");
    if (asc_eps <= 0.0) throw UsageError("config: asc_eps must be positive");
    if (batch_size == 0) throw UsageError("config: batch_size must be positive");
    if (lr_encoder <= 0.0 || lr_decoder <= 0.0) throw UsageError("config: learning rates must be positive");
}

std::uint64_t ModelConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const std::uint64_t k = window, p = endmembers, l = bands, mi = maxiter, bs = batch_size;
    fnv_mix(h, &k, 8);
    fnv_mix(h, &p, 8);
    fnv_mix(h, &l, 8);
    fnv_mix(h, &mi, 8);
    fnv_mix(h, &bs, 8);
    fnv_mix(h, &lambda1, 8);
    fnv_mix(h, &lambda2, 8);
    fnv_mix(h, &dropout_rate, 8);
    fnv_mix(h, &asc_eps, 8);
    fnv_mix(h, &lr_encoder, 8);
    fnv_mix(h, &lr_decoder, 8);
    const unsigned char pa = use_pixel_attention ? 1 : 0;
    fnv_mix(h, &pa, 1);
    fnv_mix(h, &seed, 8);
    return h;
}

ModelParams init_params(const ModelConfig& config, NetVariant variant, const Tensor& decoder_init,
                        Rng& rng) {
    config.validate();
    const std::size_t l = config.bands, p = config.endmembers;
    const std::size_t k4 = config.window * config.window * config.window * config.window;
    if (decoder_init.rows() != l || decoder_init.cols() != p)
        throw DimensionError("init_params: decoder init " + decoder_init.shape_str() +
                             ", expected " + std::to_string(l) + "x" + std::to_string(p));

    ModelParams params;
    if (variant == NetVariant::Sawu) {
        params.pa_scale = glorot_uniform(1, l, 1, 1, rng);
        params.pa_bias = Tensor(1, l, 0.0);
        params.wa_weight = glorot_uniform(l, k4, l, k4, rng);
        params.wa_bias = Tensor(1, k4, 0.0);
    }
    params.enc_weight = glorot_uniform(p, l, l, p, rng);
    params.bn_gamma = Tensor(1, p, 1.0);
    params.bn_beta = Tensor(1, p, 0.0);
    params.bn.mean = Tensor(1, p, 0.0);
    params.bn.var = Tensor(1, p, 1.0);
    params.dec_weight = decoder_init;
    for (std::size_t i = 0; i < params.dec_weight.size(); ++i)
        if (params.dec_weight[i] < 0.0) params.dec_weight[i] = 0.0;
    return params;
}

Tensor pixel_attention(const Tensor& x_center, const ModelParams& params,
                       bool use_pixel_attention) {
    if (!use_pixel_attention) return x_center;
    const std::size_t l = x_center.size();
    if (params.pa_scale.size() != l || params.pa_bias.size() != l)
        throw DimensionError("pixel_attention: gate params sized " + params.pa_scale.shape_str() +
                             " for input of " + std::to_string(l));
    Tensor out = x_center;
    for (std::size_t i = 0; i < l; ++i) {
        const double z = params.pa_scale[i] * x_center[i] + params.pa_bias[i];
        const double gate = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        out[i] = x_center[i] * gate;
    }
    return out;
}

Tensor window_attention(const Tensor& x_pa, const ModelParams& params, std::size_t k) {
    const std::size_t k2 = k * k;
    const std::size_t l = x_pa.size();
    if (params.wa_weight.rows() != l || params.wa_weight.cols() != k2 * k2 ||
        params.wa_bias.size() != k2 * k2)
        throw DimensionError("window_attention: projection is " + params.wa_weight.shape_str() +
                             ", expected " + std::to_string(l) + "x" + std::to_string(k2 * k2));
    Tensor logits(k2, k2);
    for (std::size_t c = 0; c < k2 * k2; ++c) {
        double acc = 0.0;
        for (std::size_t b = 0; b < l; ++b) acc += params.wa_weight.at(b, c) * x_pa[b];
        logits[c] = acc + params.wa_bias[c];
    }
    return kernels::softmax_rows(logits);
}

Tensor encode(const Window& window, const ModelParams& params, const ModelConfig& config,
              Mode mode, Rng* rng) {
    const std::size_t k2 = window.pixels.rows();
    const std::size_t p = params.enc_weight.rows();
    if (window.pixels.cols() != params.enc_weight.cols())
        throw DimensionError("encode: window bands " + std::to_string(window.pixels.cols()) +
                             " vs encoder " + params.enc_weight.shape_str());
    Tensor z = kernels::matmul_nt(window.pixels, params.enc_weight);  // K^2 x P

    if (mode == Mode::Train) {
        // normalize with this window's own batch statistics
        for (std::size_t f = 0; f < p; ++f) {
            double mu = 0.0;
            for (std::size_t r = 0; r < k2; ++r) mu += z.at(r, f);
            mu /= static_cast<double>(k2);
            double var = 0.0;
            for (std::size_t r = 0; r < k2; ++r) {
                const double d = z.at(r, f) - mu;
                var += d * d;
            }
            var /= static_cast<double>(k2);
            const double inv = 1.0 / std::sqrt(var + kBnEps);
            for (std::size_t r = 0; r < k2; ++r)
                z.at(r, f) = params.bn_gamma.at(0, f) * (z.at(r, f) - mu) * inv +
                             params.bn_beta.at(0, f);
        }
        if (config.dropout_rate > 0.0) {
            if (!rng) throw UsageError("encode: train-mode dropout needs an rng");
            const double keep = 1.0 - config.dropout_rate;
            for (std::size_t i = 0; i < z.size(); ++i)
                z[i] = rng->uniform() >= config.dropout_rate ? z[i] / keep : 0.0;
        }
    } else {
        for (std::size_t f = 0; f < p; ++f) {
            const double inv = 1.0 / std::sqrt(params.bn.var.at(0, f) + kBnEps);
            for (std::size_t r = 0; r < k2; ++r)
                z.at(r, f) = params.bn_gamma.at(0, f) * (z.at(r, f) - params.bn.mean.at(0, f)) * inv +
                             params.bn_beta.at(0, f);
        }
    }
    for (std::size_t i = 0; i < z.size(); ++i)
        if (z[i] < 0.0) z[i] = 0.0;
    return kernels::transpose(z);  // P x K^2, columns follow window rows
}

Tensor weighted_fold(const Tensor& attention, const Tensor& h) {
    if (attention.rows() != attention.cols() || h.cols() != attention.rows())
        throw DimensionError("weighted_fold: attention " + attention.shape_str() + " vs h " +
                             h.shape_str());
    Tensor mixed = kernels::matmul_nt(h, attention);  // P x K^2
    return kernels::row_sum(mixed);                   // P x 1
}

Tensor normalize_abundance(const Tensor& h_hat, double eps) {
    Tensor s = h_hat;
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) sum += std::abs(s[i]);
    const double inv = 1.0 / (sum + eps);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= inv;
    return s;
}

Tensor decode(const Tensor& abundance, const ModelParams& params) {
    const std::size_t p = params.dec_weight.cols();
    if (abundance.size() != p)
        throw DimensionError("decode: abundance " + abundance.shape_str() + " vs decoder " +
                             params.dec_weight.shape_str());
    Tensor s(p, 1, std::vector<double>(abundance.data(), abundance.data() + p));
    return kernels::matmul_nn(params.dec_weight, s);  // L x 1
}

double loss_value(const Tensor& x_center, const Tensor& x_hat, const Tensor& abundance,
                  double lambda1, double lambda2) {
    const std::size_t l = x_center.size();
    if (x_hat.size() != l)
        throw DimensionError("loss: x " + x_center.shape_str() + " vs x_hat " + x_hat.shape_str());
    Tensor a(1, l, std::vector<double>(x_center.data(), x_center.data() + l));
    Tensor b(1, l, std::vector<double>(x_hat.data(), x_hat.data() + l));
    const double sad = kernels::sad_rows(a, b).item();
    Tensor s(1, abundance.size(),
             std::vector<double>(abundance.data(), abundance.data() + abundance.size()));
    const double sparsity = kernels::l_half_rows(s).item();
    return lambda1 * sad + lambda2 * sparsity;
}

ParamVars register_params(Graph& g, const ModelParams& params, NetVariant variant,
                          bool requires_grad) {
    ParamVars pv;
    if (variant == NetVariant::Sawu) {
        pv.pa_scale = g.leaf(params.pa_scale, requires_grad);
        pv.pa_bias = g.leaf(params.pa_bias, requires_grad);
        pv.wa_weight = g.leaf(params.wa_weight, requires_grad);
        pv.wa_bias = g.leaf(params.wa_bias, requires_grad);
    }
    pv.enc_weight = g.leaf(params.enc_weight, requires_grad);
    pv.bn_gamma = g.leaf(params.bn_gamma, requires_grad);
    pv.bn_beta = g.leaf(params.bn_beta, requires_grad);
    pv.dec_weight = g.leaf(params.dec_weight, requires_grad);
    return pv;
}

ForwardResult build_forward(Graph& g, const ParamVars& pv, const Tensor& centers,
                            const Tensor& windows, const ModelConfig& config, NetVariant variant,
                            Mode mode, BnRunningStats& bn_running, Rng* dropout_rng) {
    const std::size_t b = centers.rows();
    const std::size_t k2 = config.window * config.window;
    ForwardResult out;

    Var xc = g.leaf(centers, false);
    Var enc_t = g.transpose(pv.enc_weight);
    Var z, attn;
    if (variant == NetVariant::Sawu) {
        if (windows.rows() != b * k2 || windows.cols() != config.bands)
            throw DimensionError("build_forward: windows " + windows.shape_str() + ", expected " +
                                 std::to_string(b * k2) + "x" + std::to_string(config.bands));
        Var xw = g.leaf(windows, false);
        Var xpa = xc;
        if (config.use_pixel_attention) {
            Var gate = g.sigmoid(g.add_rowvec(g.mul_rowvec(xc, pv.pa_scale), pv.pa_bias));
            xpa = g.mul(xc, gate);
        }
        Var logits = g.add_rowvec(g.matmul(xpa, pv.wa_weight), pv.wa_bias);
        attn = g.softmax_rows(g.reshape(logits, b * k2, k2));
        out.attention = attn;
        z = g.matmul(xw, enc_t);
    } else {
        z = g.matmul(xc, enc_t);
    }

    Var zn = mode == Mode::Train
                 ? g.batchnorm_train(z, pv.bn_gamma, pv.bn_beta, bn_running, kBnMomentum, kBnEps)
                 : g.batchnorm_infer(z, pv.bn_gamma, pv.bn_beta, bn_running, kBnEps);
    if (mode == Mode::Train && config.dropout_rate > 0.0) {
        if (!dropout_rng) throw UsageError("build_forward: dropout needs an rng in train mode");
        zn = g.dropout(zn, config.dropout_rate, *dropout_rng);
    }
    Var h = g.relu(zn);

    Var hhat;
    if (variant == NetVariant::Sawu) {
        Var mixed = g.block_matmul(attn, h, k2);
        hhat = g.block_row_sum(mixed, k2);
    } else {
        hhat = h;
    }
    Var s = g.l1_normalize_rows(hhat, config.asc_eps);
    out.abundances = s;

    // All-zero coarse abundances reconstruct to the zero spectrum, which has
    // no spectral angle. Keep those rows in the output, drop them from the
    // loss mean, and report the count.
    const Tensor& hv = g.value(hhat);
    std::vector<std::size_t> live;
    live.reserve(b);
    for (std::size_t r = 0; r < b; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < hv.cols(); ++c) sum += hv.at(r, c);
        if (sum > 0.0) live.push_back(r);
    }
    out.degenerate_rows = b - live.size();

    Var xhat = g.matmul(s, g.transpose(pv.dec_weight));
    out.recon = xhat;

    Var xc_live = xc, xhat_live = xhat, s_live = s;
    if (out.degenerate_rows > 0) {
        if (live.empty())
            throw TrainingError("build_forward: every batch member produced zero abundances");
        xc_live = g.gather_rows(xc, live);
        xhat_live = g.gather_rows(xhat, live);
        s_live = g.gather_rows(s, live);
    }
    Var sad_term = g.mean_all(g.sad_rows(xc_live, xhat_live));
    Var sparsity_term = g.mean_all(g.l_half_rows(s_live));
    out.loss = g.add(g.scale(sad_term, config.lambda1), g.scale(sparsity_term, config.lambda2));
    return out;
}

namespace {

struct ParamSlot {
    Tensor* tensor;
    double lr;
};

std::vector<ParamSlot> parameter_slots(ModelParams& params, const ModelConfig& config,
                                       NetVariant variant) {
    std::vector<ParamSlot> slots;
    if (variant == NetVariant::Sawu) {
        slots.push_back({&params.pa_scale, config.lr_encoder});
        slots.push_back({&params.pa_bias, config.lr_encoder});
        slots.push_back({&params.wa_weight, config.lr_encoder});
        slots.push_back({&params.wa_bias, config.lr_encoder});
    }
    slots.push_back({&params.enc_weight, config.lr_encoder});
    slots.push_back({&params.bn_gamma, config.lr_encoder});
    slots.push_back({&params.bn_beta, config.lr_encoder});
    slots.push_back({&params.dec_weight, config.lr_decoder});
    return slots;
}

std::vector<Var> slot_vars(const ParamVars& pv, NetVariant variant) {
    std::vector<Var> vars;
    if (variant == NetVariant::Sawu) {
        vars.push_back(pv.pa_scale);
        vars.push_back(pv.pa_bias);
        vars.push_back(pv.wa_weight);
        vars.push_back(pv.wa_bias);
    }
    vars.push_back(pv.enc_weight);
    vars.push_back(pv.bn_gamma);
    vars.push_back(pv.bn_beta);
    vars.push_back(pv.dec_weight);
    return vars;
}

}  // namespace

TrainResult train(const HsiCube& cube, const ModelConfig& config, NetVariant variant,
                  std::ostream* log) {
    cube.validate();
    config.validate();
    if (config.bands != cube.bands)
        throw DimensionError("train: config expects L=" + std::to_string(config.bands) +
                             ", cube has " + std::to_string(cube.bands));

    VcaResult vca_init = vca(cube, config.endmembers, config.seed);
    Rng rng(config.seed);
    TrainResult result;
    result.params = init_params(config, variant, vca_init.endmembers, rng);

    auto slots = parameter_slots(result.params, config, variant);
    std::vector<AdamState> states;
    states.reserve(slots.size());
    for (const auto& s : slots) states.emplace_back(*s.tensor);

    for (std::size_t epoch = 1; epoch <= config.maxiter; ++epoch) {
        BatchPlan plan{rng.raw(), config.batch_size};
        auto batches = make_batches(cube, plan, config.window, Padding::Reflect);
        double epoch_loss = 0.0;
        std::size_t epoch_pixels = 0;
        std::size_t epoch_degenerate = 0;

        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            BatchMatrices mats = variant == NetVariant::Sawu
                                     ? assemble_batch(cube, batches[bi], config.window,
                                                      Padding::Reflect)
                                     : BatchMatrices{assemble_centers(cube, batches[bi]), Tensor()};
            Graph g;
            ParamVars pv = register_params(g, result.params, variant, true);
            ForwardResult fwd = build_forward(g, pv, mats.centers, mats.windows, config, variant,
                                              Mode::Train, result.params.bn, &rng);
            const double loss = g.value(fwd.loss).item();
            if (!std::isfinite(loss))
                throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(bi));
            g.backward(fwd.loss);
            auto vars = slot_vars(pv, variant);
            for (std::size_t si = 0; si < slots.size(); ++si)
                adam_step(*slots[si].tensor, g.grad(vars[si]), states[si], slots[si].lr);
            for (std::size_t i = 0; i < result.params.dec_weight.size(); ++i)
                if (result.params.dec_weight[i] < 0.0) result.params.dec_weight[i] = 0.0;

            epoch_loss += loss * static_cast<double>(batches[bi].centers.size());
            epoch_pixels += batches[bi].centers.size();
            epoch_degenerate += fwd.degenerate_rows;
        }

        result.loss_history.push_back(epoch_loss / static_cast<double>(epoch_pixels));
        result.degenerate_pixels += epoch_degenerate;
        if (log)
            (*log) << "epoch " << epoch << " loss " << fmt_double(result.loss_history.back())
                   << " degenerate " << epoch_degenerate << "\n";
    }
    return result;
}

InferResult infer_abundances(const ModelParams& params, const HsiCube& cube,
                             const ModelConfig& config, NetVariant variant) {
    config.validate();
    if (config.bands != cube.bands)
        throw DimensionError("infer: config expects L=" + std::to_string(config.bands) +
                             ", cube has " + std::to_string(cube.bands));
    const std::size_t p = config.endmembers;
    const std::size_t k = config.window;
    const std::size_t k2 = k * k;
    const std::size_t l = cube.bands;

    InferResult out;
    out.abundances = HsiCube(cube.height, cube.width, p);

    const std::size_t chunk = 512;
    std::vector<std::pair<std::size_t, std::size_t>> centers;
    centers.reserve(chunk);

    auto flush = [&](std::size_t first_pixel) {
        const std::size_t b = centers.size();
        if (b == 0) return;
        WindowBatch wb{centers};
        Tensor s;
        if (variant == NetVariant::Sawu) {
            BatchMatrices mats = assemble_batch(cube, wb, k, Padding::Reflect);
            Tensor xpa = mats.centers;
            if (config.use_pixel_attention) {
                for (std::size_t r = 0; r < b; ++r)
                    for (std::size_t c = 0; c < l; ++c) {
                        const double zv =
                            params.pa_scale.at(0, c) * xpa.at(r, c) + params.pa_bias.at(0, c);
                        const double gate = zv >= 0.0 ? 1.0 / (1.0 + std::exp(-zv))
                                                      : std::exp(zv) / (1.0 + std::exp(zv));
                        xpa.at(r, c) *= gate;
                    }
            }
            Tensor logits = kernels::matmul_nn(xpa, params.wa_weight);
            for (std::size_t r = 0; r < b; ++r)
                for (std::size_t c = 0; c < k2 * k2; ++c)
                    logits.at(r, c) += params.wa_bias.at(0, c);
            Tensor attn = kernels::softmax_rows(
                Tensor(b * k2, k2, std::vector<double>(logits.data(), logits.data() + logits.size())));
            Tensor z = kernels::matmul_nt(mats.windows, params.enc_weight);
            for (std::size_t f = 0; f < p; ++f) {
                const double inv = 1.0 / std::sqrt(params.bn.var.at(0, f) + kBnEps);
                for (std::size_t r = 0; r < z.rows(); ++r)
                    z.at(r, f) = params.bn_gamma.at(0, f) * (z.at(r, f) - params.bn.mean.at(0, f)) * inv +
                                 params.bn_beta.at(0, f);
            }
            Tensor h = kernels::relu(z);
            Tensor mixed = kernels::block_matmul(attn, h, k2);
            Tensor hhat = kernels::block_row_sum(mixed, k2);
            s = kernels::l1_normalize_rows(hhat, config.asc_eps);
        } else {
            Tensor xc = assemble_centers(cube, wb);
            Tensor z = kernels::matmul_nt(xc, params.enc_weight);
            for (std::size_t f = 0; f < p; ++f) {
                const double inv = 1.0 / std::sqrt(params.bn.var.at(0, f) + kBnEps);
                for (std::size_t r = 0; r < z.rows(); ++r)
                    z.at(r, f) = params.bn_gamma.at(0, f) * (z.at(r, f) - params.bn.mean.at(0, f)) * inv +
                                 params.bn_beta.at(0, f);
            }
            Tensor h = kernels::relu(z);
            s = kernels::l1_normalize_rows(h, config.asc_eps);
        }
        for (std::size_t r = 0; r < b; ++r) {
            double sum = 0.0;
            for (std::size_t e = 0; e < p; ++e) {
                out.abundances.data[(first_pixel + r) * p + e] = s.at(r, e);
                sum += s.at(r, e);
            }
            if (sum == 0.0) ++out.degenerate_pixels;
        }
        centers.clear();
    };

    std::size_t chunk_start = 0;
    for (std::size_t i = 0; i < cube.height; ++i)
        for (std::size_t j = 0; j < cube.width; ++j) {
            centers.emplace_back(i, j);
            if (centers.size() == chunk) {
                flush(chunk_start);
                chunk_start = (i * cube.width + j) + 1;
            }
        }
    flush(chunk_start);
    return out;
}

Tensor extract_endmembers(const ModelParams& params) { return params.dec_weight; }

}  // namespace sawu
