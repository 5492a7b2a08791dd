#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sawu/cube.hpp"
#include "sawu/graph.hpp"
#include "sawu/rng.hpp"
#include "sawu/tensor.hpp"

namespace sawu {

enum class Mode { Train, Infer };
enum class NetVariant { Sawu, Baseline };

struct ModelConfig {
    std::size_t window = 3;      // K, odd
    std::size_t endmembers = 0;  // P
    std::size_t bands = 0;       // L
    double lambda1 = 12.0;
    double lambda2 = 2e-3;
    double dropout_rate = 0.1;
    double asc_eps = 1e-9;
    bool use_pixel_attention = true;
    std::size_t maxiter = 300;
    std::size_t batch_size = 128;
    double lr_encoder = 1e-3;
    double lr_decoder = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;
    std::uint64_t hash() const;
};

// All learnable state. The attention tensors are empty for the plain
// autoencoder variant.
struct ModelParams {
    Tensor pa_scale;    // 1 x L, per-band gate weight
    Tensor pa_bias;     // 1 x L
    Tensor wa_weight;   // L x K^4 projection onto window-attention logits
    Tensor wa_bias;     // 1 x K^4
    Tensor enc_weight;  // P x L, no bias
    Tensor bn_gamma;    // 1 x P
    Tensor bn_beta;     // 1 x P
    BnRunningStats bn;  // running stats for inference
    Tensor dec_weight;  // L x P, columns are the endmember estimates
};

// Glorot-uniform attention/encoder weights, identity batch norm, decoder
// columns copied from `decoder_init` (clamped nonnegative).
ModelParams init_params(const ModelConfig& config, NetVariant variant, const Tensor& decoder_init,
                        Rng& rng);

// ---- single-sample forward pieces ----

// x_pa = x (.) sigmoid(scale (.) x + bias); identity when the gate is off.
Tensor pixel_attention(const Tensor& x_center, const ModelParams& params, bool use_pixel_attention);

// Row-stochastic K^2 x K^2 attention map from the (gated) center spectrum.
Tensor window_attention(const Tensor& x_pa, const ModelParams& params, std::size_t k);

// P x K^2 coarse abundances, one column per window slot:
// column t = ReLU(Dropout(BN(enc * pixel_t))). Dropout only in train mode
// (rng required); train mode normalizes with this window's batch stats.
Tensor encode(const Window& window, const ModelParams& params, const ModelConfig& config,
              Mode mode, Rng* rng = nullptr);

// (h * D^T) summed over window slots -> P x 1.
Tensor weighted_fold(const Tensor& attention, const Tensor& h);

// s = v / (sum|v| + eps), whole vector.
Tensor normalize_abundance(const Tensor& h_hat, double eps);

// x_hat = dec * s.
Tensor decode(const Tensor& abundance, const ModelParams& params);

// lambda1 * sad(x, x_hat) + lambda2 * sum sqrt(s). Throws DomainError on a
// zero reconstruction.
double loss_value(const Tensor& x_center, const Tensor& x_hat, const Tensor& abundance,
                  double lambda1, double lambda2);

// ---- batched graph forward ----

struct ParamVars {
    Var pa_scale, pa_bias, wa_weight, wa_bias, enc_weight, bn_gamma, bn_beta, dec_weight;
};

ParamVars register_params(Graph& g, const ModelParams& params, NetVariant variant,
                          bool requires_grad);

struct ForwardResult {
    Var attention;   // (B*K^2) x K^2 row-stochastic blocks; unset for Baseline
    Var abundances;  // B x P
    Var recon;       // B x L
    Var loss;        // scalar; degenerate rows excluded from the mean
    std::size_t degenerate_rows = 0;
};

// Builds the full forward pass and loss over a batch. `bn_running` is
// updated in train mode and read in infer mode.
ForwardResult build_forward(Graph& g, const ParamVars& pv, const Tensor& centers,
                            const Tensor& windows, const ModelConfig& config, NetVariant variant,
                            Mode mode, BnRunningStats& bn_running, Rng* dropout_rng);

// ---- training / inference ----

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_history;      // per-epoch mean loss over pixels
    std::size_t degenerate_pixels = 0;     // total degenerate rows seen in training
};

// Full training loop: VCA-initialized decoder, two Adam groups (decoder at
// lr_decoder, the rest at lr_encoder), decoder clamped nonnegative after
// every step. Deterministic per config.seed. Optional per-epoch log lines.
TrainResult train(const HsiCube& cube, const ModelConfig& config,
                  NetVariant variant = NetVariant::Sawu, std::ostream* log = nullptr);

struct InferResult {
    HsiCube abundances;  // H x W with bands = P
    std::size_t degenerate_pixels = 0;
};

// Per-pixel abundances over the whole cube (inference mode: running BN
// stats, no dropout).
InferResult infer_abundances(const ModelParams& params, const HsiCube& cube,
                             const ModelConfig& config, NetVariant variant = NetVariant::Sawu);

// Decoder columns, verbatim.
Tensor extract_endmembers(const ModelParams& params);

}  // namespace sawu
