#pragma once

#include <cstdint>

#include "sawu/tensor.hpp"

namespace sawu {

// Per-parameter Adam accumulators. Shapes track the parameter tensor.
struct AdamState {
    Tensor m;  // first moment
    Tensor v;  // second moment
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(const Tensor& param) : m(param.rows(), param.cols(), 0.0),
                                              v(param.rows(), param.cols(), 0.0) {}
};

// One bias-corrected Adam update in place. Throws TrainingError on
// non-finite gradients.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr);

}  // namespace sawu
