#include "sawu/adam.hpp"

#include <cmath>

#include "sawu/errors.hpp"

namespace sawu {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr) {
    if (!param.same_shape(grad))
        throw DimensionError("adam_step: param " + param.shape_str() + " vs grad " +
                             grad.shape_str());
    if (!state.m.same_shape(param))
        throw DimensionError("adam_step: state shape " + state.m.shape_str() + " vs param " +
                             param.shape_str());
    if (lr <= 0.0) throw UsageError("adam_step: lr must be positive");
    if (!grad.all_finite()) throw TrainingError("adam_step: non-finite gradient");

    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

}  // namespace sawu
