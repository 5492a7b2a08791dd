#pragma once

#include <functional>

#include "sawu/graph.hpp"
#include "sawu/tensor.hpp"

namespace sawu {

// Central-difference validation of reverse-mode gradients. `f` must build a
// scalar-valued graph from the given leaf and be a pure function of it
// (re-seed any internal randomness per call). Returns the max over
// coordinates of |g_ad - g_fd| / max(1, |g_fd|).
double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& x, double h);

}  // namespace sawu
