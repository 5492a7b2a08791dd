#include "sawu/grad_check.hpp"

#include <cmath>

#include "sawu/errors.hpp"

namespace sawu {

namespace {
double eval_scalar(const std::function<Var(Graph&, Var)>& f, const Tensor& x) {
    Graph g;
    Var leaf = g.leaf(x, false);
    Var out = f(g, leaf);
    if (g.value(out).size() != 1)
        throw UsageError("grad_check: f must be scalar-valued, got " + g.value(out).shape_str());
    return g.value(out).item();
}
}  // namespace

double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& x, double h) {
    if (h <= 0.0) throw UsageError("grad_check: h must be positive");

    Graph g;
    Var leaf = g.leaf(x, true);
    Var out = f(g, leaf);
    if (g.value(out).size() != 1)
        throw UsageError("grad_check: f must be scalar-valued, got " + g.value(out).shape_str());
    g.backward(out);
    const Tensor g_ad = g.grad(leaf);

    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor xp = x;
        Tensor xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double g_fd = (eval_scalar(f, xp) - eval_scalar(f, xm)) / (2.0 * h);
        const double err = std::abs(g_ad[i] - g_fd) / std::max(1.0, std::abs(g_fd));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace sawu
