#include "sawu/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "sawu/errors.hpp"

namespace sawu {

Var Graph::make(Tensor value, bool requires_grad, std::function<void(Graph&)> back) {
    if (check_finite_ && !value.all_finite())
        throw DomainError("non-finite value produced at node " + std::to_string(nodes_.size()));
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

void Graph::accum(std::size_t id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Tensor(n.value.rows(), n.value.cols(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

const Tensor& Graph::grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0)
        throw UsageError("grad: node has no gradient (backward not run or node detached)");
    return n.grad;
}

void Graph::backward(Var loss) {
    Node& ln = nodes_[loss.id];
    if (ln.value.size() != 1) throw UsageError("backward: loss must be scalar, got " + ln.value.shape_str());
    for (auto& n : nodes_) n.grad = Tensor();
    ln.grad = Tensor(1, 1, std::vector<double>{1.0});
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.back || !n.requires_grad || n.grad.size() == 0) continue;
        n.back(*this);
    }
    for (auto& n : nodes_) {
        if (n.requires_grad && !n.back && n.grad.size() == 0)
            n.grad = Tensor(n.value.rows(), n.value.cols(), 0.0);
    }
}

Var Graph::leaf(Tensor value, bool requires_grad) {
    return make(std::move(value), requires_grad, nullptr);
}

Var Graph::matmul(Var a, Var b) {
    Tensor out = kernels::matmul_nn(value(a), value(b));
    const bool rg = needs_grad(a) || needs_grad(b);
    const std::size_t self = nodes_.size(), ia = a.id, ib = b.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, ib](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            if (g.nodes_[ia].requires_grad) g.accum(ia, kernels::matmul_nt(dc, g.nodes_[ib].value));
            if (g.nodes_[ib].requires_grad) g.accum(ib, kernels::matmul_tn(g.nodes_[ia].value, dc));
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::transpose(Var a) {
    Tensor out = kernels::transpose(value(a));
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia](Graph& g) { g.accum(ia, kernels::transpose(g.nodes_[self].grad)); };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::add(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw DimensionError("add: " + va.shape_str() + " vs " + vb.shape_str());
    Tensor out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    const bool rg = needs_grad(a) || needs_grad(b);
    const std::size_t self = nodes_.size(), ia = a.id, ib = b.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, ib](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            g.accum(ia, dc);
            g.accum(ib, dc);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::mul(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) throw DimensionError("mul: " + va.shape_str() + " vs " + vb.shape_str());
    Tensor out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    const bool rg = needs_grad(a) || needs_grad(b);
    const std::size_t self = nodes_.size(), ia = a.id, ib = b.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, ib](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& va = g.nodes_[ia].value;
            const Tensor& vb = g.nodes_[ib].value;
            if (g.nodes_[ia].requires_grad) {
                Tensor da(va.rows(), va.cols());
                for (std::size_t i = 0; i < da.size(); ++i) da[i] = dc[i] * vb[i];
                g.accum(ia, da);
            }
            if (g.nodes_[ib].requires_grad) {
                Tensor db(vb.rows(), vb.cols());
                for (std::size_t i = 0; i < db.size(); ++i) db[i] = dc[i] * va[i];
                g.accum(ib, db);
            }
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::add_rowvec(Var a, Var v) {
    const Tensor& va = value(a);
    const Tensor& vv = value(v);
    if (vv.rows() != 1 || vv.cols() != va.cols())
        throw DimensionError("add_rowvec: " + va.shape_str() + " + " + vv.shape_str());
    Tensor out = va;
    for (std::size_t r = 0; r < va.rows(); ++r)
        for (std::size_t c = 0; c < va.cols(); ++c) out.at(r, c) += vv.at(0, c);
    const bool rg = needs_grad(a) || needs_grad(v);
    const std::size_t self = nodes_.size(), ia = a.id, iv = v.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, iv](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            g.accum(ia, dc);
            if (g.nodes_[iv].requires_grad) {
                Tensor dv(1, dc.cols(), 0.0);
                for (std::size_t r = 0; r < dc.rows(); ++r)
                    for (std::size_t c = 0; c < dc.cols(); ++c) dv.at(0, c) += dc.at(r, c);
                g.accum(iv, dv);
            }
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::mul_rowvec(Var a, Var v) {
    const Tensor& va = value(a);
    const Tensor& vv = value(v);
    if (vv.rows() != 1 || vv.cols() != va.cols())
        throw DimensionError("mul_rowvec: " + va.shape_str() + " * " + vv.shape_str());
    Tensor out = va;
    for (std::size_t r = 0; r < va.rows(); ++r)
        for (std::size_t c = 0; c < va.cols(); ++c) out.at(r, c) *= vv.at(0, c);
    const bool rg = needs_grad(a) || needs_grad(v);
    const std::size_t self = nodes_.size(), ia = a.id, iv = v.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, iv](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& va = g.nodes_[ia].value;
            const Tensor& vv = g.nodes_[iv].value;
            if (g.nodes_[ia].requires_grad) {
                Tensor da(va.rows(), va.cols());
                for (std::size_t r = 0; r < va.rows(); ++r)
                    for (std::size_t c = 0; c < va.cols(); ++c)
                        da.at(r, c) = dc.at(r, c) * vv.at(0, c);
                g.accum(ia, da);
            }
            if (g.nodes_[iv].requires_grad) {
                Tensor dv(1, va.cols(), 0.0);
                for (std::size_t r = 0; r < va.rows(); ++r)
                    for (std::size_t c = 0; c < va.cols(); ++c)
                        dv.at(0, c) += dc.at(r, c) * va.at(r, c);
                g.accum(iv, dv);
            }
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::sigmoid(Var a) {
    Tensor out = kernels::sigmoid(value(a));
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& s = g.nodes_[self].value;
            Tensor da(s.rows(), s.cols());
            for (std::size_t i = 0; i < da.size(); ++i) da[i] = dc[i] * s[i] * (1.0 - s[i]);
            g.accum(ia, da);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::relu(Var a) {
    Tensor out = kernels::relu(value(a));
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& x = g.nodes_[ia].value;
            Tensor da(x.rows(), x.cols());
            for (std::size_t i = 0; i < da.size(); ++i) da[i] = x[i] > 0.0 ? dc[i] : 0.0;
            g.accum(ia, da);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::softmax_rows(Var a) {
    Tensor out = kernels::softmax_rows(value(a));
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& s = g.nodes_[self].value;
            Tensor da(s.rows(), s.cols());
            for (std::size_t r = 0; r < s.rows(); ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < s.cols(); ++c) dot += dc.at(r, c) * s.at(r, c);
                for (std::size_t c = 0; c < s.cols(); ++c)
                    da.at(r, c) = s.at(r, c) * (dc.at(r, c) - dot);
            }
            g.accum(ia, da);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::reshape(Var a, std::size_t rows, std::size_t cols) {
    const Tensor& va = value(a);
    if (rows * cols != va.size())
        throw DimensionError("reshape: " + va.shape_str() + " to " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    Tensor out(rows, cols, std::vector<double>(va.data(), va.data() + va.size()));
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia](Graph& g) { g.accum(ia, g.nodes_[self].grad); };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::row_sum(Var a) {
    Tensor out = kernels::row_sum(value(a));
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& x = g.nodes_[ia].value;
            Tensor da(x.rows(), x.cols());
            for (std::size_t r = 0; r < x.rows(); ++r)
                for (std::size_t c = 0; c < x.cols(); ++c) da.at(r, c) = dc.at(r, 0);
            g.accum(ia, da);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::block_row_sum(Var a, std::size_t block) {
    Tensor out = kernels::block_row_sum(value(a), block);
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, block](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& x = g.nodes_[ia].value;
            Tensor da(x.rows(), x.cols());
            for (std::size_t r = 0; r < x.rows(); ++r)
                for (std::size_t c = 0; c < x.cols(); ++c) da.at(r, c) = dc.at(r / block, c);
            g.accum(ia, da);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::block_matmul(Var a, Var b, std::size_t block) {
    Tensor out = kernels::block_matmul(value(a), value(b), block);
    const bool rg = needs_grad(a) || needs_grad(b);
    const std::size_t self = nodes_.size(), ia = a.id, ib = b.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, ib, block](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& va = g.nodes_[ia].value;
            const Tensor& vb = g.nodes_[ib].value;
            const std::size_t nblocks = va.rows() / block;
            const std::size_t n = vb.cols();
            if (g.nodes_[ia].requires_grad) {
                Tensor da(va.rows(), va.cols(), 0.0);
#pragma omp parallel for schedule(static) if (va.rows() * block * n > 65536)
                for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(nblocks); ++blk) {
                    const std::size_t r0 = blk * block;
                    for (std::size_t i = 0; i < block; ++i)
                        for (std::size_t t = 0; t < block; ++t) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < n; ++j)
                                acc += dc.at(r0 + i, j) * vb.at(r0 + t, j);
                            da.at(r0 + i, t) = acc;
                        }
                }
                g.accum(ia, da);
            }
            if (g.nodes_[ib].requires_grad) {
                Tensor db(vb.rows(), vb.cols(), 0.0);
#pragma omp parallel for schedule(static) if (vb.rows() * block * n > 65536)
                for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(nblocks); ++blk) {
                    const std::size_t r0 = blk * block;
                    for (std::size_t t = 0; t < block; ++t)
                        for (std::size_t i = 0; i < block; ++i) {
                            const double av = va.at(r0 + i, t);
                            if (av == 0.0) continue;
                            for (std::size_t j = 0; j < n; ++j)
                                db.at(r0 + t, j) += av * dc.at(r0 + i, j);
                        }
                }
                g.accum(ib, db);
            }
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::l1_normalize_rows(Var a, double eps) {
    Tensor out = kernels::l1_normalize_rows(value(a), eps);
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, eps](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& x = g.nodes_[ia].value;
            Tensor da(x.rows(), x.cols());
            for (std::size_t r = 0; r < x.rows(); ++r) {
                double s = 0.0, dot = 0.0;
                for (std::size_t c = 0; c < x.cols(); ++c) {
                    s += std::abs(x.at(r, c));
                    dot += dc.at(r, c) * x.at(r, c);
                }
                const double inv = 1.0 / (s + eps);
                for (std::size_t c = 0; c < x.cols(); ++c) {
                    const double v = x.at(r, c);
                    const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                    da.at(r, c) = dc.at(r, c) * inv - sign * dot * inv * inv;
                }
            }
            g.accum(ia, da);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::gather_rows(Var a, std::vector<std::size_t> rows) {
    const Tensor& va = value(a);
    Tensor out(rows.size(), va.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= va.rows()) throw UsageError("gather_rows: row index out of range");
        for (std::size_t c = 0; c < va.cols(); ++c) out.at(i, c) = va.at(rows[i], c);
    }
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, rows = std::move(rows)](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& x = g.nodes_[ia].value;
            Tensor da(x.rows(), x.cols(), 0.0);
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t c = 0; c < x.cols(); ++c) da.at(rows[i], c) += dc.at(i, c);
            g.accum(ia, da);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::sad_rows(Var a, Var b) {
    Tensor out = kernels::sad_rows(value(a), value(b));
    const bool rg = needs_grad(a) || needs_grad(b);
    const std::size_t self = nodes_.size(), ia = a.id, ib = b.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, ib](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& va = g.nodes_[ia].value;
            const Tensor& vb = g.nodes_[ib].value;
            const bool ga = g.nodes_[ia].requires_grad;
            const bool gb = g.nodes_[ib].requires_grad;
            Tensor da(va.rows(), va.cols(), 0.0);
            Tensor db(vb.rows(), vb.cols(), 0.0);
            for (std::size_t r = 0; r < va.rows(); ++r) {
                double dot = 0.0, na2 = 0.0, nb2 = 0.0;
                for (std::size_t c = 0; c < va.cols(); ++c) {
                    dot += va.at(r, c) * vb.at(r, c);
                    na2 += va.at(r, c) * va.at(r, c);
                    nb2 += vb.at(r, c) * vb.at(r, c);
                }
                const double na = std::sqrt(na2), nb = std::sqrt(nb2);
                const double u = std::clamp(dot / (na * nb), -1.0, 1.0);
                // clamp keeps d(acos)/du finite at collinearity
                const double ug = std::clamp(u, -1.0 + 1e-12, 1.0 - 1e-12);
                const double f = -1.0 / std::sqrt(1.0 - ug * ug) * dc.at(r, 0);
                for (std::size_t c = 0; c < va.cols(); ++c) {
                    if (ga) da.at(r, c) = f * (vb.at(r, c) / (na * nb) - u * va.at(r, c) / na2);
                    if (gb) db.at(r, c) = f * (va.at(r, c) / (na * nb) - u * vb.at(r, c) / nb2);
                }
            }
            if (ga) g.accum(ia, da);
            if (gb) g.accum(ib, db);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::l_half_rows(Var a) {
    Tensor out = kernels::l_half_rows(value(a));
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia](Graph& g) {
            const Tensor& dc = g.nodes_[self].grad;
            const Tensor& x = g.nodes_[ia].value;
            Tensor da(x.rows(), x.cols());
            for (std::size_t r = 0; r < x.rows(); ++r)
                for (std::size_t c = 0; c < x.cols(); ++c) {
                    const double v = x.at(r, c);
                    // subgradient at 0 is taken as 0
                    da.at(r, c) = v > 0.0 ? dc.at(r, 0) * 0.5 / std::sqrt(v) : 0.0;
                }
            g.accum(ia, da);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::mean_all(Var a) {
    const Tensor& va = value(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i];
    Tensor out = Tensor::scalar(acc / static_cast<double>(va.size()));
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia](Graph& g) {
            const Tensor& x = g.nodes_[ia].value;
            const double d = g.nodes_[self].grad.item() / static_cast<double>(x.size());
            g.accum(ia, Tensor(x.rows(), x.cols(), d));
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::scale(Var a, double c) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    const bool rg = needs_grad(a);
    const std::size_t self = nodes_.size(), ia = a.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ia, c](Graph& g) {
            Tensor da = g.nodes_[self].grad;
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= c;
            g.accum(ia, da);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::sad(Var a, Var b) {
    const std::size_t n = value(a).size();
    if (value(b).size() != n)
        throw DimensionError("sad: " + value(a).shape_str() + " vs " + value(b).shape_str());
    return sad_rows(reshape(a, 1, n), reshape(b, 1, n));
}

Var Graph::l_half_penalty(Var v) { return l_half_rows(reshape(v, 1, value(v).size())); }

Var Graph::batchnorm_train(Var x, Var gamma, Var beta, BnRunningStats& running, double momentum,
                           double eps) {
    const Tensor& vx = value(x);
    const Tensor& vg = value(gamma);
    const Tensor& vb = value(beta);
    const std::size_t nrows = vx.rows(), nf = vx.cols();
    if (vg.cols() != nf || vb.cols() != nf || vg.rows() != 1 || vb.rows() != 1)
        throw DimensionError("batchnorm: params 1x" + std::to_string(nf) + " expected");
    if (nrows == 0) throw DimensionError("batchnorm: empty batch");

    Tensor mu(1, nf, 0.0), var(1, nf, 0.0);
    for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t f = 0; f < nf; ++f) mu.at(0, f) += vx.at(r, f);
    for (std::size_t f = 0; f < nf; ++f) mu.at(0, f) /= static_cast<double>(nrows);
    for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t f = 0; f < nf; ++f) {
            const double d = vx.at(r, f) - mu.at(0, f);
            var.at(0, f) += d * d;
        }
    for (std::size_t f = 0; f < nf; ++f) var.at(0, f) /= static_cast<double>(nrows);

    Tensor inv_std(1, nf);
    for (std::size_t f = 0; f < nf; ++f) inv_std.at(0, f) = 1.0 / std::sqrt(var.at(0, f) + eps);

    Tensor xhat(nrows, nf);
    Tensor out(nrows, nf);
    for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t f = 0; f < nf; ++f) {
            xhat.at(r, f) = (vx.at(r, f) - mu.at(0, f)) * inv_std.at(0, f);
            out.at(r, f) = vg.at(0, f) * xhat.at(r, f) + vb.at(0, f);
        }

    // fold batch statistics into the running estimates (unbiased variance)
    const double unbias = nrows > 1 ? static_cast<double>(nrows) / (nrows - 1) : 1.0;
    for (std::size_t f = 0; f < nf; ++f) {
        running.mean.at(0, f) = momentum * running.mean.at(0, f) + (1.0 - momentum) * mu.at(0, f);
        running.var.at(0, f) =
            momentum * running.var.at(0, f) + (1.0 - momentum) * var.at(0, f) * unbias;
    }

    const bool rg = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    const std::size_t self = nodes_.size(), ix = x.id, ig = gamma.id, ibt = beta.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ix, ig, ibt, xhat, inv_std](Graph& g) {
            const Tensor& dy = g.nodes_[self].grad;
            const Tensor& vg = g.nodes_[ig].value;
            const std::size_t nrows = dy.rows(), nf = dy.cols();
            Tensor dbeta(1, nf, 0.0), dgamma(1, nf, 0.0);
            for (std::size_t r = 0; r < nrows; ++r)
                for (std::size_t f = 0; f < nf; ++f) {
                    dbeta.at(0, f) += dy.at(r, f);
                    dgamma.at(0, f) += dy.at(r, f) * xhat.at(r, f);
                }
            if (g.nodes_[ix].requires_grad) {
                Tensor dx(nrows, nf);
                const double invn = 1.0 / static_cast<double>(nrows);
                for (std::size_t r = 0; r < nrows; ++r)
                    for (std::size_t f = 0; f < nf; ++f)
                        dx.at(r, f) = vg.at(0, f) * inv_std.at(0, f) *
                                      (dy.at(r, f) - dbeta.at(0, f) * invn -
                                       xhat.at(r, f) * dgamma.at(0, f) * invn);
                g.accum(ix, dx);
            }
            g.accum(ig, dgamma);
            g.accum(ibt, dbeta);
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::batchnorm_infer(Var x, Var gamma, Var beta, const BnRunningStats& running, double eps) {
    const Tensor& vx = value(x);
    const Tensor& vg = value(gamma);
    const Tensor& vb = value(beta);
    const std::size_t nrows = vx.rows(), nf = vx.cols();
    if (vg.cols() != nf || vb.cols() != nf || running.mean.cols() != nf || running.var.cols() != nf)
        throw DimensionError("batchnorm_infer: feature width mismatch");

    Tensor inv_std(1, nf);
    for (std::size_t f = 0; f < nf; ++f)
        inv_std.at(0, f) = 1.0 / std::sqrt(running.var.at(0, f) + eps);
    const Tensor rmean = running.mean;

    Tensor out(nrows, nf);
    for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t f = 0; f < nf; ++f)
            out.at(r, f) =
                vg.at(0, f) * (vx.at(r, f) - rmean.at(0, f)) * inv_std.at(0, f) + vb.at(0, f);

    const bool rg = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    const std::size_t self = nodes_.size(), ix = x.id, ig = gamma.id, ibt = beta.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ix, ig, ibt, inv_std, rmean](Graph& g) {
            const Tensor& dy = g.nodes_[self].grad;
            const Tensor& vx = g.nodes_[ix].value;
            const Tensor& vg = g.nodes_[ig].value;
            const std::size_t nrows = dy.rows(), nf = dy.cols();
            if (g.nodes_[ix].requires_grad) {
                Tensor dx(nrows, nf);
                for (std::size_t r = 0; r < nrows; ++r)
                    for (std::size_t f = 0; f < nf; ++f)
                        dx.at(r, f) = dy.at(r, f) * vg.at(0, f) * inv_std.at(0, f);
                g.accum(ix, dx);
            }
            if (g.nodes_[ig].requires_grad || g.nodes_[ibt].requires_grad) {
                Tensor dgamma(1, nf, 0.0), dbeta(1, nf, 0.0);
                for (std::size_t r = 0; r < nrows; ++r)
                    for (std::size_t f = 0; f < nf; ++f) {
                        dgamma.at(0, f) +=
                            dy.at(r, f) * (vx.at(r, f) - rmean.at(0, f)) * inv_std.at(0, f);
                        dbeta.at(0, f) += dy.at(r, f);
                    }
                g.accum(ig, dgamma);
                g.accum(ibt, dbeta);
            }
        };
    return make(std::move(out), rg, std::move(back));
}

Var Graph::dropout(Var x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw UsageError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    if (rate == 0.0) return x;
    const Tensor& vx = value(x);
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    Tensor mask(vx.rows(), vx.cols());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng.uniform() >= rate ? scale : 0.0;
    Tensor out = vx;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    const bool rg = needs_grad(x);
    const std::size_t self = nodes_.size(), ix = x.id;
    std::function<void(Graph&)> back;
    if (rg)
        back = [self, ix, mask](Graph& g) {
            const Tensor& dy = g.nodes_[self].grad;
            Tensor dx(dy.rows(), dy.cols());
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = dy[i] * mask[i];
            g.accum(ix, dx);
        };
    return make(std::move(out), rg, std::move(back));
}

}  // namespace sawu
