#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "sawu/rng.hpp"
#include "sawu/tensor.hpp"

namespace sawu {

// Handle to a node in a Graph tape.
struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
};

// Running batch-norm statistics, owned by the model (not a graph leaf).
struct BnRunningStats {
    Tensor mean;  // 1 x features
    Tensor var;   // 1 x features
};

// Define-by-run reverse-mode tape. Values are computed eagerly as ops are
// recorded; backward() replays the tape in reverse insertion order. One
// graph per training batch; cheap to build and throw away.
class Graph {
public:
    Var leaf(Tensor value, bool requires_grad = false);

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var add_rowvec(Var a, Var v);
    Var mul_rowvec(Var a, Var v);
    Var sigmoid(Var a);
    Var relu(Var a);
    Var softmax_rows(Var a);
    Var reshape(Var a, std::size_t rows, std::size_t cols);
    Var row_sum(Var a);
    Var block_row_sum(Var a, std::size_t block);
    Var block_matmul(Var a, Var b, std::size_t block);
    Var l1_normalize_rows(Var a, double eps);
    Var gather_rows(Var a, std::vector<std::size_t> rows);
    Var sad_rows(Var a, Var b);
    Var l_half_rows(Var a);
    Var mean_all(Var a);
    Var scale(Var a, double c);

    // Spectral angle between two vectors of any matching shape.
    Var sad(Var a, Var b);
    // Sum of square roots of a nonnegative vector.
    Var l_half_penalty(Var v);

    // Batch norm over rows, training mode: normalizes with batch statistics
    // and folds them into `running` (momentum * old + (1-momentum) * batch).
    Var batchnorm_train(Var x, Var gamma, Var beta, BnRunningStats& running, double momentum,
                        double eps);
    // Inference mode: affine transform from the running statistics.
    Var batchnorm_infer(Var x, Var gamma, Var beta, const BnRunningStats& running, double eps);

    // Inverted-scaling dropout; train-time only. rate == 0 is the identity.
    Var dropout(Var x, double rate, Rng& rng);

    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    const Tensor& grad(Var v) const;
    std::size_t size() const { return nodes_.size(); }

    // When set, every op output is checked for NaN/Inf (slow; test use).
    void set_check_finite(bool on) { check_finite_ = on; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Graph&)> back;
    };

    std::vector<Node> nodes_;
    bool check_finite_ = false;

    Var make(Tensor value, bool requires_grad, std::function<void(Graph&)> back);
    void accum(std::size_t id, const Tensor& g);
    bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }
    const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }

    friend struct GraphOpsAccess;
};

}  // namespace sawu
