#pragma once

#include <functional>
#include <vector>

#include "blindrestore/codec.hpp"
#include "blindrestore/tensor.hpp"

namespace blindrestore::grad {

using Var = int;

// Reverse-mode tape for the small guidance and operator-fitting graphs. A
// tape is built per evaluation and dropped after backward; nodes are appended
// in topological order (parents always precede children), which rules out
// cycles by construction. ReLU uses subgradient 0 at the kink; sum_abs uses
// sign with sign(0) = 0.
class Tape {
public:
    Var leaf(Tensor value);
    const Tensor& val(Var v) const { return nodes_[v].value; }
    int size() const { return (int)nodes_.size(); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);          // elementwise
    Var scale(Var a, double c);
    Var relu(Var a);
    Var reshape(Var a, Shape shape);  // same numel, identity backward
    Var slice(Var a, int64_t offset, Shape shape);
    Var conv2d(Var x, Var k);       // reflect padding, rank-2 kernel over last two dims
    Var conv_block(Var x, Var w, Var b);  // x[C,H,W], w[OC,C,kh,kw], b[OC] -> [OC,H,W]
    Var avg_pool2(Var x);
    Var upsample_nearest2(Var x);
    Var concat_channels(Var a, Var b);
    Var decode(Var z, const Codec& codec);
    Var sum_squares(Var a);         // scalar
    Var sum_abs(Var a);             // scalar
    // sum over interior pixels of squared forward-difference mismatch against
    // a fixed reference; the demo guidance regularizer
    Var grad_diff_penalty(Var a, Tensor reference);

    // reverse accumulation from a scalar loss; returns one gradient per wrt
    // entry (zero tensor when the loss does not depend on it)
    std::vector<Tensor> grad(Var loss, const std::vector<Var>& wrt);

    // true while backward runs for nodes on a path to a requested leaf;
    // closures use it to skip gradient blocks nobody asked for
    bool needs(Var v) const { return needed_.empty() || needed_[v]; }

private:
    struct Node {
        Tensor value;
        std::vector<Var> parents;
        // accumulates into the parent gradient slots
        std::function<void(const Tensor& gout, std::vector<Tensor>& grads)> back;
    };
    Var push(Tensor value, std::vector<Var> parents,
             std::function<void(const Tensor&, std::vector<Tensor>&)> back);
    Tensor& grad_slot(std::vector<Tensor>& grads, Var v);
    std::vector<Node> nodes_;
    std::vector<char> needed_;
};

struct AdamConfig {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Tensor m, v;
    int64_t step = 0;
    AdamConfig cfg;

    explicit AdamState(const Shape& param_shape, AdamConfig cfg = {})
        : m(param_shape), v(param_shape), cfg(cfg) {}
};

// standard bias-corrected update, elementwise:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(AdamState& st, Tensor& params, const Tensor& g);

}  // namespace blindrestore::grad
