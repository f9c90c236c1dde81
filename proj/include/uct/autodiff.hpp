#pragma once
// autodiff.hpp - reverse-mode automatic differentiation over Tensor
//
// The graph is held by shared_ptr parents; backward() topologically sorts the
// reachable subgraph and runs each node's pull-back. Nodes whose subtree
// contains no trainable leaf are skipped entirely (needs_grad flag), which is
// how frozen networks stay frozen while still passing gradients through their
// activations.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "uct/tensor.hpp"

namespace uct::ad {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily by backward()
    bool is_leaf = false;
    bool trainable = false;   // leaf flag: participate in optimization
    bool needs_grad = false;  // propagated: any trainable leaf below
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;
    std::string name;

    double scalar_value() const {
        if (value.numel() != 1) throw ShapeError("scalar_value on non-scalar node");
        return value.data[0];
    }
};

Var constant(Tensor t, std::string name = "");
Var leaf(Tensor t, std::string name = "");  // trainable leaf

// Runs reverse-mode accumulation from a scalar root. Grads of reachable
// needs_grad nodes are overwritten (not accumulated across calls).
void backward(const Var& root);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var neg(const Var& a);
Var tanh_op(const Var& a);
Var sigmoid_op(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var abs_op(const Var& a);
Var square(const Var& a);
Var log_op(const Var& a);
Var pow_scalar(const Var& a, double p);  // requires value > 0 elementwise
Var clamp(const Var& a, double lo, double hi);

// ---- reductions ----
Var sum(const Var& a);
Var mean(const Var& a);

// ---- shape / gather ----
Var select_items(const Var& a, const std::vector<int>& idx);  // gather along dim 0
Var reshape(const Var& a, std::vector<int> new_shape);

// ---- neural net primitives ----
// x: [N,Cin,H,W], w: [Cout,Cin,k,k], b: [Cout]
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample2x(const Var& x);                 // nearest neighbour
Var instance_norm(const Var& x, double eps);  // standardize over H,W per (n,c)
Var gram(const Var& x);                       // [N,C,H,W] -> [N,C,C], scaled by 1/(C*H*W)
Var global_avg_pool(const Var& x);            // [N,C,H,W] -> [N,C]
Var linear(const Var& x, const Var& w, const Var& b);  // x:[N,C], w:[Out,C], b:[Out]

// ---- composites ----
Var mse(const Var& a, const Var& b);      // mean squared elementwise difference
Var l1_mean(const Var& a, const Var& b);  // mean absolute elementwise difference

}  // namespace uct::ad
