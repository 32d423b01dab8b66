#pragma once

#include <functional>
#include <vector>

#include "davsn/tensor.h"

namespace davsn::ad {

class Graph;

// Handle into a Graph. Cheap to copy; valid for the graph's lifetime.
struct Var {
    Graph* g = nullptr;
    int id = -1;

    bool valid() const { return g != nullptr && id >= 0; }
    const Tensor& val() const;
    double scalar() const;
};

// Reverse-mode tape over Tensors. Nodes are appended in topological order;
// backward() walks them in reverse. Ops whose inputs all have
// requires_grad=false are recorded value-only, so inference forwards cost no
// closures or gradient buffers.
class Graph {
public:
    Var leaf(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return leaf(std::move(value), false); }
    Var constant(double x) { return leaf(Tensor::scalar(x), false); }

    // Re-enters an existing value as a gradient-stopping leaf.
    Var detach(Var x) { return leaf(x.val(), false); }

    const Tensor& value(Var x) const { return nodes_[static_cast<size_t>(x.id)].value; }
    bool requires_grad(Var x) const { return nodes_[static_cast<size_t>(x.id)].requires_grad; }

    // Gradient of the last backward() target w.r.t. x; zeros if x was not
    // reached.
    Tensor grad(Var x) const;

    void zero_grads();
    // Seeds d(out)/d(out)=1 and accumulates into every reachable node. out
    // must be a scalar (size-1) node.
    void backward(Var out);

    size_t num_nodes() const { return nodes_.size(); }

private:
    friend struct Var;
    friend class OpBuilder;

    struct Node {
        Tensor value;
        Tensor grad;            // allocated lazily during backward
        bool requires_grad = false;
        bool grad_live = false; // grad holds accumulated content
        std::function<void(Graph&)> back;
    };

    Tensor& grad_acc(int id);   // ensure-allocated gradient accumulator
    bool grad_live(int id) const { return nodes_[static_cast<size_t>(id)].grad_live; }

    std::vector<Node> nodes_;

    // Op implementations live in autodiff.cpp and need node access.
    friend Var make_op(Graph& g, Tensor value, bool rg, std::function<void(Graph&)> back);
    friend const Tensor& node_val(const Graph& g, int id);
    friend Tensor& node_grad(Graph& g, int id);
    friend bool node_grad_live(const Graph& g, int id);
};

// ---- tensor ops ----

// x: [Cin,H,W], w: [Cout,Cin,KH,KW], b: [Cout] (may be invalid Var for none).
Var conv2d(Var x, Var w, Var b, int stride, int pad);
Var leaky_relu(Var x, double slope);
Var upsample_nearest2(Var x);                 // [C,H,W] -> [C,2H,2W]
Var concat_channels(Var a, Var b);            // [Ca,H,W]+[Cb,H,W] -> [Ca+Cb,H,W]
Var add(Var a, Var b);                        // same shape
Var scale(Var x, double c);
Var softmax_channels(Var x);                  // per-pixel softmax over dim 0

// Backward-warp x by `flow` ([2,H,W], (dx,dy)); out-of-bounds pixels get
// `fill` and, when mask != nullptr, mask=0 there. Differentiable in x only.
Var warp_bilinear(Var x, const Tensor& flow, double fill, ByteMask* mask);

// ---- scalar-producing ops ----

// -mean_px log p[label]; p holds per-pixel probabilities [C,H,W].
Var nll_mean(Var p, const LabelMap& labels);
// Masked mean over valid pixels of gate * sum_c |p - target|; gradient flows
// into p only. n_valid = number of 1s in `valid`; gate already restricted.
Var gated_l1_mean(Var p, const Tensor& target, const ByteMask& gate, int64_t n_valid);
Var global_avg_pool_scalar(Var x);            // [1,H,W] -> scalar
Var mean_all(Var x);                          // mean over all entries
Var sum_sq(Var x);                            // sum of squares -> scalar
Var dot_flat(Var a, Var b);                   // row-major dot -> scalar

// scalar arithmetic (operands are size-1 tensors)
Var s_add(Var a, Var b);
Var s_sub(Var a, Var b);
Var s_mul(Var a, Var b);
Var s_div(Var a, Var b);
Var s_log(Var a);
Var s_sqrt(Var a);
Var s_sigmoid(Var a);
// clamp with zero gradient outside [lo,hi]
Var s_clamp(Var a, double lo, double hi);

// mean over entries of log(clamp(sigmoid(s), eps, 1-eps)) and of
// log(clamp(1 - sigmoid(s), eps, 1-eps)); used by patch-score discriminators.
Var logsig_mean(Var s, double eps);
Var log1msig_mean(Var s, double eps);

} // namespace davsn::ad
