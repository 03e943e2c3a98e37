#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "woc/params.h"
#include "woc/tensor.h"

namespace woc {

// Handle into a graph's node list.
struct var {
    int id = -1;
};

// One-shot reverse-mode tape. Build a fresh graph per training step: forward
// calls append nodes, backward() walks them in reverse creation order (which
// is a valid topological order because inputs always precede consumers).
class graph {
public:
    explicit graph(param_store* store = nullptr) : store_(store) {}

    // Leaf holding a constant; receives a gradient but propagates nowhere.
    var input(tensor v);
    // Leaf bound to a named store param (value copied in; gradient flows back
    // into the store on backward unless the param is frozen). Repeated lookups
    // of the same name return the same node.
    var param(const std::string& name);

    const tensor& val(var v) const { return nodes_[check_id(v)].value; }
    // Gradient of a node after backward(); zero-filled if untouched.
    const tensor& grad(var v);
    // Mutable gradient accumulator, allocated on first use. For backprop closures.
    tensor& grad_acc(var v);
    bool grad_present(var v) const;

    // Custom node: caller supplies the forward value and a closure that adds
    // this node's contribution to its inputs' gradients. When the closure
    // needs the node's own handle, create with an empty closure and attach it
    // with set_backprop.
    var make(tensor value, std::function<void(graph&)> backprop);
    void set_backprop(var v, std::function<void(graph&)> backprop);

    // y = x·Wᵀ + b with x:[n,d_in], W:[d_out,d_in], b:[d_out].
    var linear(var x, var W, var b);
    // y = x·Wᵀ (no bias).
    var matmul_nt(var x, var W);
    // Scatter-accumulate: out[t,:] += weights[p,b]·features[p,:] for every
    // (p,b) whose target t = target[p*B+b] is ≥ 0; negative targets are
    // discarded. features:[P,C], weights:[P,B], out:[n_rows,C].
    var splat_rows(var features, var weights,
                   std::shared_ptr<const std::vector<int32_t>> target, int64_t n_rows);
    var sigmoid(var x);
    var relu(var x);
    var softmax_rows(var x); // over the last axis
    var add(var a, var b);   // same shape
    var mul(var a, var b);   // elementwise, same shape
    var scale(var a, double s);
    var sum(var x); // scalar
    var concat_cols(var a, var b); // [n,p] ++ [n,q] -> [n,p+q]

    // Seeds d(loss)/d(loss)=1 and accumulates into every reachable leaf;
    // trainable store params receive their grads, frozen ones stay zero.
    void backward(var loss);

    param_store* store() { return store_; }
    int size() const { return static_cast<int>(nodes_.size()); }

private:
    struct node {
        tensor value;
        tensor grad;
        bool grad_alloc = false;
        std::function<void(graph&)> backprop;
    };

    int check_id(var v) const;

    param_store* store_ = nullptr;
    std::vector<node> nodes_;
    std::unordered_map<int, int> param_node_; // store index -> node id
};

} // namespace woc
