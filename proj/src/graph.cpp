#include "woc/graph.h"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "woc/common.h"

namespace woc {

param& param_store::add(const std::string& name, tensor init, bool trainable) {
    if (has(name)) throw std::invalid_argument(str("param_store: duplicate param '", name, "'"));
    param p;
    p.name = name;
    p.grad = tensor(init.shape);
    p.m = tensor(init.shape);
    p.v = tensor(init.shape);
    p.value = std::move(init);
    p.trainable = trainable;
    by_name[name] = static_cast<int>(items.size());
    items.push_back(std::move(p));
    return items.back();
}

int param_store::index_of(const std::string& name) const {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::invalid_argument(str("param_store: unknown param '", name, "'"));
    return it->second;
}

void param_store::zero_grad() {
    for (param& p : items) p.grad.fill(0.0);
}

int64_t param_store::value_count() const {
    int64_t n = 0;
    for (const param& p : items) n += p.value.numel();
    return n;
}

int graph::check_id(var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument(str("graph: invalid var id ", v.id));
    return v.id;
}

var graph::input(tensor v) { return make(std::move(v), {}); }

var graph::param(const std::string& name) {
    if (!store_) throw std::runtime_error("graph: no param_store attached");
    const int idx = store_->index_of(name);
    auto it = param_node_.find(idx);
    if (it != param_node_.end()) return var{it->second};
    woc::param& p = store_->items[idx];
    var out = make(p.value, {});
    nodes_[out.id].backprop = [idx, out](graph& g) {
        woc::param& pp = g.store_->items[idx];
        if (!pp.trainable) return;
        const tensor& gy = g.nodes_[out.id].grad;
        for (int64_t i = 0; i < gy.numel(); ++i) pp.grad.data[i] += gy.data[i];
    };
    param_node_[idx] = out.id;
    return out;
}

const tensor& graph::grad(var v) {
    node& n = nodes_[check_id(v)];
    if (!n.grad_alloc) {
        n.grad = tensor(n.value.shape);
        n.grad_alloc = true;
    }
    return n.grad;
}

tensor& graph::grad_acc(var v) {
    node& n = nodes_[check_id(v)];
    if (!n.grad_alloc) {
        n.grad = tensor(n.value.shape);
        n.grad_alloc = true;
    }
    return n.grad;
}

bool graph::grad_present(var v) const { return nodes_[check_id(v)].grad_alloc; }

var graph::make(tensor value, std::function<void(graph&)> backprop) {
    nodes_.push_back(node{std::move(value), {}, false, std::move(backprop)});
    return var{static_cast<int>(nodes_.size()) - 1};
}

void graph::set_backprop(var v, std::function<void(graph&)> backprop) {
    nodes_[check_id(v)].backprop = std::move(backprop);
}

var graph::linear(var x, var W, var b) {
    const tensor& xv = val(x);
    const tensor& wv = val(W);
    const tensor& bv = val(b);
    if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1)
        throw std::invalid_argument(
            str("linear: want x[n,d_in], W[d_out,d_in], b[d_out]; got ", xv.shape_str(), ", ",
                wv.shape_str(), ", ", bv.shape_str()));
    if (xv.shape[1] != wv.shape[1] || wv.shape[0] != bv.shape[0])
        throw std::invalid_argument(
            str("linear: dimension mismatch: x", xv.shape_str(), " vs W", wv.shape_str(), " vs b",
                bv.shape_str()));
    const int64_t n = xv.shape[0], din = xv.shape[1], dout = wv.shape[0];
    tensor y({n, dout});
    kern::matmul_nt(xv.ptr(), wv.ptr(), y.ptr(), n, din, dout, false);
    for (int64_t i = 0; i < n; ++i) {
        double* yi = y.ptr() + i * dout;
        for (int64_t j = 0; j < dout; ++j) yi[j] += bv.data[j];
    }
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [x, W, b, out, n, din, dout](graph& g) {
        const tensor& gy = g.grad_acc(out);
        const tensor& xv = g.val(x);
        const tensor& wv = g.val(W);
        // dx = gy · W
        kern::matmul_nn(gy.ptr(), wv.ptr(), g.grad_acc(x).ptr(), n, dout, din, true);
        // dW = gyᵀ · x
        kern::matmul_tn(gy.ptr(), xv.ptr(), g.grad_acc(W).ptr(), n, dout, din, true);
        // db = column sums of gy
        tensor& gb = g.grad_acc(b);
        for (int64_t i = 0; i < n; ++i) {
            const double* gyi = gy.ptr() + i * dout;
            for (int64_t j = 0; j < dout; ++j) gb.data[j] += gyi[j];
        }
    };
    return out;
}

var graph::matmul_nt(var x, var W) {
    const tensor& xv = val(x);
    const tensor& wv = val(W);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.shape[1] != wv.shape[1])
        throw std::invalid_argument(str("matmul_nt: want x[n,d_in], W[d_out,d_in]; got ",
                                        xv.shape_str(), ", ", wv.shape_str()));
    const int64_t n = xv.shape[0], din = xv.shape[1], dout = wv.shape[0];
    tensor y({n, dout});
    kern::matmul_nt(xv.ptr(), wv.ptr(), y.ptr(), n, din, dout, false);
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [x, W, out, n, din, dout](graph& g) {
        const tensor& gy = g.grad_acc(out);
        kern::matmul_nn(gy.ptr(), g.val(W).ptr(), g.grad_acc(x).ptr(), n, dout, din, true);
        kern::matmul_tn(gy.ptr(), g.val(x).ptr(), g.grad_acc(W).ptr(), n, dout, din, true);
    };
    return out;
}

var graph::splat_rows(var features, var weights,
                      std::shared_ptr<const std::vector<int32_t>> target, int64_t n_rows) {
    const tensor& fv = val(features);
    const tensor& wv = val(weights);
    if (fv.rank() != 2 || wv.rank() != 2 || fv.shape[0] != wv.shape[0])
        throw std::invalid_argument(str("splat_rows: want features[P,C] and weights[P,B], got ",
                                        fv.shape_str(), " and ", wv.shape_str()));
    const int64_t pc = fv.shape[0], c = fv.shape[1], bc = wv.shape[1];
    if (!target || static_cast<int64_t>(target->size()) != pc * bc)
        throw std::invalid_argument(str("splat_rows: target table has ",
                                        target ? target->size() : size_t{0}, " entries, want ",
                                        pc * bc));
    if (n_rows <= 0) throw std::invalid_argument("splat_rows: n_rows must be positive");
    for (const int32_t t : *target)
        if (t >= n_rows)
            throw std::invalid_argument(
                str("splat_rows: target row ", t, " out of range [0,", n_rows, ")"));
    tensor y({n_rows, c});
    const int32_t* tgt = target->data();
    for (int64_t p = 0; p < pc; ++p) {
        const double* fp = fv.ptr() + p * c;
        const double* wp = wv.ptr() + p * bc;
        for (int64_t b = 0; b < bc; ++b) {
            const int32_t t = tgt[p * bc + b];
            if (t < 0) continue;
            double* yr = y.ptr() + static_cast<int64_t>(t) * c;
            const double w = wp[b];
            for (int64_t i = 0; i < c; ++i) yr[i] += w * fp[i];
        }
    }
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [features, weights, out, target, pc, c, bc](graph& g) {
        const tensor& gy = g.grad_acc(out);
        const tensor& fv = g.val(features);
        const tensor& wv = g.val(weights);
        tensor& gf = g.grad_acc(features);
        tensor& gw = g.grad_acc(weights);
        const int32_t* tgt = target->data();
        for (int64_t p = 0; p < pc; ++p) {
            const double* fp = fv.ptr() + p * c;
            const double* wp = wv.ptr() + p * bc;
            double* gfp = gf.ptr() + p * c;
            double* gwp = gw.ptr() + p * bc;
            for (int64_t b = 0; b < bc; ++b) {
                const int32_t t = tgt[p * bc + b];
                if (t < 0) continue;
                const double* gyr = gy.ptr() + static_cast<int64_t>(t) * c;
                const double w = wp[b];
                double dot = 0.0;
                for (int64_t i = 0; i < c; ++i) {
                    gfp[i] += w * gyr[i];
                    dot += gyr[i] * fp[i];
                }
                gwp[b] += dot;
            }
        }
    };
    return out;
}

var graph::sigmoid(var x) {
    const tensor& xv = val(x);
    tensor y(xv.shape);
    const int64_t n = xv.numel();
    // 1/(1+exp(-x)) without overflow on large |x|: exp of a non-positive number only.
    for (int64_t i = 0; i < n; ++i) {
        const double v = xv.data[i];
        if (v >= 0.0) {
            const double e = std::exp(-v);
            y.data[i] = 1.0 / (1.0 + e);
        } else {
            const double e = std::exp(v);
            y.data[i] = e / (1.0 + e);
        }
    }
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [x, out](graph& g) {
        const tensor& yv = g.val(out);
        const tensor& gy = g.grad_acc(out);
        tensor& gx = g.grad_acc(x);
        for (int64_t i = 0; i < yv.numel(); ++i)
            gx.data[i] += gy.data[i] * yv.data[i] * (1.0 - yv.data[i]);
    };
    return out;
}

var graph::relu(var x) {
    const tensor& xv = val(x);
    tensor y(xv.shape);
    for (int64_t i = 0; i < xv.numel(); ++i) y.data[i] = xv.data[i] > 0.0 ? xv.data[i] : 0.0;
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [x, out](graph& g) {
        const tensor& xv = g.val(x);
        const tensor& gy = g.grad_acc(out);
        tensor& gx = g.grad_acc(x);
        for (int64_t i = 0; i < xv.numel(); ++i)
            if (xv.data[i] > 0.0) gx.data[i] += gy.data[i];
    };
    return out;
}

var graph::softmax_rows(var x) {
    const tensor& xv = val(x);
    if (xv.rank() < 1) throw std::invalid_argument("softmax_rows: rank-0 input");
    tensor y = xv;
    const int64_t w = xv.shape.back();
    const int64_t rows = xv.numel() / w;
    kern::softmax_rows_inplace(y.ptr(), rows, w);
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [x, out, rows, w](graph& g) {
        const tensor& yv = g.val(out);
        const tensor& gy = g.grad_acc(out);
        tensor& gx = g.grad_acc(x);
        for (int64_t i = 0; i < rows; ++i) {
            const double* yi = yv.ptr() + i * w;
            const double* gi = gy.ptr() + i * w;
            double dot = 0.0;
            for (int64_t j = 0; j < w; ++j) dot += gi[j] * yi[j];
            double* go = gx.ptr() + i * w;
            for (int64_t j = 0; j < w; ++j) go[j] += (gi[j] - dot) * yi[j];
        }
    };
    return out;
}

var graph::add(var a, var b) {
    const tensor& av = val(a);
    const tensor& bv = val(b);
    if (!av.same_shape(bv))
        throw std::invalid_argument(str("add: shape mismatch ", av.shape_str(), " vs ", bv.shape_str()));
    tensor y = av;
    for (int64_t i = 0; i < y.numel(); ++i) y.data[i] += bv.data[i];
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [a, b, out](graph& g) {
        const tensor& gy = g.grad_acc(out);
        tensor& ga = g.grad_acc(a);
        tensor& gb = g.grad_acc(b);
        for (int64_t i = 0; i < gy.numel(); ++i) {
            ga.data[i] += gy.data[i];
            gb.data[i] += gy.data[i];
        }
    };
    return out;
}

var graph::mul(var a, var b) {
    const tensor& av = val(a);
    const tensor& bv = val(b);
    if (!av.same_shape(bv))
        throw std::invalid_argument(str("mul: shape mismatch ", av.shape_str(), " vs ", bv.shape_str()));
    tensor y = av;
    for (int64_t i = 0; i < y.numel(); ++i) y.data[i] *= bv.data[i];
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [a, b, out](graph& g) {
        const tensor& gy = g.grad_acc(out);
        const tensor& av = g.val(a);
        const tensor& bv = g.val(b);
        tensor& ga = g.grad_acc(a);
        tensor& gb = g.grad_acc(b);
        for (int64_t i = 0; i < gy.numel(); ++i) {
            ga.data[i] += gy.data[i] * bv.data[i];
            gb.data[i] += gy.data[i] * av.data[i];
        }
    };
    return out;
}

var graph::scale(var a, double s) {
    tensor y = val(a);
    for (double& v : y.data) v *= s;
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [a, out, s](graph& g) {
        const tensor& gy = g.grad_acc(out);
        tensor& ga = g.grad_acc(a);
        for (int64_t i = 0; i < gy.numel(); ++i) ga.data[i] += s * gy.data[i];
    };
    return out;
}

var graph::sum(var x) {
    const tensor& xv = val(x);
    double s = 0.0;
    for (double v : xv.data) s += v;
    var out = make(tensor::scalar(s), {});
    nodes_[out.id].backprop = [x, out](graph& g) {
        const double gy = g.grad_acc(out).data[0];
        tensor& gx = g.grad_acc(x);
        for (int64_t i = 0; i < gx.numel(); ++i) gx.data[i] += gy;
    };
    return out;
}

var graph::concat_cols(var a, var b) {
    const tensor& av = val(a);
    const tensor& bv = val(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.shape[0] != bv.shape[0])
        throw std::invalid_argument(
            str("concat_cols: want [n,p] and [n,q], got ", av.shape_str(), " and ", bv.shape_str()));
    const int64_t n = av.shape[0], p = av.shape[1], q = bv.shape[1];
    tensor y({n, p + q});
    for (int64_t i = 0; i < n; ++i) {
        std::memcpy(y.ptr() + i * (p + q), av.ptr() + i * p, p * sizeof(double));
        std::memcpy(y.ptr() + i * (p + q) + p, bv.ptr() + i * q, q * sizeof(double));
    }
    var out = make(std::move(y), {});
    nodes_[out.id].backprop = [a, b, out, n, p, q](graph& g) {
        const tensor& gy = g.grad_acc(out);
        tensor& ga = g.grad_acc(a);
        tensor& gb = g.grad_acc(b);
        for (int64_t i = 0; i < n; ++i) {
            const double* gi = gy.ptr() + i * (p + q);
            double* gai = ga.ptr() + i * p;
            double* gbi = gb.ptr() + i * q;
            for (int64_t j = 0; j < p; ++j) gai[j] += gi[j];
            for (int64_t j = 0; j < q; ++j) gbi[j] += gi[p + j];
        }
    };
    return out;
}

void graph::backward(var loss) {
    const tensor& lv = val(loss);
    if (lv.numel() != 1)
        throw std::invalid_argument(str("backward: loss must be a scalar, got shape ", lv.shape_str()));
    grad_acc(loss).data[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        node& n = nodes_[id];
        if (n.grad_alloc && n.backprop) n.backprop(*this);
    }
}

} // namespace woc
