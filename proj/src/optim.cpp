#include "woc/optim.h"

#include <cmath>
#include <stdexcept>

#include "woc/common.h"

namespace woc {

void adamw::step(param_store& store) {
    step_count += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (param& p : store.items) {
        if (!p.trainable) continue;
        for (int64_t i = 0; i < p.value.numel(); ++i) {
            const double g = p.grad.data[i];
            p.m.data[i] = beta1 * p.m.data[i] + (1.0 - beta1) * g;
            p.v.data[i] = beta2 * p.v.data[i] + (1.0 - beta2) * g * g;
            const double mhat = p.m.data[i] / bc1;
            const double vhat = p.v.data[i] / bc2;
            p.value.data[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.value.data[i]);
        }
    }
}

std::vector<tensor> finite_diff_grad(param_store& store, const std::function<double()>& f, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be positive");
    std::vector<tensor> grads;
    grads.reserve(store.items.size());
    for (param& p : store.items) {
        tensor g(p.value.shape);
        if (p.trainable) {
            for (int64_t i = 0; i < p.value.numel(); ++i) {
                const double saved = p.value.data[i];
                p.value.data[i] = saved + h;
                const double fp = f();
                p.value.data[i] = saved - h;
                const double fm = f();
                p.value.data[i] = saved;
                g.data[i] = (fp - fm) / (2.0 * h);
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

double grad_rel_err(const tensor& analytic, const tensor& numeric) {
    if (!analytic.same_shape(numeric))
        throw std::invalid_argument(str("grad_rel_err: shape mismatch ", analytic.shape_str(), " vs ",
                                        numeric.shape_str()));
    double diff = 0.0;
    for (int64_t i = 0; i < analytic.numel(); ++i)
        diff = std::max(diff, std::fabs(analytic.data[i] - numeric.data[i]));
    const double scale = std::max({1.0, analytic.max_abs(), numeric.max_abs()});
    return diff / scale;
}

} // namespace woc
