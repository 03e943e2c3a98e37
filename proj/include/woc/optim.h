#pragma once

#include <functional>
#include <vector>

#include "woc/params.h"

namespace woc {

// AdamW: bias-corrected adaptive moments with weight decay applied directly
// to the value (decoupled), trainable params only.
struct adamw {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int64_t step_count = 0;

    void step(param_store& store);
};

// Central-difference gradient oracle: perturbs every coordinate of every
// trainable param by ±h and re-evaluates f. Returns one tensor per store item
// (zeros for frozen params), in registration order.
std::vector<tensor> finite_diff_grad(param_store& store, const std::function<double()>& f,
                                     double h = 1e-6);

// max_i |a_i - f_i| / max(1, max|a|, max|f|) — scale-aware comparison used by
// every gradient check in the test suite.
double grad_rel_err(const tensor& analytic, const tensor& numeric);

} // namespace woc
