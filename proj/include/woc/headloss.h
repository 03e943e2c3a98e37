#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "woc/graph.h"
#include "woc/grid.h"
#include "woc/tensor.h"

namespace woc {

// One supervised voxel row: `row` indexes a [R, num_classes] logit/prob
// matrix, `weight` counts how many grid voxels the row stands for (compact
// batches collapse interchangeable background voxels into one shared row;
// dense batches use weight 1 everywhere). Ignored voxels never become entries.
struct loss_entry {
    int32_t row;
    uint8_t label;
    double weight;
};

// Dense [K, nx, ny, nz] volume + labels -> one weight-1 entry per voxel with
// label != 255. Throws when a label is outside 0..K-1.
std::vector<loss_entry> entries_from_labels(const std::vector<uint8_t>& labels, int num_classes);

// Two independent binary heads over pooled 2D features: visibility (rainy)
// and illumination (night). Flags are predicted by logit > 0.
struct weather_heads {
    tensor w_rainy; // [1, C_img]
    tensor b_rainy; // [1]
    tensor w_night; // [1, C_img]
    tensor b_night; // [1]
};

struct weather_logit_vars {
    var rainy, night; // each [1,1]
};
weather_logit_vars weather_logits_node(graph& g, var f_2d, var w_rainy, var b_rainy, var w_night,
                                       var b_night);
std::pair<double, double> weather_logits(const tensor& f_2d, const weather_heads& heads);
inline bool predict_flag(double logit) { return logit > 0.0; }

// Per-voxel occupancy head: shared two-layer perceptron C -> C (sigmoid) ->
// num_classes logits.
var occ_head_node(graph& g, var fused_rows, var w1, var b1, var w2, var b2);

// Weighted-mean negative log softmax probability of the true label:
// sum_e w_e · (-ln p[row_e, label_e]) / sum_e w_e. `probs` must be a softmax
// output. Empty entry set yields 0.
var cross_entropy_node(graph& g, var probs, std::shared_ptr<const std::vector<loss_entry>> entries);

// Lovász-Softmax: per class c present in the ground truth, errors
// m_e = 1 - p_e(c) on gt rows and p_e(c) elsewhere are sorted descending and
// folded against the Jaccard-loss extension gradient; result is the mean over
// present classes. Weights act as duplicated voxels (closed-form telescoped
// blocks). The sort order is treated as fixed for the backward pass.
var lovasz_softmax_node(graph& g, var probs,
                        std::shared_ptr<const std::vector<loss_entry>> entries);

// Numerically stable binary cross-entropy from a logit; target must be 0 or 1.
var bce_node(graph& g, var logit, double target);
double bce(double logit, double target);

// Dense front-ends over [K, nx, ny, nz] volumes; voxels labeled 255 are
// excluded. The optional flag reports the degenerate no-supervision case
// (loss defined as 0).
double cross_entropy(const tensor& logits, const label_grid& labels, bool* all_ignored = nullptr);
double lovasz_softmax(const tensor& probs, const label_grid& labels, bool* no_present = nullptr);

// Multi-task objective: L_total = λ_occ·(L_ce + L_lovasz) + λ_weather·(bce_rainy + bce_night).
struct loss_weights {
    double lambda_occ = 1.0;
    double lambda_weather = 0.1;
};

struct loss_vars {
    var ce, lovasz, occ, weather, total;
};

loss_vars total_loss_node(graph& g, var occ_logits_rows,
                          std::shared_ptr<const std::vector<loss_entry>> entries, var rainy_logit,
                          var night_logit, bool rainy_gt, bool night_gt, const loss_weights& lw);

struct loss_breakdown {
    double ce = 0.0;
    double lovasz = 0.0;
    double occ = 0.0;
    double weather = 0.0;
    double total = 0.0;
};

loss_breakdown read_breakdown(const graph& g, const loss_vars& v);

} // namespace woc
