#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "woc/metrics.h"
#include "woc/model.h"
#include "woc/optim.h"

namespace woc {

// ---- Datasets ---------------------------------------------------------------

// Scene-pack directory loaded and preprocessed against a model's geometry.
// Records are dropped after encoding; contexts carry everything training and
// evaluation need.
struct dataset {
    grid_spec spec;
    std::vector<scene_ctx> scenes;
};

dataset load_dataset(const occ_model& m, const std::string& dir);

// ---- Training ----------------------------------------------------------------

struct train_cfg {
    int epochs = 30;
    adamw opt;        // lr 2e-4, decoupled weight decay
    uint64_t seed = 1; // per-epoch shuffle stream

    void validate() const;
};

struct epoch_stats {
    int epoch = 0;
    double total = 0, ce = 0, lovasz = 0, occ = 0, weather = 0;
    double weather_acc = 0; // teacher-forced heads, train scenes, both flags
    double seconds = 0;
};

struct train_result {
    std::vector<epoch_stats> epochs;
    int64_t steps = 0;
};

// Batch-size-1 training with ground-truth prompt selection (teacher forcing).
// Emits one tab-separated stats line per epoch on `log`. Fixed seed and
// single-threaded execution make the resulting params bit-reproducible.
// Throws on an empty dataset or the first non-finite loss (naming the step).
train_result train(occ_model& m, const dataset& data, const train_cfg& cfg, std::ostream& log);

// ---- Evaluation --------------------------------------------------------------

struct eval_cfg {
    bool gt_prompts = false; // force ground-truth flags for prompt selection
    // Worker threads for the per-scene forward passes. Scene results are
    // folded in scene order afterwards, so any thread count produces the
    // same report bytes.
    int threads = 1;
};

struct eval_scene_outcome {
    weather_flags gt;
    bool pred_rainy = false, pred_night = false;
    double w_env = 0; // NaN under baseline strategies
};

struct eval_report {
    int num_classes = 0;
    confusion_counts overall;
    iou_report overall_iou;
    std::vector<condition_row> conditions; // Rainy / Day / Night
    double rainy_acc = 0, night_acc = 0;
    // Mean trust scalar by ground-truth condition, indexed by prompt id
    // (rainy?2:0)+(night?1:0); NaN when no such scenes or no env pathway.
    std::array<double, kPromptCount> mean_w_env;
    std::vector<eval_scene_outcome> scenes;

    eval_report() : overall(1), mean_w_env{} {}
};

// Prompts follow the predicted weather flags unless cfg.gt_prompts is set.
eval_report evaluate(occ_model& m, const dataset& data, const eval_cfg& cfg);

// ---- Tables -------------------------------------------------------------------

struct text_table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Aligned plain text, or tab-separated when `tsv`. Deterministic output.
std::string render_table(const text_table& t, bool tsv);

// Metrics as percentage points with two decimals; NaN renders as "n/a".
std::string format_metric(double v);

// Overall + per-condition rows of an evaluation, paper-table style.
text_table condition_table(const eval_report& rep);
// Per-class IoU listing over semantic classes.
text_table per_class_table(const eval_report& rep);

// ---- Strategy comparison -------------------------------------------------------

struct compare_cfg {
    model_cfg model; // template; strategy and seed overridden per run
    train_cfg train;
    std::vector<fusion_strategy> strategies;
    int seeds = 3;
    uint64_t base_seed = 1;
    int bench_reps = 50;
};

struct strategy_outcome {
    fusion_strategy strategy;
    // Medians across seeds, percentage points.
    double miou = 0, binary_iou = 0;
    double rainy_miou = 0, day_miou = 0, night_miou = 0;
    double rainy_acc = 0, night_acc = 0;
    std::array<double, kPromptCount> mean_w_env; // medians; NaN for baselines
    double fusion_ms = 0;                        // median dense fusion-op latency
    std::vector<double> per_seed_miou;

    strategy_outcome() : mean_w_env{} {}
};

struct compare_result {
    std::vector<strategy_outcome> rows;
};

// Trains every strategy from the same seeds on the same data, evaluates on
// the held-out set, reports per-strategy medians plus a fusion-op latency
// column measured at the model's grid size.
compare_result compare(const compare_cfg& cfg, const dataset& train_data,
                       const dataset& eval_data, std::ostream& log);

text_table compare_table(const compare_result& r);

// ---- Fusion microbenchmark ------------------------------------------------------

struct bench_row {
    fusion_strategy strategy;
    int64_t voxels = 0;
    double median_ms = 0, p95_ms = 0, per_voxel_ns = 0;
};

// Wall-clock of the dense fusion op alone (environment context precomputed),
// `reps` timed repetitions after 3 discarded warmup iterations.
std::vector<bench_row> bench_fusion(int c, const grid_spec& spec, int reps, uint64_t seed);

text_table bench_table(const std::vector<bench_row>& rows);

// ---- Gradient checking ----------------------------------------------------------

struct gradcheck_row {
    std::string pathway;
    double max_rel_err = 0.0;
    int64_t checked = 0; // parameter elements compared
    bool pass = false;
};

// Checks every trainable pathway end to end against central finite
// differences through the full scene loss on a tiny double-precision model.
// The concatenation reducer runs under its own strategy (it is frozen
// elsewhere); all other pathways run under gated fusion. `op` narrows the
// check to one pathway; empty means all of them.
std::vector<gradcheck_row> run_gradcheck(uint64_t seed, double tolerance,
                                         const std::string& op = "");

text_table gradcheck_table(const std::vector<gradcheck_row>& rows);

} // namespace woc
