#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "woc/graph.h"
#include "woc/grid.h"
#include "woc/tensor.h"

namespace woc {

// Prompt id layout: (rainy ? 2 : 0) + (night ? 1 : 0).
inline constexpr int kPromptCount = 4;
int select_prompt(bool rainy, bool night);

// The four condition prompts, indexed by prompt id.
struct prompt_set {
    std::array<std::string, kPromptCount> prompts;

    static prompt_set defaults();
    void validate() const; // exactly 4 distinct, non-empty strings
};

// Deterministic stand-in for a frozen text encoder: per-prompt unit
// embeddings seeded from the prompt string, plus a fixed projection W_txt.
// Nothing in here is ever trained.
struct frozen_text_encoder {
    int d_txt = 64;
    int d_env = 32;
    std::array<tensor, kPromptCount> e_prompt; // each a [1,d_txt] row, unit norm
    tensor w_txt;                              // [d_env, d_txt]
};

frozen_text_encoder make_frozen_encoder(const prompt_set& prompts, int d_txt, int d_env,
                                        uint64_t seed);

// Replace the stub embeddings with precomputed ones (e.g. genuine CLIP
// vectors). File format: one line per prompt, `id<TAB>v1,v2,...,v_dtxt`,
// decimal floats; all 4 ids exactly once, dimension must match d_txt.
// Vectors are renormalized to unit length on load.
void load_prompt_embeddings(frozen_text_encoder& enc, const std::string& path);

// Low-rank adapter hyperparameters; effective map = W_txt + (alpha/rank)·B·A.
struct lora_cfg {
    int rank = 4;
    double alpha = 8.0;

    void validate(int d_txt, int d_env) const; // 1 <= rank < min(d_txt, d_env)
    double scaling() const { return alpha / rank; }
};

// f_env = (W_txt + (alpha/r)·B·A)·e_prompt as a graph row [1,d_env].
// Differentiable w.r.t. a and b (and w_txt, which callers register frozen).
var encode_env_node(graph& g, int prompt_id, const frozen_text_encoder& enc, const lora_cfg& cfg,
                    var w_txt, var a, var b);
// Convenience evaluation outside a training graph.
tensor encode_env(int prompt_id, const frozen_text_encoder& enc, const lora_cfg& cfg,
                  const tensor& a, const tensor& b);

// Single affine projection d_env -> C.
var project_env_node(graph& g, var f_env, var w_proj, var b_proj);
tensor project_env(const tensor& f_env, const tensor& w_proj, const tensor& b_proj);

// Two independent affine C->C maps with sigmoid, one mask per modality.
struct gate_vars {
    var g_cam, g_pts;
};
gate_vars gating_masks_node(graph& g, var f_proj, var w_cam, var b_cam, var w_pts, var b_pts);

// One-layer perceptron C->1 with sigmoid. Fed with the projected features
// f_proj (single consistent pathway for gates and trust).
var trust_scalar_node(graph& g, var f_proj, var w_trust, var b_trust);

// Environment context for one scene, computed once and then immutable.
struct fusion_context {
    tensor f_env;  // [1, d_env]
    tensor f_proj; // [1, C]
    tensor g_cam;  // [1, C]
    tensor g_pts;  // [1, C]
    double w_env = 0.5;
};

// Gated fusion over voxel rows: out = w_env·(g_cam ⊙ cam) + (1-w_env)·(g_pts ⊙ pts),
// masks [1,C] broadcast over rows, w_env a [1,1] scalar var.
var fuse_node(graph& g, var v_cam, var v_pts, var g_cam, var g_pts, var w_env);

// Dense gated fusion over full feature volumes.
voxel_features fuse(const voxel_features& v_cam, const voxel_features& v_pts,
                    const fusion_context& ctx);

enum class fusion_strategy { addition, concatenation, gated };

fusion_strategy parse_fusion_strategy(const std::string& tag);
const char* fusion_strategy_name(fusion_strategy s);

// Per-voxel linear reducer for the concatenation baseline: [C, 2C] on
// stacked (cam ++ pts) channels. Initialized to a weighted identity pair
// [cam_weight·I | pts_weight·I] with zero bias.
struct concat_reducer_params {
    tensor w; // [C, 2C]
    tensor b; // [C]
};
concat_reducer_params make_concat_reducer(int c, double cam_weight = 0.5, double pts_weight = 0.5);

var fuse_addition_node(graph& g, var v_cam, var v_pts);
var fuse_concat_node(graph& g, var v_cam, var v_pts, var w_reducer, var b_reducer);

// Baseline fusion over dense volumes; `reducer` is required for (and only
// used by) the concatenation strategy. The gated strategy needs a fusion
// context and is served by fuse().
voxel_features fuse_baseline(fusion_strategy strategy, const voxel_features& v_cam,
                             const voxel_features& v_pts,
                             const concat_reducer_params* reducer = nullptr);

} // namespace woc
