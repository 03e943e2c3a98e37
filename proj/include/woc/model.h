#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "woc/camera.h"
#include "woc/encoders.h"
#include "woc/envgate.h"
#include "woc/graph.h"
#include "woc/grid.h"
#include "woc/headloss.h"
#include "woc/params.h"
#include "woc/scenegen.h"

namespace woc {

// Everything that determines the network: grid geometry, sensor rig, feature
// widths, the environment-embedding stack and the fusion strategy.
struct model_cfg {
    grid_spec spec = desk_spec();
    camera_rig_cfg rig;
    depth_bins bins;
    int c = 16;                    // fused voxel feature channels
    int num_classes = kNumClasses; // semantic classes; logits add one empty slot
    int d_txt = 64;
    int d_env = 32;
    lora_cfg lora;
    prompt_set prompts = prompt_set::defaults();
    std::string embeddings_path; // optional file overriding the stub embeddings
    fusion_strategy strategy = fusion_strategy::gated;
    loss_weights loss;
    uint64_t model_seed = 7;

    int logit_classes() const { return num_classes + 1; }
    void validate() const;
};

// Assembled model. Parameter registration order is a public contract:
// checkpoints, finite-difference sweeps and the optimizer all walk it.
struct occ_model {
    model_cfg cfg;
    frozen_text_encoder encoder;
    std::vector<camera_model> cameras;
    // All cameras' frustum cells concatenated: entry (k·P + p)·D + b is the
    // flat voxel id for camera k, pixel p, bin b, or -1 outside the grid.
    std::shared_ptr<const std::vector<int32_t>> frustum_voxels;
    std::vector<int32_t> frustum_union; // sorted unique in-grid frustum voxels
    param_store params;
};

occ_model build_model(const model_cfg& cfg);

// Environment-pathway params (adapter, projection, gates, trust): frozen
// under the addition/concatenation baselines.
const std::vector<std::string>& envgate_param_names();

// Trainability contract: w_txt is always frozen; baseline strategies freeze
// the environment pathway; everything but concatenation freezes the concat
// reducer; lambda_weather == 0 freezes the weather heads.
void apply_freeze_policy(occ_model& m);

// One scene preprocessed into the compact active-row layout. Rows 0..rows-2
// are the voxels reachable by the camera frustum or holding LiDAR points, in
// ascending flat-voxel order; the last row is shared by every untouched voxel
// (their features are identical by construction, so this is exact, not an
// approximation).
struct scene_ctx {
    weather_flags weather;
    int64_t rows = 0;
    tensor image_rows; // [cams·H·W, C_img], cameras stacked in rig order
    tensor pooled;     // [1, C_img] mean over every pixel of every camera
    tensor stat_rows;  // [rows, kPointStatCount]
    std::shared_ptr<const std::vector<int32_t>> splat_target; // frustum cell -> row
    std::shared_ptr<const std::vector<loss_entry>> entries;   // row supervision
    std::vector<int32_t> row_of_voxel; // flat voxel -> row
};

scene_ctx encode_scene(const occ_model& m, const scene_record& rec);

// Forward graph for one scene. The weather heads are always present; the
// environment pathway only under the gated strategy.
struct scene_graph {
    var v_cam;      // [rows, C]
    var v_pts;      // [rows, C]
    var fused;      // [rows, C]
    var occ_logits; // [rows, num_classes+1]
    weather_logit_vars weather;
    bool has_env = false;
    var w_env;       // [1,1], gated only
    gate_vars gates; // gated only
};

scene_graph build_scene_graph(graph& g, const occ_model& m, const scene_ctx& ctx, int prompt_id);

// ---- Checkpoints -----------------------------------------------------------
// Binary little-endian format: magic "WOCK", version u16, param count u32,
// then per param (name, trainable u8, rank u8, dims i64[], payload f64[]),
// a config echo string, and a trailing FNV-1a64 digest of all prior bytes.

void save_checkpoint(const std::string& path, const occ_model& m, const std::string& config_echo);

// Loads parameter values into an already-built model; the file must carry
// exactly the model's params with matching shapes (mismatches throw with the
// offending name). Trainability is re-derived from the model's own policy.
// Returns the stored config echo.
std::string load_checkpoint(const std::string& path, occ_model& m);

// Returns only the config echo of a checkpoint (digest still verified), so a
// matching model can be rebuilt before load_checkpoint fills it.
std::string read_checkpoint_config(const std::string& path);

// Flat `key = value` text carrying every field of a model_cfg; doubles are
// printed with enough digits to roundtrip exactly. from-text rejects unknown
// or missing keys. This is what training embeds as the checkpoint's config
// echo so evaluation can rebuild the identical model.
std::string model_cfg_to_text(const model_cfg& cfg);
model_cfg model_cfg_from_text(const std::string& text);

// FNV-1a64 over a whole file; the cheap determinism probe.
uint64_t file_digest(const std::string& path);

} // namespace woc
