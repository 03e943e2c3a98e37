#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "woc/camera.h"
#include "woc/graph.h"
#include "woc/grid.h"
#include "woc/scenegen.h"
#include "woc/tensor.h"

namespace woc {

// Uniform depth discretization for the camera lift: bin b covers
// [d_min + b·width, d_min + (b+1)·width) with its center at the midpoint.
// Depths are camera z-depths, matching camera_model::unproject.
struct depth_bins {
    double d_min = 1.0;
    double d_max = 12.0;
    int count = 24;

    double width() const { return (d_max - d_min) / count; }
    double center(int b) const { return d_min + (b + 0.5) * width(); }
    void validate() const; // d_min > 0, d_max > d_min, count >= 1
};

// Per-camera frustum geometry: the frustum point at (pixel p, bin b)
// unprojects into flat voxel cell voxel_of[p*bins + b], or -1 when it falls
// outside the grid. Depends only on camera, bins and grid — shared across
// scenes and reusable for the whole run.
struct lift_table {
    int64_t pixels = 0;
    int bins = 0;
    std::vector<int32_t> voxel_of;
};

lift_table build_lift_table(const camera_model& cam, const depth_bins& bins,
                            const grid_spec& spec);

// [C,H,W] feature volume -> per-pixel rows [H*W, C]; pixel p = v*W + u.
tensor image_to_rows(const tensor& img);

// Lift-splat for one camera as a graph node. Depth distribution = row softmax
// of depth_logits [P,D]; the frustum feature at (pixel,bin) is
// distribution × (pixel features [P,C_img] · w_liftᵀ); frustum features are
// accumulated (summed) into target rows — usually a lift_table, optionally
// remapped voxel→row. Differentiable w.r.t. all three vars.
var lift_splat_node(graph& g, var pixel_features, var depth_logits, var w_lift,
                    std::shared_ptr<const std::vector<int32_t>> target_rows, int64_t n_rows);

// Dense multi-camera lift-splat into a full camera feature volume. One
// feature map [P,C_img] and one depth-logit map [P,D] per camera; frustum
// points outside the grid are discarded. Splat is nearest-voxel accumulation
// (no trilinear spreading).
voxel_features lift_splat(const std::vector<tensor>& pixel_features,
                          const std::vector<tensor>& depth_logits,
                          const std::vector<camera_model>& cameras, const depth_bins& bins,
                          const grid_spec& spec, const tensor& w_lift);

// Raw per-voxel point statistics, stat order: log1p(point count), mean
// intensity, mean offset from the voxel center (x,y,z components).
inline constexpr int kPointStatCount = 5;

// Dense stats volume [5, nx, ny, nz]. Empty voxels stay all-zero; points
// outside the grid are discarded. Bitwise permutation-invariant: points are
// reduced per voxel in a canonical order (sorted by coordinate bit patterns).
tensor voxelize_points(const point_cloud& cloud, const grid_spec& spec);

// Compact variant: stats land in row row_of_voxel[flat voxel] of a
// [n_rows, 5] tensor; voxels mapped to -1 are dropped, unhit rows stay zero.
tensor voxelize_points_rows(const point_cloud& cloud, const grid_spec& spec,
                            const std::vector<int32_t>& row_of_voxel, int64_t n_rows);

// Shared two-layer perceptron over per-voxel stats: 5 -> C (sigmoid) -> C.
struct point_encoder_params {
    tensor w1; // [C, 5]
    tensor b1; // [C]
    tensor w2; // [C, C]
    tensor b2; // [C]
};

var point_encoder_node(graph& g, var stat_rows, var w1, var b1, var w2, var b2);

// Dense application over a [5, nx, ny, nz] stats volume.
voxel_features point_encoder(const tensor& stats, const point_encoder_params& p,
                             const grid_spec& spec);

// Global average over all cameras and all pixels, per channel. Maps are
// per-pixel row tensors [P_k, C]; every pixel weighs equally. Returns [1, C].
tensor pool2d(const std::vector<tensor>& pixel_features);

} // namespace woc
