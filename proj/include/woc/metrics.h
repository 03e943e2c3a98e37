#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "woc/grid.h"
#include "woc/tensor.h"

namespace woc {

// Voxel-level confusion tallies. Semantic classes are 1..num_classes (label 0
// is "empty" and owns no semantic row; it shows up only through the FP/FN of
// semantic classes and through the binary occupied-vs-empty tallies).
// Counts are doubles so compact supervision rows can carry voxel-multiplicity
// weights; integer-valued weights keep every tally exact.
struct confusion_counts {
    int num_classes = 0;
    std::vector<double> tp, fp, fn; // indexed 1..num_classes; slot 0 unused
    double occ_tp = 0.0, occ_fp = 0.0, occ_fn = 0.0, occ_tn = 0.0;

    explicit confusion_counts(int num_classes);

    // One (gt, pred) voxel pair. gt == 255 is ignored entirely. Throws
    // std::invalid_argument on labels outside 0..num_classes.
    void add(uint8_t gt, uint8_t pred, double weight = 1.0);

    confusion_counts& operator+=(const confusion_counts& other);
};

// True when a metric value is defined (miou/iou return NaN when the
// denominator vanishes; callers must never read NaN as zero).
bool metric_defined(double v);

struct iou_report {
    std::vector<double> per_class; // size num_classes+1; slot 0 and absent classes are NaN
    double miou = 0.0;             // NaN when no class has a nonzero denominator
    double binary_iou = 0.0;       // NaN when occ_tp+occ_fp+occ_fn == 0
    int included = 0;              // classes that entered the mean
};

iou_report compute_iou(const confusion_counts& c);

// Dense per-voxel accumulation; grids must share a spec.
void accumulate(confusion_counts& c, const label_grid& pred, const label_grid& gt);

// Row-major argmax over [rows, k] logits; ties resolve to the lowest class.
std::vector<uint8_t> argmax_rows(const tensor& logits);

// Argmax over a [k, nx, ny, nz] logit volume into a label grid.
label_grid argmax_volume(const tensor& logits, const grid_spec& spec);

struct scene_tag {
    bool rainy = false;
    bool night = false;
};

struct condition_row {
    std::string name;
    int scenes = 0;
    confusion_counts counts;
};

// Table rows {Rainy, Day, Night}. A scene lands in Rainy when rainy == true,
// in Day when night == false, and in Night when night == true, so a rainy
// daytime scene contributes to both the Rainy and Day rows.
std::vector<condition_row> condition_breakdown(const std::vector<confusion_counts>& per_scene,
                                               const std::vector<scene_tag>& tags,
                                               int num_classes);

} // namespace woc
