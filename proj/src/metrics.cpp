#include "woc/metrics.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "woc/common.h"

namespace woc {

namespace {
constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();
}

confusion_counts::confusion_counts(int classes) : num_classes(classes) {
    if (classes < 1) throw std::invalid_argument("confusion_counts: need at least one class");
    tp.assign(classes + 1, 0.0);
    fp.assign(classes + 1, 0.0);
    fn.assign(classes + 1, 0.0);
}

void confusion_counts::add(uint8_t gt, uint8_t pred, double weight) {
    if (gt == kLabelIgnore) return;
    if (gt > num_classes)
        throw std::invalid_argument(str("confusion_counts: gt label ", int(gt), " exceeds ",
                                        num_classes, " classes"));
    if (pred > num_classes)
        throw std::invalid_argument(str("confusion_counts: predicted label ", int(pred),
                                        " exceeds ", num_classes, " classes"));
    if (!(weight > 0.0)) throw std::invalid_argument("confusion_counts: weight must be positive");

    const bool gt_occ = gt != kLabelEmpty;
    const bool pred_occ = pred != kLabelEmpty;
    if (gt_occ && pred_occ) occ_tp += weight;
    else if (!gt_occ && pred_occ) occ_fp += weight;
    else if (gt_occ && !pred_occ) occ_fn += weight;
    else occ_tn += weight;

    if (gt == pred) {
        if (gt_occ) tp[gt] += weight;
        return;
    }
    if (pred_occ) fp[pred] += weight;
    if (gt_occ) fn[gt] += weight;
}

confusion_counts& confusion_counts::operator+=(const confusion_counts& other) {
    if (other.num_classes != num_classes)
        throw std::invalid_argument("confusion_counts: class count mismatch in merge");
    for (int c = 1; c <= num_classes; ++c) {
        tp[c] += other.tp[c];
        fp[c] += other.fp[c];
        fn[c] += other.fn[c];
    }
    occ_tp += other.occ_tp;
    occ_fp += other.occ_fp;
    occ_fn += other.occ_fn;
    occ_tn += other.occ_tn;
    return *this;
}

bool metric_defined(double v) {
    return !std::isnan(v);
}

iou_report compute_iou(const confusion_counts& c) {
    iou_report r;
    r.per_class.assign(c.num_classes + 1, kUndefined);
    double sum = 0.0;
    for (int cls = 1; cls <= c.num_classes; ++cls) {
        const double denom = c.tp[cls] + c.fp[cls] + c.fn[cls];
        if (denom <= 0.0) continue;
        r.per_class[cls] = c.tp[cls] / denom;
        sum += r.per_class[cls];
        ++r.included;
    }
    r.miou = r.included > 0 ? sum / r.included : kUndefined;
    const double occ_denom = c.occ_tp + c.occ_fp + c.occ_fn;
    r.binary_iou = occ_denom > 0.0 ? c.occ_tp / occ_denom : kUndefined;
    return r;
}

void accumulate(confusion_counts& c, const label_grid& pred, const label_grid& gt) {
    if (!(pred.spec == gt.spec))
        throw std::invalid_argument("accumulate: prediction and ground-truth grids disagree");
    for (size_t v = 0; v < gt.labels.size(); ++v) c.add(gt.labels[v], pred.labels[v]);
}

std::vector<uint8_t> argmax_rows(const tensor& logits) {
    if (logits.rank() != 2) throw std::invalid_argument("argmax_rows: want a rank-2 tensor");
    const int64_t rows = logits.shape[0], k = logits.shape[1];
    if (k < 1 || k > 256) throw std::invalid_argument("argmax_rows: class count out of range");
    std::vector<uint8_t> out(rows, 0);
    for (int64_t i = 0; i < rows; ++i) {
        const double* row = logits.data.data() + i * k;
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (row[c] > row[best]) best = c;
        out[i] = static_cast<uint8_t>(best);
    }
    return out;
}

label_grid argmax_volume(const tensor& logits, const grid_spec& spec) {
    const int64_t cells = spec.voxel_count();
    if (logits.rank() != 4 || logits.shape[1] != spec.nx || logits.shape[2] != spec.ny ||
        logits.shape[3] != spec.nz)
        throw std::invalid_argument("argmax_volume: logit volume does not match the grid");
    const int64_t k = logits.shape[0];
    if (k < 1 || k > 256) throw std::invalid_argument("argmax_volume: class count out of range");
    label_grid out(spec);
    for (int64_t v = 0; v < cells; ++v) {
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (logits.data[c * cells + v] > logits.data[best * cells + v]) best = c;
        out.labels[v] = static_cast<uint8_t>(best);
    }
    return out;
}

std::vector<condition_row> condition_breakdown(const std::vector<confusion_counts>& per_scene,
                                               const std::vector<scene_tag>& tags,
                                               int num_classes) {
    if (per_scene.size() != tags.size())
        throw std::invalid_argument("condition_breakdown: one tag per scene required");
    std::vector<condition_row> rows;
    rows.push_back({"Rainy", 0, confusion_counts(num_classes)});
    rows.push_back({"Day", 0, confusion_counts(num_classes)});
    rows.push_back({"Night", 0, confusion_counts(num_classes)});
    for (size_t s = 0; s < per_scene.size(); ++s) {
        if (tags[s].rainy) {
            rows[0].counts += per_scene[s];
            ++rows[0].scenes;
        }
        if (!tags[s].night) {
            rows[1].counts += per_scene[s];
            ++rows[1].scenes;
        } else {
            rows[2].counts += per_scene[s];
            ++rows[2].scenes;
        }
    }
    return rows;
}

} // namespace woc
