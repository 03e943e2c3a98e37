#include "woc/headloss.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "woc/common.h"

namespace woc {

std::vector<loss_entry> entries_from_labels(const std::vector<uint8_t>& labels, int num_classes) {
    if (num_classes < 1)
        throw std::invalid_argument(str("entries_from_labels: num_classes must be >= 1, got ",
                                        num_classes));
    std::vector<loss_entry> entries;
    entries.reserve(labels.size());
    for (size_t v = 0; v < labels.size(); ++v) {
        const uint8_t l = labels[v];
        if (l == kLabelIgnore) continue;
        if (l >= num_classes)
            throw std::invalid_argument(str("entries_from_labels: voxel ", v, " has label ",
                                            static_cast<int>(l), ", want < ", num_classes));
        entries.push_back({static_cast<int32_t>(v), l, 1.0});
    }
    return entries;
}

weather_logit_vars weather_logits_node(graph& g, var f_2d, var w_rainy, var b_rainy, var w_night,
                                       var b_night) {
    weather_logit_vars out;
    out.rainy = g.linear(f_2d, w_rainy, b_rainy);
    out.night = g.linear(f_2d, w_night, b_night);
    return out;
}

std::pair<double, double> weather_logits(const tensor& f_2d, const weather_heads& heads) {
    graph g;
    const weather_logit_vars v =
        weather_logits_node(g, g.input(f_2d), g.input(heads.w_rainy), g.input(heads.b_rainy),
                            g.input(heads.w_night), g.input(heads.b_night));
    return {g.val(v.rainy).data[0], g.val(v.night).data[0]};
}

var occ_head_node(graph& g, var fused_rows, var w1, var b1, var w2, var b2) {
    return g.linear(g.sigmoid(g.linear(fused_rows, w1, b1)), w2, b2);
}

namespace {

void check_entries(const tensor& pv, const std::vector<loss_entry>& entries, const char* who) {
    if (pv.rank() != 2)
        throw std::invalid_argument(str(who, ": probs must be [rows,classes], got ",
                                        pv.shape_str()));
    for (const loss_entry& e : entries) {
        if (e.row < 0 || e.row >= pv.shape[0])
            throw std::invalid_argument(str(who, ": entry row ", e.row, " out of range [0,",
                                            pv.shape[0], ")"));
        if (static_cast<int64_t>(e.label) >= pv.shape[1])
            throw std::invalid_argument(str(who, ": entry label ", static_cast<int>(e.label),
                                            " out of range [0,", pv.shape[1], ")"));
        if (!(e.weight > 0.0))
            throw std::invalid_argument(str(who, ": entry weight must be positive, got ",
                                            e.weight));
    }
}

// [K, nx, ny, nz] channel-major volume -> per-voxel rows [V, K].
tensor volume_to_rows(const tensor& volume) {
    const int64_t k = volume.shape[0];
    const int64_t cells = volume.numel() / k;
    tensor rows({cells, k});
    for (int64_t c = 0; c < k; ++c)
        for (int64_t v = 0; v < cells; ++v) rows.data[v * k + c] = volume.data[c * cells + v];
    return rows;
}

void check_volume(const tensor& volume, const label_grid& labels, const char* who) {
    const std::vector<int64_t> want{volume.rank() == 4 ? volume.shape[0] : -1, labels.spec.nx,
                                    labels.spec.ny, labels.spec.nz};
    if (volume.rank() != 4 || volume.shape != want || volume.shape[0] < 1)
        throw std::invalid_argument(str(who, ": volume ", volume.shape_str(),
                                        " does not cover the label grid [K,", labels.spec.nx, ",",
                                        labels.spec.ny, ",", labels.spec.nz, "]"));
}

} // namespace

var cross_entropy_node(graph& g, var probs,
                       std::shared_ptr<const std::vector<loss_entry>> entries) {
    const tensor& pv = g.val(probs);
    check_entries(pv, *entries, "cross_entropy");
    const int64_t k = pv.shape[1];
    double acc = 0.0, w_total = 0.0;
    for (const loss_entry& e : *entries) {
        acc += e.weight * -std::log(pv.data[e.row * k + e.label]);
        w_total += e.weight;
    }
    const double loss = entries->empty() ? 0.0 : acc / w_total;
    var out = g.make(tensor::scalar(loss), {});
    if (!entries->empty())
        g.set_backprop(out, [probs, out, entries, k, w_total](graph& gg) {
            const double gy = gg.grad_acc(out).data[0];
            const tensor& pv = gg.val(probs);
            tensor& gp = gg.grad_acc(probs);
            for (const loss_entry& e : *entries) {
                const int64_t i = e.row * k + e.label;
                gp.data[i] += gy * -e.weight / (pv.data[i] * w_total);
            }
        });
    return out;
}

namespace {

struct error_rec {
    uint64_t key; // IEEE-754 bits of the error value (non-negative)
    int32_t idx;  // entry index
};

// Sorts records by error descending with ascending entry index as the
// tiebreak. Errors live in [0,1], so their raw bit patterns order exactly
// like the values; complementing each digit makes the stable LSD passes
// produce a descending order, and stability keeps equal errors in the
// ascending index order they arrived in. Passes whose digit is constant
// across all records are skipped.
void sort_errors_desc(std::vector<error_rec>& recs, std::vector<error_rec>& scratch) {
    const size_t n = recs.size();
    scratch.resize(n);
    error_rec* src = recs.data();
    error_rec* dst = scratch.data();
    for (int shift = 0; shift < 64; shift += 8) {
        size_t count[256] = {};
        for (size_t i = 0; i < n; ++i) ++count[255 - ((src[i].key >> shift) & 255)];
        size_t start[256];
        size_t pos = 0;
        bool constant = false;
        for (int d = 0; d < 256; ++d) {
            constant = constant || count[d] == n;
            start[d] = pos;
            pos += count[d];
        }
        if (constant) continue;
        for (size_t i = 0; i < n; ++i) {
            const int d = 255 - static_cast<int>((src[i].key >> shift) & 255);
            dst[start[d]++] = src[i];
        }
        std::swap(src, dst);
    }
    if (src != recs.data()) std::copy(src, src + n, recs.data());
}

} // namespace

var lovasz_softmax_node(graph& g, var probs,
                        std::shared_ptr<const std::vector<loss_entry>> entries) {
    const tensor& pv = g.val(probs);
    check_entries(pv, *entries, "lovasz_softmax");
    const int64_t k = pv.shape[1];
    const int64_t rows = pv.shape[0];
    const int64_t n = static_cast<int64_t>(entries->size());

    std::vector<double> gt_mass(k, 0.0);
    for (const loss_entry& e : *entries) gt_mass[e.label] += e.weight;
    std::vector<int> present;
    for (int64_t c = 0; c < k; ++c)
        if (gt_mass[c] > 0.0) present.push_back(static_cast<int>(c));

    auto grad = std::make_shared<tensor>(pv.shape);
    double loss = 0.0;
    if (!present.empty()) {
        // One transposed copy of the probabilities gives every class pass a
        // contiguous read stream instead of a stride-k gather.
        std::vector<double> pt(static_cast<size_t>(k) * static_cast<size_t>(rows));
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < k; ++c) pt[c * rows + r] = pv.data[r * k + c];
        std::vector<error_rec> recs(n), scratch;
        for (const int c : present) {
            const double* pc = pt.data() + static_cast<int64_t>(c) * rows;
            for (int64_t i = 0; i < n; ++i) {
                const loss_entry& e = (*entries)[i];
                const double p = pc[e.row];
                const double m = (e.label == c) ? 1.0 - p : p;
                // +0.0 folds a negative zero into the positive encoding so
                // equal values never split across two keys.
                recs[i].key = std::bit_cast<uint64_t>(m + 0.0);
                recs[i].idx = static_cast<int32_t>(i);
            }
            sort_errors_desc(recs, scratch);
            // Jaccard loss along the sorted errors; each entry's weight acts
            // as that many duplicated voxels, so its gradient is the J-delta
            // of the whole block (telescoping closed form).
            const double total_gt = gt_mass[c];
            double cum_gt = 0.0, cum_non = 0.0, j_prev = 0.0, loss_c = 0.0;
            for (const error_rec& rec : recs) {
                const loss_entry& e = (*entries)[rec.idx];
                const bool is_gt = e.label == c;
                (is_gt ? cum_gt : cum_non) += e.weight;
                const double j = 1.0 - (total_gt - cum_gt) / (total_gt + cum_non);
                const double step = j - j_prev;
                loss_c += std::bit_cast<double>(rec.key) * step;
                grad->data[e.row * k + c] += is_gt ? -step : step;
                j_prev = j;
            }
            loss += loss_c;
        }
        const double inv = 1.0 / static_cast<double>(present.size());
        loss *= inv;
        for (double& v : grad->data) v *= inv;
    }
    var out = g.make(tensor::scalar(loss), {});
    if (!present.empty())
        g.set_backprop(out, [probs, out, grad](graph& gg) {
            const double gy = gg.grad_acc(out).data[0];
            tensor& gp = gg.grad_acc(probs);
            for (int64_t i = 0; i < gp.numel(); ++i) gp.data[i] += gy * grad->data[i];
        });
    return out;
}

var bce_node(graph& g, var logit, double target) {
    if (target != 0.0 && target != 1.0)
        throw std::invalid_argument(str("bce: target must be 0 or 1, got ", target));
    const tensor& x = g.val(logit);
    if (x.numel() != 1)
        throw std::invalid_argument(str("bce: logit must be a scalar, got ", x.shape_str()));
    const double v = x.data[0];
    const double loss = std::max(v, 0.0) - v * target + std::log1p(std::exp(-std::fabs(v)));
    var out = g.make(tensor::scalar(loss), {});
    g.set_backprop(out, [logit, out, target](graph& gg) {
        const double gy = gg.grad_acc(out).data[0];
        const double v = gg.val(logit).data[0];
        const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                  : std::exp(v) / (1.0 + std::exp(v));
        gg.grad_acc(logit).data[0] += gy * (s - target);
    });
    return out;
}

double bce(double logit, double target) {
    graph g;
    return g.val(bce_node(g, g.input(tensor::scalar(logit)), target)).data[0];
}

double cross_entropy(const tensor& logits, const label_grid& labels, bool* all_ignored) {
    check_volume(logits, labels, "cross_entropy");
    auto entries = std::make_shared<const std::vector<loss_entry>>(
        entries_from_labels(labels.labels, static_cast<int>(logits.shape[0])));
    if (all_ignored) *all_ignored = entries->empty();
    graph g;
    return g.val(cross_entropy_node(g, g.softmax_rows(g.input(volume_to_rows(logits))), entries))
        .data[0];
}

double lovasz_softmax(const tensor& probs, const label_grid& labels, bool* no_present) {
    check_volume(probs, labels, "lovasz_softmax");
    auto entries = std::make_shared<const std::vector<loss_entry>>(
        entries_from_labels(labels.labels, static_cast<int>(probs.shape[0])));
    if (no_present) *no_present = entries->empty();
    graph g;
    return g.val(lovasz_softmax_node(g, g.input(volume_to_rows(probs)), entries)).data[0];
}

loss_vars total_loss_node(graph& g, var occ_logits_rows,
                          std::shared_ptr<const std::vector<loss_entry>> entries, var rainy_logit,
                          var night_logit, bool rainy_gt, bool night_gt, const loss_weights& lw) {
    loss_vars v;
    const var probs = g.softmax_rows(occ_logits_rows);
    v.ce = cross_entropy_node(g, probs, entries);
    v.lovasz = lovasz_softmax_node(g, probs, entries);
    v.occ = g.add(v.ce, v.lovasz);
    v.weather = g.add(bce_node(g, rainy_logit, rainy_gt ? 1.0 : 0.0),
                      bce_node(g, night_logit, night_gt ? 1.0 : 0.0));
    v.total = g.add(g.scale(v.occ, lw.lambda_occ), g.scale(v.weather, lw.lambda_weather));
    return v;
}

loss_breakdown read_breakdown(const graph& g, const loss_vars& v) {
    loss_breakdown b;
    b.ce = g.val(v.ce).data[0];
    b.lovasz = g.val(v.lovasz).data[0];
    b.occ = g.val(v.occ).data[0];
    b.weather = g.val(v.weather).data[0];
    b.total = g.val(v.total).data[0];
    return b;
}

} // namespace woc
