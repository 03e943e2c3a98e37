#include "woc/encoders.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "woc/common.h"

namespace woc {

void depth_bins::validate() const {
    if (!(d_min > 0.0))
        throw std::invalid_argument(str("depth_bins: d_min must be positive, got ", d_min));
    if (!(d_max > d_min))
        throw std::invalid_argument(str("depth_bins: d_max ", d_max, " must exceed d_min ", d_min));
    if (count < 1) throw std::invalid_argument(str("depth_bins: count must be >= 1, got ", count));
}

lift_table build_lift_table(const camera_model& cam, const depth_bins& bins,
                            const grid_spec& spec) {
    bins.validate();
    lift_table t;
    t.pixels = static_cast<int64_t>(cam.h_img) * cam.w_img;
    t.bins = bins.count;
    t.voxel_of.assign(t.pixels * bins.count, -1);
    for (int v = 0; v < cam.h_img; ++v)
        for (int u = 0; u < cam.w_img; ++u) {
            const int64_t p = static_cast<int64_t>(v) * cam.w_img + u;
            for (int b = 0; b < bins.count; ++b) {
                double pt[3];
                cam.unproject(u, v, bins.center(b), pt);
                if (auto idx = world_to_index(pt[0], pt[1], pt[2], spec))
                    t.voxel_of[p * bins.count + b] =
                        static_cast<int32_t>(flat_index(*idx, spec));
            }
        }
    return t;
}

tensor image_to_rows(const tensor& img) {
    if (img.rank() != 3)
        throw std::invalid_argument(str("image_to_rows: want [C,H,W], got ", img.shape_str()));
    const int64_t c = img.shape[0], pixels = img.shape[1] * img.shape[2];
    tensor rows({pixels, c});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t p = 0; p < pixels; ++p)
            rows.data[p * c + ch] = img.data[ch * pixels + p];
    return rows;
}

var lift_splat_node(graph& g, var pixel_features, var depth_logits, var w_lift,
                    std::shared_ptr<const std::vector<int32_t>> target_rows, int64_t n_rows) {
    return g.splat_rows(g.matmul_nt(pixel_features, w_lift), g.softmax_rows(depth_logits),
                        std::move(target_rows), n_rows);
}

voxel_features lift_splat(const std::vector<tensor>& pixel_features,
                          const std::vector<tensor>& depth_logits,
                          const std::vector<camera_model>& cameras, const depth_bins& bins,
                          const grid_spec& spec, const tensor& w_lift) {
    if (cameras.empty()) throw std::invalid_argument("lift_splat: no cameras");
    if (pixel_features.size() != cameras.size() || depth_logits.size() != cameras.size())
        throw std::invalid_argument(str("lift_splat: got ", pixel_features.size(),
                                        " feature maps and ", depth_logits.size(),
                                        " depth-logit maps for ", cameras.size(), " cameras"));
    if (w_lift.rank() != 2)
        throw std::invalid_argument(str("lift_splat: w_lift must be [C,C_img], got ",
                                        w_lift.shape_str()));
    const int64_t c_out = w_lift.shape[0], c_img = w_lift.shape[1];
    const int64_t vcount = spec.voxel_count();
    graph g;
    var acc{};
    for (size_t k = 0; k < cameras.size(); ++k) {
        const camera_model& cam = cameras[k];
        const int64_t pixels = static_cast<int64_t>(cam.h_img) * cam.w_img;
        const tensor& feat = pixel_features[k];
        const tensor& dl = depth_logits[k];
        if (feat.rank() != 2 || feat.shape[0] != pixels || feat.shape[1] != c_img)
            throw std::invalid_argument(str("lift_splat: camera ", k, " features ",
                                            feat.shape_str(), ", want [", pixels, ",", c_img,
                                            "]"));
        if (dl.rank() != 2 || dl.shape[0] != pixels || dl.shape[1] != bins.count)
            throw std::invalid_argument(str("lift_splat: camera ", k, " depth logits ",
                                            dl.shape_str(), ", want [", pixels, ",", bins.count,
                                            "]"));
        auto table = std::make_shared<std::vector<int32_t>>(
            build_lift_table(cam, bins, spec).voxel_of);
        const var node =
            lift_splat_node(g, g.input(feat), g.input(dl), g.input(w_lift), table, vcount);
        acc = (k == 0) ? node : g.add(acc, node);
    }
    voxel_features out(static_cast<int>(c_out), spec, feature_role::camera);
    const tensor& rows = g.val(acc);
    for (int64_t v = 0; v < vcount; ++v)
        for (int64_t c = 0; c < c_out; ++c) out.volume.data[c * vcount + v] = rows.data[v * c_out + c];
    return out;
}

namespace {

struct voxel_stats {
    int64_t voxel;
    double stat[kPointStatCount];
};

// Reduce a cloud to per-voxel stats in a canonical order: points are sorted
// by (voxel, coordinate bit patterns), so any input permutation accumulates
// identically, bit for bit.
std::vector<voxel_stats> reduce_cloud(const point_cloud& cloud, const grid_spec& spec) {
    struct ref {
        int64_t voxel;
        std::array<uint32_t, 4> bits;
        uint32_t idx;
    };
    std::vector<ref> refs;
    refs.reserve(cloud.pts.size());
    for (uint32_t i = 0; i < cloud.pts.size(); ++i) {
        const auto& p = cloud.pts[i];
        const auto c = world_to_index(p[0], p[1], p[2], spec);
        if (!c) continue;
        ref r;
        r.voxel = flat_index(*c, spec);
        static_assert(sizeof(r.bits) == sizeof(p));
        std::memcpy(r.bits.data(), p.data(), sizeof(r.bits));
        r.idx = i;
        refs.push_back(r);
    }
    std::sort(refs.begin(), refs.end(), [](const ref& a, const ref& b) {
        if (a.voxel != b.voxel) return a.voxel < b.voxel;
        return a.bits < b.bits;
    });
    std::vector<voxel_stats> out;
    size_t i = 0;
    while (i < refs.size()) {
        const int64_t vox = refs[i].voxel;
        const voxel_coord coord{static_cast<int>(vox / (static_cast<int64_t>(spec.ny) * spec.nz)),
                                static_cast<int>((vox / spec.nz) % spec.ny),
                                static_cast<int>(vox % spec.nz)};
        double cx, cy, cz;
        index_to_center(coord, spec, cx, cy, cz);
        int64_t n = 0;
        double si = 0.0, sx = 0.0, sy = 0.0, sz = 0.0;
        for (; i < refs.size() && refs[i].voxel == vox; ++i, ++n) {
            const auto& p = cloud.pts[refs[i].idx];
            si += p[3];
            sx += static_cast<double>(p[0]) - cx;
            sy += static_cast<double>(p[1]) - cy;
            sz += static_cast<double>(p[2]) - cz;
        }
        const double inv = 1.0 / static_cast<double>(n);
        out.push_back({vox,
                       {std::log1p(static_cast<double>(n)), si * inv, sx * inv, sy * inv,
                        sz * inv}});
    }
    return out;
}

} // namespace

tensor voxelize_points(const point_cloud& cloud, const grid_spec& spec) {
    tensor out({kPointStatCount, spec.nx, spec.ny, spec.nz});
    const int64_t vcount = spec.voxel_count();
    for (const voxel_stats& e : reduce_cloud(cloud, spec))
        for (int k = 0; k < kPointStatCount; ++k) out.data[k * vcount + e.voxel] = e.stat[k];
    return out;
}

tensor voxelize_points_rows(const point_cloud& cloud, const grid_spec& spec,
                            const std::vector<int32_t>& row_of_voxel, int64_t n_rows) {
    if (static_cast<int64_t>(row_of_voxel.size()) != spec.voxel_count())
        throw std::invalid_argument(str("voxelize_points_rows: row map has ", row_of_voxel.size(),
                                        " entries, want ", spec.voxel_count()));
    tensor out({n_rows, kPointStatCount});
    for (const voxel_stats& e : reduce_cloud(cloud, spec)) {
        const int32_t r = row_of_voxel[e.voxel];
        if (r < 0) continue;
        if (r >= n_rows)
            throw std::invalid_argument(str("voxelize_points_rows: row ", r, " out of range [0,",
                                            n_rows, ")"));
        for (int k = 0; k < kPointStatCount; ++k) out.data[r * kPointStatCount + k] = e.stat[k];
    }
    return out;
}

var point_encoder_node(graph& g, var stat_rows, var w1, var b1, var w2, var b2) {
    return g.linear(g.sigmoid(g.linear(stat_rows, w1, b1)), w2, b2);
}

voxel_features point_encoder(const tensor& stats, const point_encoder_params& p,
                             const grid_spec& spec) {
    const std::vector<int64_t> want{kPointStatCount, spec.nx, spec.ny, spec.nz};
    if (stats.shape != want)
        throw std::invalid_argument(str("point_encoder: stats ", stats.shape_str(),
                                        " do not match the grid (want [", kPointStatCount, ",",
                                        spec.nx, ",", spec.ny, ",", spec.nz, "])"));
    if (p.w1.rank() != 2 || p.w1.shape[1] != kPointStatCount)
        throw std::invalid_argument(str("point_encoder: w1 must be [C,", kPointStatCount,
                                        "], got ", p.w1.shape_str()));
    const int64_t c = p.w1.shape[0];
    if (p.w2.rank() != 2 || p.w2.shape[0] != c || p.w2.shape[1] != c ||
        p.b1.shape != std::vector<int64_t>{c} || p.b2.shape != std::vector<int64_t>{c})
        throw std::invalid_argument(str("point_encoder: channel mismatch: w1 ", p.w1.shape_str(),
                                        ", b1 ", p.b1.shape_str(), ", w2 ", p.w2.shape_str(),
                                        ", b2 ", p.b2.shape_str()));
    const int64_t vcount = spec.voxel_count();
    tensor rows({vcount, kPointStatCount});
    for (int64_t v = 0; v < vcount; ++v)
        for (int k = 0; k < kPointStatCount; ++k)
            rows.data[v * kPointStatCount + k] = stats.data[k * vcount + v];
    graph g;
    const var out = point_encoder_node(g, g.input(std::move(rows)), g.input(p.w1), g.input(p.b1),
                                       g.input(p.w2), g.input(p.b2));
    voxel_features vf(static_cast<int>(c), spec, feature_role::lidar);
    const tensor& y = g.val(out);
    for (int64_t v = 0; v < vcount; ++v)
        for (int64_t ch = 0; ch < c; ++ch) vf.volume.data[ch * vcount + v] = y.data[v * c + ch];
    return vf;
}

tensor pool2d(const std::vector<tensor>& pixel_features) {
    if (pixel_features.empty())
        throw std::invalid_argument("pool2d: need at least one feature map");
    if (pixel_features[0].rank() != 2)
        throw std::invalid_argument(str("pool2d: maps must be [pixels,C], got ",
                                        pixel_features[0].shape_str()));
    const int64_t c = pixel_features[0].shape[1];
    tensor out({1, c});
    int64_t total = 0;
    for (size_t k = 0; k < pixel_features.size(); ++k) {
        const tensor& m = pixel_features[k];
        if (m.rank() != 2 || m.shape[1] != c)
            throw std::invalid_argument(str("pool2d: map ", k, " is ", m.shape_str(),
                                            ", want [pixels,", c, "]"));
        for (int64_t p = 0; p < m.shape[0]; ++p) {
            const double* row = m.ptr() + p * c;
            for (int64_t ch = 0; ch < c; ++ch) out.data[ch] += row[ch];
        }
        total += m.shape[0];
    }
    if (total == 0) throw std::invalid_argument("pool2d: maps contain no pixels");
    for (int64_t ch = 0; ch < c; ++ch) out.data[ch] /= static_cast<double>(total);
    return out;
}

} // namespace woc
