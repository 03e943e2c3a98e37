#include "woc/envgate.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "woc/common.h"
#include "woc/rng.h"

namespace woc {

int select_prompt(bool rainy, bool night) { return (rainy ? 2 : 0) + (night ? 1 : 0); }

prompt_set prompt_set::defaults() {
    prompt_set s;
    s.prompts = {
        "a photo of a driving scene on a clear day",
        "a photo of a driving scene on a clear night",
        "a photo of a driving scene on a rainy day",
        "a photo of a driving scene on a rainy night",
    };
    return s;
}

void prompt_set::validate() const {
    for (int i = 0; i < kPromptCount; ++i) {
        if (prompts[i].empty())
            throw std::invalid_argument(str("prompt_set: prompt ", i, " is empty"));
        for (int j = i + 1; j < kPromptCount; ++j)
            if (prompts[i] == prompts[j])
                throw std::invalid_argument(
                    str("prompt_set: prompts ", i, " and ", j, " are identical"));
    }
}

namespace {

tensor unit_row_from_seed(uint64_t seed, int d) {
    rng r(seed);
    tensor row({1, d});
    for (double& v : row.data) v = r.normal();
    double norm = 0.0;
    for (double v : row.data) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : row.data) v /= norm;
    return row;
}

} // namespace

frozen_text_encoder make_frozen_encoder(const prompt_set& prompts, int d_txt, int d_env,
                                        uint64_t seed) {
    prompts.validate();
    if (d_txt < 1 || d_env < 1)
        throw std::invalid_argument(str("frozen encoder: dims must be >= 1, got d_txt=", d_txt,
                                        " d_env=", d_env));
    frozen_text_encoder enc;
    enc.d_txt = d_txt;
    enc.d_env = d_env;
    for (int i = 0; i < kPromptCount; ++i)
        enc.e_prompt[i] = unit_row_from_seed(mix_seed(seed, fnv1a64(prompts.prompts[i])), d_txt);
    rng r(mix_seed(seed, fnv1a64("w_txt")));
    enc.w_txt = tensor({d_env, d_txt});
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_txt));
    for (double& v : enc.w_txt.data) v = r.normal() * scale;
    return enc;
}

void load_prompt_embeddings(frozen_text_encoder& enc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(str("prompt embeddings: cannot open '", path, "'"));
    std::array<bool, kPromptCount> seen{};
    std::array<tensor, kPromptCount> loaded;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error(
                str("prompt embeddings: line ", line_no, ": missing tab separator"));
        int id = -1;
        try {
            id = std::stoi(line.substr(0, tab));
        } catch (const std::exception&) {
            throw std::runtime_error(str("prompt embeddings: line ", line_no, ": bad prompt id '",
                                         line.substr(0, tab), "'"));
        }
        if (id < 0 || id >= kPromptCount)
            throw std::runtime_error(str("prompt embeddings: line ", line_no, ": prompt id ", id,
                                         " out of range [0,", kPromptCount, ")"));
        if (seen[id])
            throw std::runtime_error(
                str("prompt embeddings: line ", line_no, ": duplicate prompt id ", id));
        std::vector<double> vals;
        std::stringstream fields(line.substr(tab + 1));
        std::string item;
        while (std::getline(fields, item, ',')) {
            try {
                size_t used = 0;
                const double v = std::stod(item, &used);
                while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
                    ++used;
                if (used != item.size()) throw std::invalid_argument(item);
                vals.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error(str("prompt embeddings: line ", line_no,
                                             ": bad value '", item, "'"));
            }
        }
        if (static_cast<int>(vals.size()) != enc.d_txt)
            throw std::runtime_error(str("prompt embeddings: line ", line_no, ": got ",
                                         vals.size(), " values, want d_txt=", enc.d_txt));
        double norm = 0.0;
        for (double v : vals) norm += v * v;
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw std::runtime_error(
                str("prompt embeddings: line ", line_no, ": embedding norm is ", norm));
        tensor row({1, enc.d_txt});
        for (size_t i = 0; i < vals.size(); ++i) row.data[i] = vals[i] / norm;
        loaded[id] = std::move(row);
        seen[id] = true;
    }
    for (int id = 0; id < kPromptCount; ++id)
        if (!seen[id]) throw std::runtime_error(str("prompt embeddings: missing prompt id ", id));
    enc.e_prompt = std::move(loaded);
}

void lora_cfg::validate(int d_txt, int d_env) const {
    if (rank < 1 || rank >= std::min(d_txt, d_env))
        throw std::invalid_argument(str("lora: rank ", rank, " must lie in [1,",
                                        std::min(d_txt, d_env), ")"));
    if (!(alpha > 0.0)) throw std::invalid_argument(str("lora: alpha must be positive, got ", alpha));
}

var encode_env_node(graph& g, int prompt_id, const frozen_text_encoder& enc, const lora_cfg& cfg,
                    var w_txt, var a, var b) {
    if (prompt_id < 0 || prompt_id >= kPromptCount)
        throw std::invalid_argument(str("encode_env: prompt id ", prompt_id, " out of range [0,",
                                        kPromptCount, ")"));
    cfg.validate(enc.d_txt, enc.d_env);
    const std::vector<int64_t> a_shape{cfg.rank, enc.d_txt};
    const std::vector<int64_t> b_shape{enc.d_env, cfg.rank};
    if (g.val(a).shape != a_shape || g.val(b).shape != b_shape)
        throw std::invalid_argument(str("encode_env: adapter shapes ", g.val(a).shape_str(), "/",
                                        g.val(b).shape_str(), ", want [", cfg.rank, ",", enc.d_txt,
                                        "]/[", enc.d_env, ",", cfg.rank, "]"));
    const var e = g.input(enc.e_prompt[prompt_id]);
    const var base = g.matmul_nt(e, w_txt);          // [1, d_env]
    const var delta = g.matmul_nt(g.matmul_nt(e, a), b); // (e·Aᵀ)·Bᵀ = ((α/r)⁻¹·ΔW)·e as a row
    return g.add(base, g.scale(delta, cfg.scaling()));
}

tensor encode_env(int prompt_id, const frozen_text_encoder& enc, const lora_cfg& cfg,
                  const tensor& a, const tensor& b) {
    graph g;
    return g.val(encode_env_node(g, prompt_id, enc, cfg, g.input(enc.w_txt), g.input(a),
                                 g.input(b)));
}

var project_env_node(graph& g, var f_env, var w_proj, var b_proj) {
    return g.linear(f_env, w_proj, b_proj);
}

tensor project_env(const tensor& f_env, const tensor& w_proj, const tensor& b_proj) {
    graph g;
    return g.val(project_env_node(g, g.input(f_env), g.input(w_proj), g.input(b_proj)));
}

gate_vars gating_masks_node(graph& g, var f_proj, var w_cam, var b_cam, var w_pts, var b_pts) {
    gate_vars out;
    out.g_cam = g.sigmoid(g.linear(f_proj, w_cam, b_cam));
    out.g_pts = g.sigmoid(g.linear(f_proj, w_pts, b_pts));
    return out;
}

var trust_scalar_node(graph& g, var f_proj, var w_trust, var b_trust) {
    return g.sigmoid(g.linear(f_proj, w_trust, b_trust));
}

var fuse_node(graph& g, var v_cam, var v_pts, var g_cam, var g_pts, var w_env) {
    const tensor& cam = g.val(v_cam);
    const tensor& pts = g.val(v_pts);
    const tensor& gc = g.val(g_cam);
    const tensor& gp = g.val(g_pts);
    const tensor& wv = g.val(w_env);
    if (cam.rank() != 2 || !cam.same_shape(pts))
        throw std::invalid_argument(str("fuse: camera rows ", cam.shape_str(),
                                        " vs lidar rows ", pts.shape_str()));
    const int64_t rows = cam.shape[0], c = cam.shape[1];
    const auto check_mask = [&](const tensor& m, const char* name) {
        if (m.rank() != 2 || m.shape[0] != 1 || m.shape[1] != c)
            throw std::invalid_argument(str("fuse: ", name, " must be [1,", c, "], got ",
                                            m.shape_str()));
    };
    check_mask(gc, "g_cam");
    check_mask(gp, "g_pts");
    if (wv.numel() != 1)
        throw std::invalid_argument(str("fuse: w_env must be a scalar, got ", wv.shape_str()));
    const double w = wv.data[0];
    tensor y({rows, c});
    for (int64_t r = 0; r < rows; ++r) {
        const double* cr = cam.ptr() + r * c;
        const double* pr = pts.ptr() + r * c;
        double* yr = y.ptr() + r * c;
        for (int64_t ch = 0; ch < c; ++ch)
            yr[ch] = w * gc.data[ch] * cr[ch] + (1.0 - w) * gp.data[ch] * pr[ch];
    }
    var out = g.make(std::move(y), {});
    g.set_backprop(out, [v_cam, v_pts, g_cam, g_pts, w_env, out, rows, c](graph& gg) {
        const tensor& gy = gg.grad_acc(out);
        const tensor& cam = gg.val(v_cam);
        const tensor& pts = gg.val(v_pts);
        const tensor& gc = gg.val(g_cam);
        const tensor& gp = gg.val(g_pts);
        const double w = gg.val(w_env).data[0];
        tensor& dcam = gg.grad_acc(v_cam);
        tensor& dpts = gg.grad_acc(v_pts);
        tensor& dgc = gg.grad_acc(g_cam);
        tensor& dgp = gg.grad_acc(g_pts);
        double dw = 0.0;
        for (int64_t r = 0; r < rows; ++r) {
            const double* gyr = gy.ptr() + r * c;
            const double* cr = cam.ptr() + r * c;
            const double* pr = pts.ptr() + r * c;
            double* dcr = dcam.ptr() + r * c;
            double* dpr = dpts.ptr() + r * c;
            for (int64_t ch = 0; ch < c; ++ch) {
                const double gyv = gyr[ch];
                dcr[ch] += gyv * w * gc.data[ch];
                dpr[ch] += gyv * (1.0 - w) * gp.data[ch];
                dgc.data[ch] += gyv * w * cr[ch];
                dgp.data[ch] += gyv * (1.0 - w) * pr[ch];
                dw += gyv * (gc.data[ch] * cr[ch] - gp.data[ch] * pr[ch]);
            }
        }
        gg.grad_acc(w_env).data[0] += dw;
    });
    return out;
}

namespace {

void check_volume_pair(const voxel_features& v_cam, const voxel_features& v_pts,
                       const char* who) {
    if (v_cam.channels != v_pts.channels || !v_cam.volume.same_shape(v_pts.volume))
        throw std::invalid_argument(str(who, ": camera volume ", v_cam.volume.shape_str(),
                                        " vs lidar volume ", v_pts.volume.shape_str()));
}

} // namespace

voxel_features fuse(const voxel_features& v_cam, const voxel_features& v_pts,
                    const fusion_context& ctx) {
    check_volume_pair(v_cam, v_pts, "fuse");
    const int64_t c = v_cam.channels;
    const auto mask_shape = std::vector<int64_t>{1, c};
    if (ctx.g_cam.shape != mask_shape || ctx.g_pts.shape != mask_shape)
        throw std::invalid_argument(str("fuse: masks ", ctx.g_cam.shape_str(), "/",
                                        ctx.g_pts.shape_str(), ", want [1,", c, "]"));
    voxel_features out(v_cam.channels, feature_role::fused, tensor(v_cam.volume.shape));
    const int64_t cells = v_cam.volume.numel() / c;
    const double w = ctx.w_env;
    for (int64_t ch = 0; ch < c; ++ch) {
        const double a = w * ctx.g_cam.data[ch];
        const double b = (1.0 - w) * ctx.g_pts.data[ch];
        const double* cv = v_cam.volume.ptr() + ch * cells;
        const double* pv = v_pts.volume.ptr() + ch * cells;
        double* ov = out.volume.ptr() + ch * cells;
        for (int64_t i = 0; i < cells; ++i) ov[i] = a * cv[i] + b * pv[i];
    }
    return out;
}

fusion_strategy parse_fusion_strategy(const std::string& tag) {
    if (tag == "addition") return fusion_strategy::addition;
    if (tag == "concat" || tag == "concatenation") return fusion_strategy::concatenation;
    if (tag == "gated") return fusion_strategy::gated;
    throw std::invalid_argument(
        str("unknown fusion strategy '", tag, "' (want addition|concat|gated)"));
}

const char* fusion_strategy_name(fusion_strategy s) {
    switch (s) {
        case fusion_strategy::addition: return "addition";
        case fusion_strategy::concatenation: return "concatenation";
        case fusion_strategy::gated: return "gated";
    }
    throw std::invalid_argument("fusion_strategy_name: bad enum value");
}

concat_reducer_params make_concat_reducer(int c, double cam_weight, double pts_weight) {
    if (c < 1) throw std::invalid_argument(str("concat reducer: channels must be >= 1, got ", c));
    concat_reducer_params p;
    p.w = tensor::zeros({c, 2 * c});
    p.b = tensor::zeros({c});
    for (int i = 0; i < c; ++i) {
        p.w.at(i, i) = cam_weight;
        p.w.at(i, c + i) = pts_weight;
    }
    return p;
}

var fuse_addition_node(graph& g, var v_cam, var v_pts) { return g.add(v_cam, v_pts); }

var fuse_concat_node(graph& g, var v_cam, var v_pts, var w_reducer, var b_reducer) {
    return g.linear(g.concat_cols(v_cam, v_pts), w_reducer, b_reducer);
}

voxel_features fuse_baseline(fusion_strategy strategy, const voxel_features& v_cam,
                             const voxel_features& v_pts, const concat_reducer_params* reducer) {
    check_volume_pair(v_cam, v_pts, "fuse_baseline");
    const int64_t c = v_cam.channels;
    const int64_t cells = v_cam.volume.numel() / c;
    voxel_features out(v_cam.channels, feature_role::fused, tensor(v_cam.volume.shape));
    switch (strategy) {
        case fusion_strategy::addition:
            for (int64_t i = 0; i < out.volume.numel(); ++i)
                out.volume.data[i] = v_cam.volume.data[i] + v_pts.volume.data[i];
            return out;
        case fusion_strategy::concatenation: {
            if (!reducer)
                throw std::invalid_argument("fuse_baseline: concatenation needs reducer params");
            if (reducer->w.shape != std::vector<int64_t>{c, 2 * c} ||
                reducer->b.shape != std::vector<int64_t>{c})
                throw std::invalid_argument(str("fuse_baseline: reducer ",
                                                reducer->w.shape_str(), "/",
                                                reducer->b.shape_str(), ", want [", c, ",", 2 * c,
                                                "]/[", c, "]"));
            for (int64_t ch = 0; ch < c; ++ch) {
                double* ov = out.volume.ptr() + ch * cells;
                for (int64_t i = 0; i < cells; ++i) ov[i] = reducer->b.data[ch];
                for (int64_t j = 0; j < c; ++j) {
                    const double wc = reducer->w.at(ch, j);
                    const double wp = reducer->w.at(ch, c + j);
                    const double* cv = v_cam.volume.ptr() + j * cells;
                    const double* pv = v_pts.volume.ptr() + j * cells;
                    for (int64_t i = 0; i < cells; ++i) ov[i] += wc * cv[i] + wp * pv[i];
                }
            }
            return out;
        }
        case fusion_strategy::gated:
            throw std::invalid_argument(
                "fuse_baseline: gated fusion needs an environment context; use fuse()");
    }
    throw std::invalid_argument("fuse_baseline: bad strategy enum value");
}

} // namespace woc
