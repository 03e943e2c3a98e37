#include "woc/model.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "woc/common.h"
#include "woc/rng.h"

namespace woc {

void model_cfg::validate() const {
    if (c < 1) throw std::invalid_argument("model_cfg: fused channel count must be positive");
    if (num_classes < 1 || num_classes > 254)
        throw std::invalid_argument("model_cfg: num_classes must lie in 1..254");
    if (d_txt < 1 || d_env < 1)
        throw std::invalid_argument("model_cfg: embedding widths must be positive");
    if (rig.cameras < 1) throw std::invalid_argument("model_cfg: need at least one camera");
    if (rig.h_img < 1 || rig.w_img < 1 || rig.c_img < 1)
        throw std::invalid_argument("model_cfg: image dimensions must be positive");
    bins.validate();
    lora.validate(d_txt, d_env);
    prompts.validate();
}

namespace {

tensor normal_init(std::vector<int64_t> shape, double sigma, uint64_t seed) {
    tensor t(std::move(shape));
    rng r(seed);
    for (double& v : t.data) v = r.normal(0.0, sigma);
    return t;
}

uint64_t param_seed(const model_cfg& cfg, const char* name) {
    return mix_seed(cfg.model_seed, fnv1a64(name, std::strlen(name)));
}

void add_weight(occ_model& m, const char* name, std::vector<int64_t> shape, int64_t fan_in) {
    m.params.add(name, normal_init(std::move(shape), 1.0 / std::sqrt(double(fan_in)),
                                   param_seed(m.cfg, name)));
}

void add_bias(occ_model& m, const char* name, int64_t n) {
    m.params.add(name, tensor::zeros({n}));
}

} // namespace

const std::vector<std::string>& envgate_param_names() {
    static const std::vector<std::string> names{
        "lora_a",     "lora_b",     "proj_w",  "proj_b",  "gate_cam_w",
        "gate_cam_b", "gate_pts_w", "gate_pts_b", "trust_w", "trust_b"};
    return names;
}

occ_model build_model(const model_cfg& cfg) {
    cfg.validate();
    occ_model m;
    m.cfg = cfg;
    m.encoder = make_frozen_encoder(cfg.prompts, cfg.d_txt, cfg.d_env, cfg.model_seed);
    if (!cfg.embeddings_path.empty()) load_prompt_embeddings(m.encoder, cfg.embeddings_path);
    m.cameras = build_rig(cfg.rig);

    // Scene-independent frustum geometry, all cameras concatenated.
    auto cells = std::make_shared<std::vector<int32_t>>();
    cells->reserve(int64_t(cfg.rig.cameras) * cfg.rig.h_img * cfg.rig.w_img * cfg.bins.count);
    for (const camera_model& cam : m.cameras) {
        const lift_table t = build_lift_table(cam, cfg.bins, cfg.spec);
        cells->insert(cells->end(), t.voxel_of.begin(), t.voxel_of.end());
    }
    m.frustum_union.assign(cells->begin(), cells->end());
    std::sort(m.frustum_union.begin(), m.frustum_union.end());
    m.frustum_union.erase(std::unique(m.frustum_union.begin(), m.frustum_union.end()),
                          m.frustum_union.end());
    if (!m.frustum_union.empty() && m.frustum_union.front() < 0)
        m.frustum_union.erase(m.frustum_union.begin());
    m.frustum_voxels = std::move(cells);

    const int64_t c = cfg.c, ci = cfg.rig.c_img, d = cfg.bins.count;
    const int64_t k = cfg.logit_classes();
    add_weight(m, "lift_depth_w", {d, ci}, ci);
    add_bias(m, "lift_depth_b", d);
    add_weight(m, "lift_w", {c, ci}, ci);
    add_weight(m, "pts_w1", {c, kPointStatCount}, kPointStatCount);
    add_bias(m, "pts_b1", c);
    add_weight(m, "pts_w2", {c, c}, c);
    add_bias(m, "pts_b2", c);
    m.params.add("txt_w", m.encoder.w_txt, /*trainable=*/false);
    add_weight(m, "lora_a", {cfg.lora.rank, cfg.d_txt}, cfg.d_txt);
    // The low-rank delta starts at zero so a fresh model reproduces the frozen
    // encoder exactly.
    m.params.add("lora_b", tensor::zeros({cfg.d_env, cfg.lora.rank}));
    add_weight(m, "proj_w", {c, cfg.d_env}, cfg.d_env);
    add_bias(m, "proj_b", c);
    add_weight(m, "gate_cam_w", {c, c}, c);
    add_bias(m, "gate_cam_b", c);
    add_weight(m, "gate_pts_w", {c, c}, c);
    add_bias(m, "gate_pts_b", c);
    add_weight(m, "trust_w", {1, c}, c);
    add_bias(m, "trust_b", 1);
    add_weight(m, "occ_w1", {c, c}, c);
    add_bias(m, "occ_b1", c);
    add_weight(m, "occ_w2", {k, c}, c);
    add_bias(m, "occ_b2", k);
    add_weight(m, "rainy_w", {1, ci}, ci);
    add_bias(m, "rainy_b", 1);
    add_weight(m, "night_w", {1, ci}, ci);
    add_bias(m, "night_b", 1);
    const concat_reducer_params reducer = make_concat_reducer(int(c));
    m.params.add("reduce_w", reducer.w);
    m.params.add("reduce_b", reducer.b);

    apply_freeze_policy(m);
    return m;
}

void apply_freeze_policy(occ_model& m) {
    for (param& p : m.params.items) p.trainable = true;
    m.params.get("txt_w").trainable = false;
    if (m.cfg.strategy != fusion_strategy::gated)
        for (const std::string& name : envgate_param_names())
            m.params.get(name).trainable = false;
    if (m.cfg.strategy != fusion_strategy::concatenation) {
        m.params.get("reduce_w").trainable = false;
        m.params.get("reduce_b").trainable = false;
    }
    if (m.cfg.loss.lambda_weather == 0.0) {
        for (const char* name : {"rainy_w", "rainy_b", "night_w", "night_b"})
            m.params.get(name).trainable = false;
    }
}

namespace {

bool same_camera(const camera_model& a, const camera_model& b) {
    return a.h_img == b.h_img && a.w_img == b.w_img && a.intrinsics.data == b.intrinsics.data &&
           a.extrinsics.data == b.extrinsics.data;
}

} // namespace

scene_ctx encode_scene(const occ_model& m, const scene_record& rec) {
    const model_cfg& cfg = m.cfg;
    if (!(rec.spec == cfg.spec))
        throw std::invalid_argument("encode_scene: scene grid spec does not match the model");
    if (rec.cameras.size() != m.cameras.size())
        throw std::invalid_argument(str("encode_scene: scene has ", rec.cameras.size(),
                                        " cameras but the model rig has ", m.cameras.size()));
    for (size_t k = 0; k < m.cameras.size(); ++k)
        if (!same_camera(rec.cameras[k], m.cameras[k]))
            throw std::invalid_argument(
                str("encode_scene: camera ", k, " geometry differs from the model rig"));
    if (rec.feature_maps.size() != rec.cameras.size())
        throw std::invalid_argument("encode_scene: one feature map per camera required");
    const int64_t cells = cfg.spec.voxel_count();
    if (int64_t(rec.labels.size()) != cells)
        throw std::invalid_argument("encode_scene: label block does not match the grid");

    scene_ctx ctx;
    ctx.weather = rec.weather;

    // Active voxels: frustum-reachable plus LiDAR-occupied.
    std::vector<uint8_t> active(cells, 0);
    for (int32_t v : m.frustum_union) active[v] = 1;
    for (const auto& pt : rec.cloud.pts) {
        const auto idx = world_to_index(pt[0], pt[1], pt[2], cfg.spec);
        if (idx) active[flat_index(*idx, cfg.spec)] = 1;
    }
    ctx.row_of_voxel.assign(cells, -1);
    int32_t next = 0;
    for (int64_t v = 0; v < cells; ++v)
        if (active[v]) ctx.row_of_voxel[v] = next++;
    const int32_t background = next;
    for (int64_t v = 0; v < cells; ++v)
        if (!active[v]) ctx.row_of_voxel[v] = background;
    ctx.rows = background + 1;

    auto target = std::make_shared<std::vector<int32_t>>(m.frustum_voxels->size(), -1);
    for (size_t i = 0; i < target->size(); ++i) {
        const int32_t v = (*m.frustum_voxels)[i];
        if (v >= 0) (*target)[i] = ctx.row_of_voxel[v];
    }
    ctx.splat_target = std::move(target);

    ctx.stat_rows = voxelize_points_rows(rec.cloud, cfg.spec, ctx.row_of_voxel, ctx.rows);

    // Stack per-camera pixel rows in rig order.
    const int64_t pixels = int64_t(cfg.rig.h_img) * cfg.rig.w_img;
    ctx.image_rows = tensor({int64_t(rec.feature_maps.size()) * pixels, cfg.rig.c_img});
    for (size_t k = 0; k < rec.feature_maps.size(); ++k) {
        const tensor rows = image_to_rows(rec.feature_maps[k]);
        if (rows.shape[0] != pixels || rows.shape[1] != cfg.rig.c_img)
            throw std::invalid_argument(
                str("encode_scene: feature map ", k, " does not match the rig image size"));
        std::copy(rows.data.begin(), rows.data.end(),
                  ctx.image_rows.data.begin() + int64_t(k) * pixels * cfg.rig.c_img);
    }
    ctx.pooled = pool2d({ctx.image_rows});

    // Supervision entries: one per active voxel, grouped-by-label rows for the
    // shared background.
    auto entries = std::make_shared<std::vector<loss_entry>>();
    entries->reserve(ctx.rows);
    std::vector<double> bg_count(cfg.logit_classes(), 0.0);
    for (int64_t v = 0; v < cells; ++v) {
        const uint8_t label = rec.labels[v];
        if (label == kLabelIgnore) continue;
        if (label >= cfg.logit_classes())
            throw std::invalid_argument(
                str("encode_scene: label ", int(label), " exceeds ", cfg.num_classes, " classes"));
        if (active[v]) entries->push_back({ctx.row_of_voxel[v], label, 1.0});
        else bg_count[label] += 1.0;
    }
    for (int l = 0; l < cfg.logit_classes(); ++l)
        if (bg_count[l] > 0.0) entries->push_back({background, uint8_t(l), bg_count[l]});
    ctx.entries = std::move(entries);
    return ctx;
}

scene_graph build_scene_graph(graph& g, const occ_model& m, const scene_ctx& ctx, int prompt_id) {
    scene_graph out;
    const var img = g.input(ctx.image_rows);
    const var depth_logits = g.linear(img, g.param("lift_depth_w"), g.param("lift_depth_b"));
    out.v_cam = lift_splat_node(g, img, depth_logits, g.param("lift_w"), ctx.splat_target,
                                ctx.rows);
    out.v_pts = point_encoder_node(g, g.input(ctx.stat_rows), g.param("pts_w1"), g.param("pts_b1"),
                                   g.param("pts_w2"), g.param("pts_b2"));
    out.weather = weather_logits_node(g, g.input(ctx.pooled), g.param("rainy_w"),
                                      g.param("rainy_b"), g.param("night_w"), g.param("night_b"));
    switch (m.cfg.strategy) {
    case fusion_strategy::gated: {
        const var f_env = encode_env_node(g, prompt_id, m.encoder, m.cfg.lora, g.param("txt_w"),
                                          g.param("lora_a"), g.param("lora_b"));
        const var f_proj = project_env_node(g, f_env, g.param("proj_w"), g.param("proj_b"));
        out.gates = gating_masks_node(g, f_proj, g.param("gate_cam_w"), g.param("gate_cam_b"),
                                      g.param("gate_pts_w"), g.param("gate_pts_b"));
        out.w_env = trust_scalar_node(g, f_proj, g.param("trust_w"), g.param("trust_b"));
        out.fused = fuse_node(g, out.v_cam, out.v_pts, out.gates.g_cam, out.gates.g_pts, out.w_env);
        out.has_env = true;
        break;
    }
    case fusion_strategy::addition:
        out.fused = fuse_addition_node(g, out.v_cam, out.v_pts);
        break;
    case fusion_strategy::concatenation:
        out.fused = fuse_concat_node(g, out.v_cam, out.v_pts, g.param("reduce_w"),
                                     g.param("reduce_b"));
        break;
    }
    out.occ_logits = occ_head_node(g, out.fused, g.param("occ_w1"), g.param("occ_b1"),
                                   g.param("occ_w2"), g.param("occ_b2"));
    return out;
}

// ---- Checkpoints -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'W', 'O', 'C', 'K'};
constexpr uint16_t kVersion = 1;

void put_bytes(std::string& buf, const void* p, size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void put(std::string& buf, T v) {
    put_bytes(buf, &v, sizeof v);
}

std::string dims_str(const std::vector<int64_t>& shape) {
    std::string out = "[";
    for (size_t i = 0; i < shape.size(); ++i) out += (i ? "," : "") + std::to_string(shape[i]);
    return out + "]";
}

struct reader {
    const std::string& buf;
    size_t pos = 0;

    void take(void* out, size_t n) {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
        std::memcpy(out, buf.data() + pos, n);
        pos += n;
    }
    void skip(size_t n) {
        if (n > buf.size() || pos + n > buf.size())
            throw std::runtime_error("checkpoint: truncated file");
        pos += n;
    }
    template <typename T>
    T get() {
        T v;
        take(&v, sizeof v);
        return v;
    }
    std::string get_string(size_t n) {
        std::string s(n, '\0');
        take(s.data(), n);
        return s;
    }
};

} // namespace

void save_checkpoint(const std::string& path, const occ_model& m, const std::string& config_echo) {
    std::string buf;
    put_bytes(buf, kMagic, sizeof kMagic);
    put(buf, kVersion);
    put(buf, uint32_t(m.params.items.size()));
    for (const param& p : m.params.items) {
        put(buf, uint16_t(p.name.size()));
        put_bytes(buf, p.name.data(), p.name.size());
        put(buf, uint8_t(p.trainable ? 1 : 0));
        put(buf, uint8_t(p.value.rank()));
        for (int64_t d : p.value.shape) put(buf, d);
        put_bytes(buf, p.value.data.data(), p.value.data.size() * sizeof(double));
    }
    put(buf, uint32_t(config_echo.size()));
    put_bytes(buf, config_echo.data(), config_echo.size());
    put(buf, fnv1a64(buf.data(), buf.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(str("checkpoint: cannot open '", path, "' for writing"));
    f.write(buf.data(), std::streamsize(buf.size()));
    if (!f) throw std::runtime_error(str("checkpoint: write to '", path, "' failed"));
}

std::string load_checkpoint(const std::string& path, occ_model& m) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(str("checkpoint: cannot open '", path, "'"));
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < sizeof kMagic + sizeof kVersion + sizeof(uint32_t) + sizeof(uint64_t))
        throw std::runtime_error("checkpoint: truncated file");

    uint64_t stored_digest;
    std::memcpy(&stored_digest, buf.data() + buf.size() - sizeof stored_digest,
                sizeof stored_digest);
    if (fnv1a64(buf.data(), buf.size() - sizeof stored_digest) != stored_digest)
        throw std::runtime_error("checkpoint: digest mismatch (corrupt file)");

    reader r{buf};
    char magic[4];
    r.take(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("checkpoint: bad magic (not a checkpoint file)");
    const auto version = r.get<uint16_t>();
    if (version != kVersion)
        throw std::runtime_error(
            str("checkpoint: unsupported version ", version, " (want ", kVersion, ")"));
    const auto count = r.get<uint32_t>();
    if (count != m.params.items.size())
        throw std::runtime_error(str("checkpoint: holds ", count, " params but the model has ",
                                     m.params.items.size()));
    for (uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.get<uint16_t>();
        const std::string name = r.get_string(name_len);
        r.get<uint8_t>(); // stored trainability: informational only
        const auto rank = r.get<uint8_t>();
        std::vector<int64_t> shape(rank);
        for (auto& d : shape) d = r.get<int64_t>();
        if (!m.params.has(name))
            throw std::runtime_error(str("checkpoint: unknown param '", name, "'"));
        param& p = m.params.get(name);
        if (shape != p.value.shape)
            throw std::runtime_error(str("checkpoint: param '", name, "' has shape ",
                                         dims_str(shape), " but the model expects ",
                                         dims_str(p.value.shape)));
        r.take(p.value.data.data(), p.value.data.size() * sizeof(double));
    }
    const auto echo_len = r.get<uint32_t>();
    const std::string echo = r.get_string(echo_len);
    if (r.pos + sizeof(uint64_t) != buf.size())
        throw std::runtime_error("checkpoint: trailing bytes after the config echo");
    apply_freeze_policy(m);
    return echo;
}

std::string read_checkpoint_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(str("checkpoint: cannot open '", path, "'"));
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < sizeof kMagic + sizeof kVersion + sizeof(uint32_t) + sizeof(uint64_t))
        throw std::runtime_error("checkpoint: truncated file");

    uint64_t stored_digest;
    std::memcpy(&stored_digest, buf.data() + buf.size() - sizeof stored_digest,
                sizeof stored_digest);
    if (fnv1a64(buf.data(), buf.size() - sizeof stored_digest) != stored_digest)
        throw std::runtime_error("checkpoint: digest mismatch (corrupt file)");

    reader r{buf};
    char magic[4];
    r.take(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("checkpoint: bad magic (not a checkpoint file)");
    const auto version = r.get<uint16_t>();
    if (version != kVersion)
        throw std::runtime_error(
            str("checkpoint: unsupported version ", version, " (want ", kVersion, ")"));
    const auto count = r.get<uint32_t>();
    for (uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.get<uint16_t>();
        r.skip(name_len);
        r.get<uint8_t>(); // trainability
        const auto rank = r.get<uint8_t>();
        uint64_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            const auto dim = r.get<int64_t>();
            if (dim <= 0 || numel > buf.size()) throw std::runtime_error("checkpoint: truncated file");
            numel *= uint64_t(dim);
        }
        r.skip(numel * sizeof(double));
    }
    const auto echo_len = r.get<uint32_t>();
    const std::string echo = r.get_string(echo_len);
    if (r.pos + sizeof(uint64_t) != buf.size())
        throw std::runtime_error("checkpoint: trailing bytes after the config echo");
    return echo;
}

// ---- Config text -----------------------------------------------------------

namespace {

std::string fmt_g(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        const size_t comma = s.find(',', start);
        parts.push_back(s.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return parts;
}

std::string trimmed(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument(str("model config: bad value '", v, "' for key '", key, "'"));
    }
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int64_t x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument(str("model config: bad value '", v, "' for key '", key, "'"));
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument(str("model config: bad value '", v, "' for key '", key, "'"));
    }
}

} // namespace

std::string model_cfg_to_text(const model_cfg& cfg) {
    cfg.validate();
    std::string o;
    auto kv = [&o](const std::string& key, const std::string& value) {
        o += key;
        o += " = ";
        o += value;
        o += '\n';
    };
    kv("grid", str(fmt_g(cfg.spec.x_min), ",", fmt_g(cfg.spec.x_max), ",", fmt_g(cfg.spec.y_min),
                   ",", fmt_g(cfg.spec.y_max), ",", fmt_g(cfg.spec.z_min), ",",
                   fmt_g(cfg.spec.z_max), ",", fmt_g(cfg.spec.voxel)));
    kv("grid_n", str(cfg.spec.nx, ",", cfg.spec.ny, ",", cfg.spec.nz));
    kv("cameras", std::to_string(cfg.rig.cameras));
    kv("image_h", std::to_string(cfg.rig.h_img));
    kv("image_w", std::to_string(cfg.rig.w_img));
    kv("image_channels", std::to_string(cfg.rig.c_img));
    kv("fov_h_deg", fmt_g(cfg.rig.fov_h_deg));
    kv("fov_v_deg", fmt_g(cfg.rig.fov_v_deg));
    kv("pitch_deg", fmt_g(cfg.rig.pitch_deg));
    kv("camera_height", fmt_g(cfg.rig.height));
    kv("depth_min", fmt_g(cfg.bins.d_min));
    kv("depth_max", fmt_g(cfg.bins.d_max));
    kv("depth_count", std::to_string(cfg.bins.count));
    kv("channels", std::to_string(cfg.c));
    kv("classes", std::to_string(cfg.num_classes));
    kv("d_txt", std::to_string(cfg.d_txt));
    kv("d_env", std::to_string(cfg.d_env));
    kv("lora_rank", std::to_string(cfg.lora.rank));
    kv("lora_alpha", fmt_g(cfg.lora.alpha));
    for (int p = 0; p < kPromptCount; ++p)
        kv(str("prompt", p), cfg.prompts.prompts[size_t(p)]);
    kv("embeddings", cfg.embeddings_path);
    kv("strategy", fusion_strategy_name(cfg.strategy));
    kv("lambda_occ", fmt_g(cfg.loss.lambda_occ));
    kv("lambda_weather", fmt_g(cfg.loss.lambda_weather));
    kv("model_seed", std::to_string(cfg.model_seed));
    return o;
}

model_cfg model_cfg_from_text(const std::string& text) {
    model_cfg cfg;
    std::array<double, 7> grid_vals{};
    std::array<int64_t, 3> grid_n{};
    bool have_grid = false, have_grid_n = false;

    std::vector<std::string> seen;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string stripped = trimmed(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(str("model config: expected 'key = value', got '",
                                            stripped, "'"));
        const std::string key = trimmed(stripped.substr(0, eq));
        const std::string value = trimmed(stripped.substr(eq + 1));
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            throw std::invalid_argument(str("model config: duplicate key '", key, "'"));
        seen.push_back(key);

        if (key == "grid") {
            const auto parts = split_csv(value);
            if (parts.size() != 7)
                throw std::invalid_argument("model config: grid wants 7 comma-separated values");
            for (size_t i = 0; i < 7; ++i) grid_vals[i] = parse_double(key, trimmed(parts[i]));
            have_grid = true;
        } else if (key == "grid_n") {
            const auto parts = split_csv(value);
            if (parts.size() != 3)
                throw std::invalid_argument("model config: grid_n wants 3 comma-separated values");
            for (size_t i = 0; i < 3; ++i) grid_n[i] = parse_int(key, trimmed(parts[i]));
            have_grid_n = true;
        } else if (key == "cameras") {
            cfg.rig.cameras = int(parse_int(key, value));
        } else if (key == "image_h") {
            cfg.rig.h_img = int(parse_int(key, value));
        } else if (key == "image_w") {
            cfg.rig.w_img = int(parse_int(key, value));
        } else if (key == "image_channels") {
            cfg.rig.c_img = int(parse_int(key, value));
        } else if (key == "fov_h_deg") {
            cfg.rig.fov_h_deg = parse_double(key, value);
        } else if (key == "fov_v_deg") {
            cfg.rig.fov_v_deg = parse_double(key, value);
        } else if (key == "pitch_deg") {
            cfg.rig.pitch_deg = parse_double(key, value);
        } else if (key == "camera_height") {
            cfg.rig.height = parse_double(key, value);
        } else if (key == "depth_min") {
            cfg.bins.d_min = parse_double(key, value);
        } else if (key == "depth_max") {
            cfg.bins.d_max = parse_double(key, value);
        } else if (key == "depth_count") {
            cfg.bins.count = int(parse_int(key, value));
        } else if (key == "channels") {
            cfg.c = int(parse_int(key, value));
        } else if (key == "classes") {
            cfg.num_classes = int(parse_int(key, value));
        } else if (key == "d_txt") {
            cfg.d_txt = int(parse_int(key, value));
        } else if (key == "d_env") {
            cfg.d_env = int(parse_int(key, value));
        } else if (key == "lora_rank") {
            cfg.lora.rank = int(parse_int(key, value));
        } else if (key == "lora_alpha") {
            cfg.lora.alpha = parse_double(key, value);
        } else if (key.rfind("prompt", 0) == 0 && key.size() == 7 && key[6] >= '0' &&
                   key[6] < '0' + kPromptCount) {
            cfg.prompts.prompts[size_t(key[6] - '0')] = value;
        } else if (key == "embeddings") {
            cfg.embeddings_path = value;
        } else if (key == "strategy") {
            cfg.strategy = parse_fusion_strategy(value);
        } else if (key == "lambda_occ") {
            cfg.loss.lambda_occ = parse_double(key, value);
        } else if (key == "lambda_weather") {
            cfg.loss.lambda_weather = parse_double(key, value);
        } else if (key == "model_seed") {
            cfg.model_seed = parse_u64(key, value);
        } else {
            throw std::invalid_argument(str("model config: unknown key '", key, "'"));
        }
    }
    if (!have_grid) throw std::invalid_argument("model config: missing key 'grid'");
    if (!have_grid_n) throw std::invalid_argument("model config: missing key 'grid_n'");
    cfg.spec = grid_spec::from_extents(grid_vals[0], grid_vals[1], grid_vals[2], grid_vals[3],
                                       grid_vals[4], grid_vals[5], grid_vals[6]);
    if (cfg.spec.nx != grid_n[0] || cfg.spec.ny != grid_n[1] || cfg.spec.nz != grid_n[2])
        throw std::invalid_argument("model config: grid_n disagrees with the grid extents");
    cfg.validate();
    return cfg;
}

uint64_t file_digest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(str("file_digest: cannot open '", path, "'"));
    const std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return fnv1a64(buf.data(), buf.size());
}

} // namespace woc
