#include "woc/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "woc/camera.h"
#include "woc/common.h"
#include "woc/optim.h"
#include "woc/rng.h"

namespace woc {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
    if (v.empty()) return kNan;
    for (double x : v)
        if (std::isnan(x)) return kNan;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

// ---- Datasets ---------------------------------------------------------------

dataset load_dataset(const occ_model& m, const std::string& dir) {
    const std::vector<manifest_entry> manifest = read_manifest(dir);
    if (manifest.empty()) throw std::runtime_error(str("dataset '", dir, "' lists no scenes"));
    dataset out;
    out.spec = m.cfg.spec;
    out.scenes.reserve(manifest.size());
    for (const manifest_entry& e : manifest) {
        const scene_record rec = read_scene_pack(dir + "/" + e.file);
        if (!(rec.spec == out.spec))
            throw std::runtime_error(
                str("dataset '", dir, "': scene '", e.file, "' uses a different grid spec"));
        if (!(rec.weather == e.weather))
            throw std::runtime_error(
                str("dataset '", dir, "': scene '", e.file, "' disagrees with the manifest flags"));
        out.scenes.push_back(encode_scene(m, rec));
    }
    return out;
}

// ---- Training ----------------------------------------------------------------

void train_cfg::validate() const {
    if (epochs < 1) throw std::invalid_argument("train_cfg: epochs must be >= 1");
    if (!(opt.lr > 0.0)) throw std::invalid_argument("train_cfg: learning rate must be positive");
}

train_result train(occ_model& m, const dataset& data, const train_cfg& cfg, std::ostream& log) {
    cfg.validate();
    if (data.scenes.empty()) throw std::invalid_argument("train: dataset is empty");
    if (!(data.spec == m.cfg.spec))
        throw std::invalid_argument("train: dataset grid spec does not match the model");
    apply_freeze_policy(m);

    adamw opt = cfg.opt;
    train_result result;
    std::vector<int> order(data.scenes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);

    log << "# epoch\ttotal\tce\tlovasz\tocc\tweather\tweather_acc\tseconds\n";
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        rng shuffle_rng(mix_seed(cfg.seed, uint64_t(epoch)));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(int64_t(i))]);

        epoch_stats stats;
        stats.epoch = epoch;
        int flag_hits = 0;
        for (int idx : order) {
            const scene_ctx& ctx = data.scenes[idx];
            graph g(&m.params);
            const scene_graph sg = build_scene_graph(
                g, m, ctx, select_prompt(ctx.weather.rainy, ctx.weather.night));
            const loss_vars lv =
                total_loss_node(g, sg.occ_logits, ctx.entries, sg.weather.rainy, sg.weather.night,
                                ctx.weather.rainy, ctx.weather.night, m.cfg.loss);
            const loss_breakdown b = read_breakdown(g, lv);
            if (!std::isfinite(b.total))
                throw std::runtime_error(str("train: non-finite loss at step ", result.steps,
                                             " (epoch ", epoch, ", scene ", idx, ")"));
            m.params.zero_grad();
            g.backward(lv.total);
            opt.step(m.params);
            ++result.steps;

            stats.total += b.total;
            stats.ce += b.ce;
            stats.lovasz += b.lovasz;
            stats.occ += b.occ;
            stats.weather += b.weather;
            flag_hits += predict_flag(g.val(sg.weather.rainy).data[0]) == ctx.weather.rainy;
            flag_hits += predict_flag(g.val(sg.weather.night).data[0]) == ctx.weather.night;
        }
        const double n = double(data.scenes.size());
        stats.total /= n;
        stats.ce /= n;
        stats.lovasz /= n;
        stats.occ /= n;
        stats.weather /= n;
        stats.weather_acc = flag_hits / (2.0 * n);
        stats.seconds = seconds_since(t0);

        char line[256];
        std::snprintf(line, sizeof line, "%d\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.4f\t%.3f\n",
                      stats.epoch, stats.total, stats.ce, stats.lovasz, stats.occ, stats.weather,
                      stats.weather_acc, stats.seconds);
        log << line;
        result.epochs.push_back(stats);
    }
    return result;
}

// ---- Evaluation --------------------------------------------------------------

namespace {

struct scene_eval {
    eval_scene_outcome out;
    confusion_counts counts{1}; // placeholder until the scene result lands
};

} // namespace

eval_report evaluate(occ_model& m, const dataset& data, const eval_cfg& cfg) {
    if (data.scenes.empty()) throw std::invalid_argument("evaluate: dataset is empty");
    if (!(data.spec == m.cfg.spec))
        throw std::invalid_argument("evaluate: dataset grid spec does not match the model");

    eval_report rep;
    rep.num_classes = m.cfg.num_classes;
    rep.overall = confusion_counts(m.cfg.num_classes);
    const weather_heads heads{m.params.get("rainy_w").value, m.params.get("rainy_b").value,
                              m.params.get("night_w").value, m.params.get("night_b").value};

    // Forward passes only read the model, so scenes can run on any thread;
    // everything order-sensitive happens in the fold below.
    const size_t n = data.scenes.size();
    std::vector<scene_eval> results(n);
    auto eval_one = [&](size_t i) {
        const scene_ctx& ctx = data.scenes[i];
        scene_eval r;
        const auto [rainy_logit, night_logit] = weather_logits(ctx.pooled, heads);
        r.out.gt = ctx.weather;
        r.out.pred_rainy = predict_flag(rainy_logit);
        r.out.pred_night = predict_flag(night_logit);

        const int prompt = cfg.gt_prompts
                               ? select_prompt(ctx.weather.rainy, ctx.weather.night)
                               : select_prompt(r.out.pred_rainy, r.out.pred_night);
        graph g(&m.params);
        const scene_graph sg = build_scene_graph(g, m, ctx, prompt);
        const std::vector<uint8_t> pred = argmax_rows(g.val(sg.occ_logits));

        r.counts = confusion_counts(m.cfg.num_classes);
        for (const loss_entry& e : *ctx.entries) r.counts.add(e.label, pred[e.row], e.weight);
        r.out.w_env = sg.has_env ? g.val(sg.w_env).data[0] : kNan;
        results[i] = std::move(r);
    };
    const int threads = std::min<int>(std::max(cfg.threads, 1), static_cast<int>(n));
    if (threads <= 1) {
        for (size_t i = 0; i < n; ++i) eval_one(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (size_t i = static_cast<size_t>(t); i < n; i += threads) eval_one(i);
            });
        for (std::thread& th : pool) th.join();
    }

    std::vector<confusion_counts> per_scene;
    std::vector<scene_tag> tags;
    std::array<double, kPromptCount> w_sum{};
    std::array<int, kPromptCount> w_count{};
    int rainy_hits = 0, night_hits = 0;
    for (size_t i = 0; i < n; ++i) {
        const scene_ctx& ctx = data.scenes[i];
        scene_eval& r = results[i];
        rainy_hits += r.out.pred_rainy == ctx.weather.rainy;
        night_hits += r.out.pred_night == ctx.weather.night;
        rep.overall += r.counts;
        per_scene.push_back(r.counts);
        tags.push_back({ctx.weather.rainy, ctx.weather.night});
        if (metric_defined(r.out.w_env)) {
            const int gt_prompt = select_prompt(ctx.weather.rainy, ctx.weather.night);
            w_sum[gt_prompt] += r.out.w_env;
            ++w_count[gt_prompt];
        }
        rep.scenes.push_back(r.out);
    }

    rep.overall_iou = compute_iou(rep.overall);
    rep.conditions = condition_breakdown(per_scene, tags, m.cfg.num_classes);
    rep.rainy_acc = double(rainy_hits) / double(data.scenes.size());
    rep.night_acc = double(night_hits) / double(data.scenes.size());
    for (int p = 0; p < kPromptCount; ++p)
        rep.mean_w_env[p] = w_count[p] > 0 ? w_sum[p] / w_count[p] : kNan;
    return rep;
}

// ---- Tables -------------------------------------------------------------------

std::string format_metric(double v) {
    if (std::isnan(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

namespace {

std::string format_ms(double v) {
    if (std::isnan(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

} // namespace

std::string render_table(const text_table& t, bool tsv) {
    std::string out;
    if (tsv) {
        auto emit = [&out](const std::vector<std::string>& cells) {
            for (size_t i = 0; i < cells.size(); ++i) {
                if (i) out += '\t';
                out += cells[i];
            }
            out += '\n';
        };
        emit(t.header);
        for (const auto& row : t.rows) emit(row);
        return out;
    }
    std::vector<size_t> width(t.header.size(), 0);
    auto widen = [&width](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size() && i < width.size(); ++i)
            width[i] = std::max(width[i], cells[i].size());
    };
    widen(t.header);
    for (const auto& row : t.rows) widen(row);
    auto emit = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out += "  ";
            const size_t pad = width[i] - cells[i].size();
            if (i == 0) { // names left-aligned, numbers right-aligned
                out += cells[i];
                if (i + 1 < cells.size()) out.append(pad, ' ');
            } else {
                out.append(pad, ' ');
                out += cells[i];
            }
        }
        out += '\n';
    };
    emit(t.header);
    for (const auto& row : t.rows) emit(row);
    return out;
}

text_table condition_table(const eval_report& rep) {
    text_table t;
    t.header = {"condition", "scenes", "mIoU", "IoU"};
    const iou_report& o = rep.overall_iou;
    t.rows.push_back({"Overall", std::to_string(rep.scenes.size()), format_metric(o.miou),
                      format_metric(o.binary_iou)});
    for (const condition_row& row : rep.conditions) {
        const iou_report r = compute_iou(row.counts);
        t.rows.push_back({row.name, std::to_string(row.scenes), format_metric(r.miou),
                          format_metric(r.binary_iou)});
    }
    return t;
}

text_table per_class_table(const eval_report& rep) {
    text_table t;
    t.header = {"class", "name", "IoU"};
    for (int c = 1; c <= rep.num_classes; ++c)
        t.rows.push_back(
            {std::to_string(c), class_name(c), format_metric(rep.overall_iou.per_class[c])});
    return t;
}

// ---- Strategy comparison -------------------------------------------------------

namespace {

double condition_miou(const eval_report& rep, const char* name) {
    for (const condition_row& row : rep.conditions)
        if (row.name == name) return compute_iou(row.counts).miou;
    return kNan;
}

} // namespace

compare_result compare(const compare_cfg& cfg, const dataset& train_data,
                       const dataset& eval_data, std::ostream& log) {
    if (cfg.strategies.size() < 2)
        throw std::invalid_argument("compare: need at least two strategies");
    if (cfg.seeds < 1) throw std::invalid_argument("compare: need at least one seed");

    const std::vector<bench_row> latency =
        bench_fusion(cfg.model.c, cfg.model.spec, cfg.bench_reps, 424242);

    compare_result result;
    for (const fusion_strategy strategy : cfg.strategies) {
        strategy_outcome row;
        row.strategy = strategy;
        std::vector<double> miou, biou, rainy, day, night, racc, nacc;
        std::array<std::vector<double>, kPromptCount> wenv;
        for (int s = 0; s < cfg.seeds; ++s) {
            const uint64_t seed = cfg.base_seed + uint64_t(s);
            model_cfg mc = cfg.model;
            mc.strategy = strategy;
            mc.model_seed = seed;
            occ_model m = build_model(mc);
            train_cfg tc = cfg.train;
            tc.seed = seed;
            const train_result tr = train(m, train_data, tc, log);
            const eval_report rep = evaluate(m, eval_data, eval_cfg{});
            miou.push_back(rep.overall_iou.miou);
            biou.push_back(rep.overall_iou.binary_iou);
            rainy.push_back(condition_miou(rep, "Rainy"));
            day.push_back(condition_miou(rep, "Day"));
            night.push_back(condition_miou(rep, "Night"));
            racc.push_back(rep.rainy_acc);
            nacc.push_back(rep.night_acc);
            for (int p = 0; p < kPromptCount; ++p) wenv[p].push_back(rep.mean_w_env[p]);
            log << "compare: strategy=" << fusion_strategy_name(strategy) << " seed=" << seed
                << " steps=" << tr.steps << " mIoU=" << format_metric(rep.overall_iou.miou)
                << "\n";
        }
        row.per_seed_miou = miou;
        row.miou = median(miou);
        row.binary_iou = median(biou);
        row.rainy_miou = median(rainy);
        row.day_miou = median(day);
        row.night_miou = median(night);
        row.rainy_acc = median(racc);
        row.night_acc = median(nacc);
        for (int p = 0; p < kPromptCount; ++p) row.mean_w_env[p] = median(wenv[p]);
        row.fusion_ms = kNan;
        for (const bench_row& b : latency)
            if (b.strategy == strategy) row.fusion_ms = b.median_ms;
        result.rows.push_back(std::move(row));
    }
    return result;
}

text_table compare_table(const compare_result& r) {
    // Latency stays out of this table so identical runs render identical
    // bytes; bench_table carries the timing side. The two trust columns are
    // the poles of the weather spread: clear-day and rainy-night scenes.
    text_table t;
    t.header = {"strategy", "mIoU",     "IoU",      "Rainy",      "Day",
                "Night",    "rainyAcc", "nightAcc", "w_clearday", "w_rainynight"};
    for (const strategy_outcome& row : r.rows)
        t.rows.push_back({fusion_strategy_name(row.strategy), format_metric(row.miou),
                          format_metric(row.binary_iou), format_metric(row.rainy_miou),
                          format_metric(row.day_miou), format_metric(row.night_miou),
                          format_metric(row.rainy_acc), format_metric(row.night_acc),
                          format_ms(row.mean_w_env[size_t(select_prompt(false, false))]),
                          format_ms(row.mean_w_env[size_t(select_prompt(true, true))])});
    return t;
}

// ---- Fusion microbenchmark ------------------------------------------------------

std::vector<bench_row> bench_fusion(int c, const grid_spec& spec, int reps, uint64_t seed) {
    if (reps < 10) throw std::invalid_argument("bench_fusion: need at least 10 repetitions");
    rng r(seed);
    const int64_t cells = spec.voxel_count();
    auto random_volume = [&](feature_role role) {
        tensor vol({c, spec.nx, spec.ny, spec.nz});
        for (double& v : vol.data) v = r.uniform(-1.0, 1.0);
        return voxel_features(c, role, std::move(vol));
    };
    const voxel_features cam = random_volume(feature_role::camera);
    const voxel_features pts = random_volume(feature_role::lidar);

    fusion_context ctx;
    ctx.f_env = tensor({1, 1});
    ctx.f_proj = tensor({1, c});
    ctx.g_cam = tensor({1, c});
    ctx.g_pts = tensor({1, c});
    for (int i = 0; i < c; ++i) {
        ctx.g_cam.data[i] = r.uniform(0.1, 0.9);
        ctx.g_pts.data[i] = r.uniform(0.1, 0.9);
    }
    ctx.w_env = 0.6;
    const concat_reducer_params reducer = make_concat_reducer(c);

    std::vector<bench_row> rows;
    for (const fusion_strategy strategy :
         {fusion_strategy::addition, fusion_strategy::concatenation, fusion_strategy::gated}) {
        auto run_once = [&]() {
            if (strategy == fusion_strategy::gated) return fuse(cam, pts, ctx);
            return fuse_baseline(strategy, cam, pts, &reducer);
        };
        volatile double sink = 0.0;
        for (int i = 0; i < 3; ++i) sink = sink + run_once().volume.data[0]; // warmup
        std::vector<double> ms(reps);
        for (int i = 0; i < reps; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const voxel_features out = run_once();
            ms[i] = seconds_since(t0) * 1e3;
            sink = sink + out.volume.data[0];
        }
        std::sort(ms.begin(), ms.end());
        bench_row row;
        row.strategy = strategy;
        row.voxels = cells;
        row.median_ms = median(ms);
        const size_t p95 = std::min(ms.size() - 1, size_t(std::ceil(0.95 * reps)) - 1);
        row.p95_ms = ms[p95];
        row.per_voxel_ns = row.median_ms * 1e6 / double(cells);
        rows.push_back(row);
    }
    return rows;
}

text_table bench_table(const std::vector<bench_row>& rows) {
    text_table t;
    t.header = {"strategy", "voxels", "median_ms", "p95_ms", "per_voxel_ns"};
    for (const bench_row& row : rows)
        t.rows.push_back({fusion_strategy_name(row.strategy), std::to_string(row.voxels),
                          format_ms(row.median_ms), format_ms(row.p95_ms),
                          format_ms(row.per_voxel_ns)});
    return t;
}

// ---- Gradient checking ----------------------------------------------------------

namespace {

// Toy-shaped model: small enough that central differences over every element
// finish in seconds, structured identically to the desk model.
model_cfg gradcheck_cfg(fusion_strategy strategy) {
    model_cfg cfg;
    cfg.spec = grid_spec::from_extents(-2.0, 2.0, -2.0, 2.0, 0.0, 1.5, 0.5);
    cfg.rig.cameras = 2;
    cfg.rig.h_img = 4;
    cfg.rig.w_img = 4;
    cfg.rig.c_img = 5;
    cfg.rig.height = 0.8;
    cfg.bins = depth_bins{0.4, 3.2, 5};
    cfg.c = 4;
    cfg.num_classes = 3;
    cfg.d_txt = 8;
    cfg.d_env = 6;
    cfg.lora = lora_cfg{2, 4.0};
    cfg.strategy = strategy;
    return cfg;
}

// Random feature maps, points and labels: every pathway sees varied input,
// unlike a generated scene at this toy grid size.
scene_record random_probe_record(const model_cfg& cfg, uint64_t seed, weather_flags weather) {
    rng r(seed);
    scene_record rec;
    rec.spec = cfg.spec;
    rec.weather = weather;
    rec.cameras = build_rig(cfg.rig);
    for (int k = 0; k < cfg.rig.cameras; ++k) {
        tensor map({cfg.rig.c_img, cfg.rig.h_img, cfg.rig.w_img});
        for (double& v : map.data) v = r.uniform(0.0, 1.0);
        rec.feature_maps.push_back(std::move(map));
    }
    for (int i = 0; i < 40; ++i) {
        const float x = float(r.uniform(cfg.spec.x_min, cfg.spec.x_max - 1e-3));
        const float y = float(r.uniform(cfg.spec.y_min, cfg.spec.y_max - 1e-3));
        const float z = float(r.uniform(cfg.spec.z_min, cfg.spec.z_max - 1e-3));
        rec.cloud.pts.push_back({x, y, z, float(r.uniform(0.1, 1.0))});
    }
    rec.labels.resize(size_t(cfg.spec.voxel_count()));
    for (auto& l : rec.labels) {
        const double u = r.uniform();
        l = u < 0.05 ? kLabelIgnore : uint8_t(r.uniform_int(cfg.num_classes + 1));
    }
    return rec;
}

struct pathway_spec {
    const char* name;
    fusion_strategy strategy;
    std::vector<const char*> params;
};

const std::vector<pathway_spec>& gradcheck_pathways() {
    static const std::vector<pathway_spec> pathways = {
        {"lift_splat_depth", fusion_strategy::gated, {"lift_depth_w", "lift_depth_b", "lift_w"}},
        {"point_encoder", fusion_strategy::gated, {"pts_w1", "pts_b1", "pts_w2", "pts_b2"}},
        {"lora_adapter", fusion_strategy::gated, {"lora_a", "lora_b"}},
        {"env_projection", fusion_strategy::gated, {"proj_w", "proj_b"}},
        {"gating_masks",
         fusion_strategy::gated,
         {"gate_cam_w", "gate_cam_b", "gate_pts_w", "gate_pts_b"}},
        {"trust_mlp", fusion_strategy::gated, {"trust_w", "trust_b"}},
        {"occupancy_head", fusion_strategy::gated, {"occ_w1", "occ_b1", "occ_w2", "occ_b2"}},
        {"weather_heads", fusion_strategy::gated, {"rainy_w", "rainy_b", "night_w", "night_b"}},
        {"concat_reducer", fusion_strategy::concatenation, {"reduce_w", "reduce_b"}},
    };
    return pathways;
}

struct strategy_grads {
    occ_model model;
    std::vector<tensor> fd;
};

strategy_grads gradcheck_run_strategy(fusion_strategy strategy, uint64_t seed) {
    strategy_grads out{build_model(gradcheck_cfg(strategy)), {}};
    occ_model& m = out.model;
    {
        // A zero-initialized B factor would hide lora_a from the check.
        rng r(mix_seed(seed, 0xb0b));
        for (double& v : m.params.get("lora_b").value.data) v = r.normal(0.0, 0.3);
    }
    const scene_record rec = random_probe_record(m.cfg, mix_seed(seed, 1), {true, false});
    const scene_ctx ctx = encode_scene(m, rec);
    const int prompt = select_prompt(ctx.weather.rainy, ctx.weather.night);

    auto build = [&m, &ctx, prompt](graph& g) {
        const scene_graph sg = build_scene_graph(g, m, ctx, prompt);
        const loss_vars lv = total_loss_node(g, sg.occ_logits, ctx.entries, sg.weather.rainy,
                                             sg.weather.night, ctx.weather.rainy,
                                             ctx.weather.night, m.cfg.loss);
        return lv.total;
    };
    graph g(&m.params);
    m.params.zero_grad();
    g.backward(build(g));
    out.fd = finite_diff_grad(m.params, [&]() {
        graph gg(&m.params);
        return gg.val(build(gg)).data[0];
    });
    return out;
}

} // namespace

std::vector<gradcheck_row> run_gradcheck(uint64_t seed, double tolerance,
                                         const std::string& op) {
    if (!(tolerance > 0.0))
        throw std::invalid_argument("gradcheck: tolerance must be positive");
    const auto& pathways = gradcheck_pathways();
    if (!op.empty()) {
        const bool known = std::any_of(pathways.begin(), pathways.end(),
                                       [&op](const pathway_spec& p) { return op == p.name; });
        if (!known) {
            std::string names;
            for (const pathway_spec& p : pathways) {
                if (!names.empty()) names += '|';
                names += p.name;
            }
            throw std::invalid_argument(
                str("gradcheck: unknown pathway '", op, "' (want ", names, ")"));
        }
    }

    std::map<fusion_strategy, strategy_grads> runs;
    std::vector<gradcheck_row> rows;
    for (const pathway_spec& p : pathways) {
        if (!op.empty() && op != p.name) continue;
        auto it = runs.find(p.strategy);
        if (it == runs.end())
            it = runs.emplace(p.strategy, gradcheck_run_strategy(p.strategy, seed)).first;
        const occ_model& m = it->second.model;
        const std::vector<tensor>& fd = it->second.fd;

        gradcheck_row row;
        row.pathway = p.name;
        for (const char* name : p.params) {
            const size_t idx = m.params.index_of(name);
            const param& prm = m.params.items[idx];
            if (!prm.trainable)
                throw std::runtime_error(
                    str("gradcheck: param '", name, "' is frozen in its own pathway run"));
            row.max_rel_err = std::max(row.max_rel_err, grad_rel_err(prm.grad, fd[idx]));
            row.checked += prm.value.numel();
        }
        row.pass = row.max_rel_err < tolerance;
        rows.push_back(std::move(row));
    }
    return rows;
}

text_table gradcheck_table(const std::vector<gradcheck_row>& rows) {
    text_table t;
    t.header = {"pathway", "elements", "max_rel_err", "status"};
    for (const gradcheck_row& row : rows) {
        char err[32];
        std::snprintf(err, sizeof err, "%.3e", row.max_rel_err);
        t.rows.push_back({row.pathway, std::to_string(row.checked), err,
                          row.pass ? "ok" : "FAIL"});
    }
    return t;
}

} // namespace woc
