#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "woc/common.h"
#include "woc/pipeline.h"
#include "woc/rng.h"

using namespace woc;

namespace {

struct temp_dir {
    std::string path;
    explicit temp_dir(std::string p) : path(std::move(p)) {
        std::remove((path + "/manifest.txt").c_str());
    }
};

struct temp_file {
    std::string path;
    explicit temp_file(std::string p) : path(std::move(p)) {}
    ~temp_file() { std::remove(path.c_str()); }
};

// Generates a small desk-grid dataset into `dir` and returns its manifest.
std::vector<manifest_entry> make_dataset_dir(const std::string& dir, int scenes, uint64_t seed,
                                             std::array<double, 4> mix = {0.25, 0.25, 0.25,
                                                                          0.25}) {
    dataset_gen_cfg cfg;
    cfg.scenes = scenes;
    cfg.seed = seed;
    cfg.mix = mix;
    std::ostringstream sink;
    return generate_dataset(cfg, dir, sink);
}

uint64_t encoder_digest(const frozen_text_encoder& enc) {
    uint64_t h = fnv1a64(enc.w_txt.data.data(), enc.w_txt.data.size() * sizeof(double));
    for (const tensor& e : enc.e_prompt)
        h = fnv1a64(e.data.data(), e.data.size() * sizeof(double), h);
    return h;
}

uint64_t param_digest(const occ_model& m, const std::string& name) {
    const tensor& v = m.params.get(name).value;
    return fnv1a64(v.data.data(), v.data.size() * sizeof(double));
}

} // namespace

TEST_CASE("load_dataset: roundtrip, flag agreement and spec policing") {
    const std::string dir = "pipe_data_load";
    const auto manifest = make_dataset_dir(dir, 4, 11);
    REQUIRE(manifest.size() == 4);

    occ_model m = build_model(model_cfg{});
    const dataset data = load_dataset(m, dir);
    REQUIRE(data.scenes.size() == 4);
    for (size_t i = 0; i < data.scenes.size(); ++i)
        CHECK(data.scenes[i].weather == manifest[i].weather);

    // A scene with a different grid spec is rejected up front.
    {
        scene_record alien;
        alien.spec = grid_spec::from_extents(-2.0, 2.0, -2.0, 2.0, 0.0, 1.0, 0.5);
        alien.weather = {};
        alien.cameras = build_rig(camera_rig_cfg{});
        for (int k = 0; k < 4; ++k) alien.feature_maps.push_back(tensor({16, 32, 32}));
        alien.labels.assign(alien.spec.voxel_count(), 0);
        write_scene_pack(dir + "/alien.wocpack", alien);
        std::ofstream mf(dir + "/manifest.txt", std::ios::app);
        mf << "alien.wocpack\t0\t0\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(m, dir),
                         "dataset 'pipe_data_load': scene 'alien.wocpack' uses a different grid "
                         "spec",
                         std::runtime_error);
    CHECK_THROWS_AS(load_dataset(m, "no_such_dir"), std::runtime_error);
}

TEST_CASE("train: single-scene overfit drops the loss monotonically at first") {
    const std::string dir = "pipe_data_overfit";
    make_dataset_dir(dir, 1, 21, {0.0, 0.0, 0.0, 1.0});
    occ_model m = build_model(model_cfg{});
    const dataset data = load_dataset(m, dir);

    train_cfg tc;
    tc.epochs = 50; // one scene -> one step per epoch
    std::ostringstream log;
    const train_result tr = train(m, data, tc, log);
    REQUIRE(tr.steps == 50);
    REQUIRE(tr.epochs.size() == 50);
    for (int i = 1; i < 10; ++i) {
        INFO("step ", i);
        CHECK(tr.epochs[i].total < tr.epochs[i - 1].total);
    }
    CHECK(tr.epochs.back().total < tr.epochs.front().total);
    // The log carries one line per epoch plus the header.
    int lines = 0;
    for (char ch : log.str()) lines += ch == '\n';
    CHECK(lines == 51);
}

TEST_CASE("train + evaluate: identical seeds give identical artifacts") {
    const std::string dir = "pipe_data_det";
    make_dataset_dir(dir, 3, 31);

    auto run = [&](const std::string& ckpt) {
        occ_model m = build_model(model_cfg{});
        const dataset data = load_dataset(m, dir);
        train_cfg tc;
        tc.epochs = 2;
        tc.seed = 5;
        std::ostringstream log;
        train(m, data, tc, log);
        save_checkpoint(ckpt, m, "determinism probe");
        const eval_report rep = evaluate(m, data, eval_cfg{});
        return render_table(condition_table(rep), false) + render_table(per_class_table(rep), true);
    };
    temp_file a("pipe_det_a.ckpt"), b("pipe_det_b.ckpt");
    const std::string tables_a = run(a.path);
    const std::string tables_b = run(b.path);
    CHECK(file_digest(a.path) == file_digest(b.path));
    CHECK(tables_a == tables_b);
}

TEST_CASE("train: freeze contracts hold end to end") {
    const std::string dir = "pipe_data_freeze";
    make_dataset_dir(dir, 2, 41);

    SUBCASE("zero weather weight leaves the weather heads untouched") {
        model_cfg cfg;
        cfg.loss.lambda_weather = 0.0;
        occ_model m = build_model(cfg);
        const dataset data = load_dataset(m, dir);
        const uint64_t rainy_before = param_digest(m, "rainy_w");
        const uint64_t night_before = param_digest(m, "night_b");
        train_cfg tc;
        tc.epochs = 2;
        std::ostringstream log;
        train(m, data, tc, log);
        CHECK(param_digest(m, "rainy_w") == rainy_before);
        CHECK(param_digest(m, "night_b") == night_before);
        CHECK(m.params.get("rainy_w").m.max_abs() == 0.0); // no optimizer state either
    }

    SUBCASE("baseline strategies never move the environment pathway") {
        model_cfg cfg;
        cfg.strategy = fusion_strategy::addition;
        occ_model m = build_model(cfg);
        const dataset data = load_dataset(m, dir);
        const uint64_t enc_before = encoder_digest(m.encoder);
        std::vector<uint64_t> before;
        for (const std::string& n : envgate_param_names()) before.push_back(param_digest(m, n));
        const uint64_t txt_before = param_digest(m, "txt_w");
        const uint64_t reduce_before = param_digest(m, "reduce_w");
        const uint64_t occ_before = param_digest(m, "occ_w1");

        train_cfg tc;
        tc.epochs = 2;
        std::ostringstream log;
        train(m, data, tc, log);

        CHECK(encoder_digest(m.encoder) == enc_before);
        for (size_t i = 0; i < before.size(); ++i) {
            INFO("param ", envgate_param_names()[i]);
            CHECK(param_digest(m, envgate_param_names()[i]) == before[i]);
        }
        CHECK(param_digest(m, "txt_w") == txt_before);
        CHECK(param_digest(m, "reduce_w") == reduce_before); // unused by addition
        CHECK(param_digest(m, "occ_w1") != occ_before);      // the head did train
    }

    SUBCASE("gated training moves the adapter but not the frozen encoder") {
        occ_model m = build_model(model_cfg{});
        const dataset data = load_dataset(m, dir);
        const uint64_t enc_before = encoder_digest(m.encoder);
        const uint64_t txt_before = param_digest(m, "txt_w");
        const uint64_t lora_before = param_digest(m, "lora_b");
        const uint64_t reduce_before = param_digest(m, "reduce_w");
        train_cfg tc;
        tc.epochs = 2;
        std::ostringstream log;
        train(m, data, tc, log);
        CHECK(encoder_digest(m.encoder) == enc_before);
        CHECK(param_digest(m, "txt_w") == txt_before);
        CHECK(param_digest(m, "lora_b") != lora_before);
        CHECK(param_digest(m, "reduce_w") == reduce_before);
    }
}

TEST_CASE("train: a non-finite loss aborts with the step named") {
    const std::string dir = "pipe_data_nan";
    make_dataset_dir(dir, 1, 51);
    occ_model m = build_model(model_cfg{});
    const dataset data = load_dataset(m, dir);
    m.params.get("occ_w1").value.data[0] = std::numeric_limits<double>::quiet_NaN();
    train_cfg tc;
    tc.epochs = 1;
    std::ostringstream log;
    CHECK_THROWS_WITH_AS(train(m, data, tc, log), "train: non-finite loss at step 0 (epoch 1, "
                                                  "scene 0)",
                         std::runtime_error);
}

TEST_CASE("evaluate: runs untrained and honors prompt sourcing") {
    const std::string dir = "pipe_data_eval";
    make_dataset_dir(dir, 3, 61, {1.0, 0.0, 0.0, 0.0}); // all clear-day
    occ_model m = build_model(model_cfg{});
    const dataset data = load_dataset(m, dir);

    // Untrained smoke: tables render, metrics are defined or n/a, no crash.
    const eval_report smoke = evaluate(m, data, eval_cfg{});
    CHECK(smoke.scenes.size() == 3);
    CHECK(render_table(condition_table(smoke), false).size() > 0);

    // Pin the heads to certain clear-day predictions: 100% accuracy here.
    for (const char* n : {"rainy_w", "night_w"})
        for (double& v : m.params.get(n).value.data) v = 0.0;
    m.params.get("rainy_b").value.data[0] = -10.0;
    m.params.get("night_b").value.data[0] = -10.0;

    const eval_report pred = evaluate(m, data, eval_cfg{false});
    const eval_report forced = evaluate(m, data, eval_cfg{true});
    CHECK(pred.rainy_acc == 1.0);
    CHECK(pred.night_acc == 1.0);
    CHECK(render_table(condition_table(pred), true) == render_table(condition_table(forced), true));
    CHECK(render_table(per_class_table(pred), true) ==
          render_table(per_class_table(forced), true));

    // Gated model on clear-day scenes: w_env recorded under the clear-day slot.
    CHECK(metric_defined(pred.mean_w_env[select_prompt(false, false)]));
    CHECK_FALSE(metric_defined(pred.mean_w_env[select_prompt(true, true)]));
    for (const eval_scene_outcome& s : pred.scenes) CHECK(metric_defined(s.w_env));

    // Baselines report no trust scalar.
    model_cfg add_cfg;
    add_cfg.strategy = fusion_strategy::addition;
    occ_model ma = build_model(add_cfg);
    const eval_report base = evaluate(ma, data, eval_cfg{});
    for (const eval_scene_outcome& s : base.scenes) CHECK_FALSE(metric_defined(s.w_env));
    CHECK_FALSE(metric_defined(base.mean_w_env[0]));
}

TEST_CASE("tables: deterministic rendering in both forms") {
    text_table t;
    t.header = {"name", "a", "b"};
    t.rows = {{"alpha", "1.00", "2.25"}, {"bx", "10.50", "n/a"}};
    CHECK(render_table(t, true) == "name\ta\tb\nalpha\t1.00\t2.25\nbx\t10.50\tn/a\n");
    CHECK(render_table(t, false) == "name       a     b\n"
                                    "alpha   1.00  2.25\n"
                                    "bx     10.50   n/a\n");
    CHECK(format_metric(std::numeric_limits<double>::quiet_NaN()) == "n/a");
    CHECK(format_metric(0.415) == "41.50");
    CHECK(format_metric(1.0) == "100.00");
    CHECK(format_metric(7.0 / 12.0) == "58.33");
}

TEST_CASE("bench_fusion: ordering, shape and validation") {
    const auto rows = bench_fusion(16, desk_spec(), 20, 5);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].strategy == fusion_strategy::addition);
    CHECK(rows[2].strategy == fusion_strategy::gated);
    for (const bench_row& r : rows) {
        CHECK(r.voxels == desk_spec().voxel_count());
        CHECK(r.median_ms > 0.0);
        CHECK(r.p95_ms >= r.median_ms);
        CHECK(r.per_voxel_ns == doctest::Approx(r.median_ms * 1e6 / double(r.voxels)));
        CHECK(r.median_ms < 50.0); // elementwise pass over a 12,800-voxel grid
    }
    CHECK_THROWS_AS(bench_fusion(16, desk_spec(), 5, 1), std::invalid_argument);
    CHECK(render_table(bench_table(rows), true).find("per_voxel_ns") != std::string::npos);
}

TEST_CASE("compare: layout and strategy determinism") {
    const std::string dir = "pipe_data_cmp";
    make_dataset_dir(dir, 3, 71);
    occ_model probe = build_model(model_cfg{});
    const dataset data = load_dataset(probe, dir);

    compare_cfg cc;
    cc.strategies = {fusion_strategy::addition, fusion_strategy::addition,
                     fusion_strategy::gated};
    cc.seeds = 1;
    cc.train.epochs = 1;
    cc.bench_reps = 10;
    std::ostringstream log;
    const compare_result res = compare(cc, data, data, log);
    REQUIRE(res.rows.size() == 3);
    // The same strategy with the same seed reproduces its row exactly.
    CHECK(res.rows[0].miou == res.rows[1].miou);
    CHECK(res.rows[0].binary_iou == res.rows[1].binary_iou);
    CHECK(res.rows[0].night_miou == res.rows[1].night_miou);
    for (const strategy_outcome& row : res.rows) {
        CHECK(row.per_seed_miou.size() == 1);
        CHECK(metric_defined(row.miou));
        CHECK(row.fusion_ms > 0.0);
    }
    const std::string table = render_table(compare_table(res), false);
    CHECK(table.find("addition") != std::string::npos);
    CHECK(table.find("gated") != std::string::npos);

    compare_cfg bad;
    bad.strategies = {fusion_strategy::gated};
    CHECK_THROWS_AS(compare(bad, data, data, log), std::invalid_argument);
}
