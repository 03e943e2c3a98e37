#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "woc/common.h"
#include "woc/envgate.h"
#include "woc/graph.h"
#include "woc/optim.h"
#include "woc/rng.h"

using namespace woc;

namespace {

tensor random_tensor(std::vector<int64_t> shape, rng& r, double lo = -1.0, double hi = 1.0) {
    tensor t(std::move(shape));
    for (double& v : t.data) v = r.uniform(lo, hi);
    return t;
}

bool same_bytes(const tensor& a, const tensor& b) {
    return a.shape == b.shape &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

frozen_text_encoder small_encoder(int d_txt = 6, int d_env = 4, uint64_t seed = 11) {
    return make_frozen_encoder(prompt_set::defaults(), d_txt, d_env, seed);
}

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "woc_envgate_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("select_prompt: bijection over the four flag pairs") {
    CHECK(select_prompt(false, false) == 0);
    CHECK(select_prompt(false, true) == 1);
    CHECK(select_prompt(true, false) == 2);
    CHECK(select_prompt(true, true) == 3);
    std::set<int> ids;
    for (bool rainy : {false, true})
        for (bool night : {false, true}) ids.insert(select_prompt(rainy, night));
    CHECK(ids.size() == 4);

    const prompt_set prompts = prompt_set::defaults();
    prompts.validate();
    CHECK(prompts.prompts[select_prompt(true, true)].find("rainy night") != std::string::npos);
    CHECK(prompts.prompts[select_prompt(false, false)].find("clear day") != std::string::npos);

    prompt_set broken = prompts;
    broken.prompts[2] = broken.prompts[1];
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
}

TEST_CASE("frozen encoder: unit embeddings, determinism, distinct prompts") {
    const frozen_text_encoder enc = make_frozen_encoder(prompt_set::defaults(), 64, 32, 7);
    CHECK(enc.w_txt.shape == std::vector<int64_t>{32, 64});
    for (int i = 0; i < kPromptCount; ++i) {
        REQUIRE(enc.e_prompt[i].shape == std::vector<int64_t>{1, 64});
        double norm = 0.0;
        for (double v : enc.e_prompt[i].data) norm += v * v;
        CHECK(std::fabs(std::sqrt(norm) - 1.0) <= 1e-12);
        for (int j = i + 1; j < kPromptCount; ++j)
            CHECK_FALSE(same_bytes(enc.e_prompt[i], enc.e_prompt[j]));
    }
    const frozen_text_encoder again = make_frozen_encoder(prompt_set::defaults(), 64, 32, 7);
    CHECK(same_bytes(again.w_txt, enc.w_txt));
    for (int i = 0; i < kPromptCount; ++i) CHECK(same_bytes(again.e_prompt[i], enc.e_prompt[i]));
    const frozen_text_encoder other = make_frozen_encoder(prompt_set::defaults(), 64, 32, 8);
    CHECK_FALSE(same_bytes(other.w_txt, enc.w_txt));
}

TEST_CASE("encode_env: zero adapter reproduces the frozen projection exactly") {
    const frozen_text_encoder enc = small_encoder();
    const lora_cfg cfg{2, 8.0};
    const tensor a = tensor::zeros({2, 6});
    const tensor b = tensor::zeros({4, 2});
    for (int id = 0; id < kPromptCount; ++id) {
        const tensor f_env = encode_env(id, enc, cfg, a, b);
        tensor base({1, 4});
        kern::matmul_nt(enc.e_prompt[id].ptr(), enc.w_txt.ptr(), base.ptr(), 1, 6, 4, false);
        CHECK(same_bytes(f_env, base));
    }
    // Distinct prompts stay distinct through the frozen map.
    CHECK_FALSE(same_bytes(encode_env(0, enc, cfg, a, b), encode_env(3, enc, cfg, a, b)));
    // Identical flags -> identical embedding, bit for bit.
    CHECK(same_bytes(encode_env(2, enc, cfg, a, b), encode_env(2, enc, cfg, a, b)));
}

TEST_CASE("encode_env: adapter shape and prompt id violations rejected") {
    const frozen_text_encoder enc = small_encoder();
    const lora_cfg cfg{2, 8.0};
    const tensor a = tensor::zeros({2, 6});
    const tensor b = tensor::zeros({4, 2});
    CHECK_THROWS_AS(encode_env(4, enc, cfg, a, b), std::invalid_argument);
    CHECK_THROWS_AS(encode_env(-1, enc, cfg, a, b), std::invalid_argument);
    CHECK_THROWS_AS(encode_env(0, enc, cfg, tensor::zeros({3, 6}), b), std::invalid_argument);
    CHECK_THROWS_AS(encode_env(0, enc, cfg, a, tensor::zeros({4, 3})), std::invalid_argument);
    CHECK_THROWS_AS((lora_cfg{0, 8.0}).validate(6, 4), std::invalid_argument);
    CHECK_THROWS_AS((lora_cfg{4, 8.0}).validate(6, 4), std::invalid_argument);
    CHECK_THROWS_AS((lora_cfg{2, -1.0}).validate(6, 4), std::invalid_argument);
}

TEST_CASE("encode_env: gradients flow to A and B only; frozen W_txt untouched") {
    const frozen_text_encoder enc = small_encoder();
    const lora_cfg cfg{2, 8.0};
    rng r(5);
    param_store store;
    store.add("w_txt", enc.w_txt, /*trainable=*/false);
    store.add("lora_a", random_tensor({2, 6}, r));
    store.add("lora_b", random_tensor({4, 2}, r));
    const tensor target = random_tensor({1, 4}, r);

    auto loss_value = [&]() {
        graph g(&store);
        const var f = encode_env_node(g, 1, enc, cfg, g.param("w_txt"), g.param("lora_a"),
                                      g.param("lora_b"));
        return g.val(g.sum(g.mul(f, g.input(target)))).data[0];
    };
    graph g(&store);
    const var f = encode_env_node(g, 1, enc, cfg, g.param("w_txt"), g.param("lora_a"),
                                  g.param("lora_b"));
    store.zero_grad();
    g.backward(g.sum(g.mul(f, g.input(target))));
    const auto fd = finite_diff_grad(store, loss_value);
    CHECK(store.get("w_txt").grad.max_abs() == 0.0);
    CHECK(fd[0].max_abs() == 0.0);
    CHECK(grad_rel_err(store.get("lora_a").grad, fd[1]) < 1e-8);
    CHECK(grad_rel_err(store.get("lora_b").grad, fd[2]) < 1e-8);
    CHECK(store.get("lora_a").grad.max_abs() > 0.0);
    CHECK(store.get("lora_b").grad.max_abs() > 0.0);
}

TEST_CASE("project_env: identity config, zero input, gradcheck") {
    // Identity projection when d_env == C.
    tensor eye = tensor::zeros({4, 4});
    for (int i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    rng r(6);
    const tensor f_env = random_tensor({1, 4}, r);
    CHECK(same_bytes(project_env(f_env, eye, tensor::zeros({4})), f_env));
    // Zero input returns the bias row.
    const tensor bias = random_tensor({3}, r);
    const tensor w = random_tensor({3, 4}, r);
    const tensor from_zero = project_env(tensor::zeros({1, 4}), w, bias);
    for (int i = 0; i < 3; ++i) CHECK(from_zero.data[i] == bias.data[i]);

    param_store store;
    store.add("w_proj", w);
    store.add("b_proj", bias);
    const tensor target = random_tensor({1, 3}, r);
    auto loss_value = [&]() {
        graph g(&store);
        const var p = project_env_node(g, g.input(f_env), g.param("w_proj"), g.param("b_proj"));
        return g.val(g.sum(g.mul(p, g.input(target)))).data[0];
    };
    graph g(&store);
    const var p = project_env_node(g, g.input(f_env), g.param("w_proj"), g.param("b_proj"));
    store.zero_grad();
    g.backward(g.sum(g.mul(p, g.input(target))));
    const auto fd = finite_diff_grad(store, loss_value);
    CHECK(grad_rel_err(store.get("w_proj").grad, fd[0]) < 1e-8);
    CHECK(grad_rel_err(store.get("b_proj").grad, fd[1]) < 1e-8);
}

TEST_CASE("gating_masks and trust_scalar: sigma(0) neutrality and saturation") {
    graph g;
    const var f_proj = g.input(tensor::zeros({1, 3}));
    const gate_vars gates = gating_masks_node(g, f_proj, g.input(tensor::zeros({3, 3})),
                                              g.input(tensor::zeros({3})),
                                              g.input(tensor::zeros({3, 3})),
                                              g.input(tensor::zeros({3})));
    for (double v : g.val(gates.g_cam).data) CHECK(v == 0.5);
    for (double v : g.val(gates.g_pts).data) CHECK(v == 0.5);
    const var w = trust_scalar_node(g, f_proj, g.input(tensor::zeros({1, 3})),
                                    g.input(tensor::zeros({1})));
    CHECK(g.val(w).data[0] == 0.5);

    // Large positive bias saturates the mask to a pass-through.
    const gate_vars open_gate = gating_masks_node(g, f_proj, g.input(tensor::zeros({3, 3})),
                                                  g.input(tensor::full({3}, 100.0)),
                                                  g.input(tensor::zeros({3, 3})),
                                                  g.input(tensor::full({3}, 100.0)));
    for (double v : g.val(open_gate.g_cam).data) CHECK(v >= 1.0 - 1e-12);

    // Trust rises strictly with its pre-activation logit.
    double prev = -1.0;
    for (double logit : {-4.0, -1.0, 0.0, 0.5, 3.0}) {
        const var t = trust_scalar_node(g, f_proj, g.input(tensor::zeros({1, 3})),
                                        g.input(tensor::full({1}, logit)));
        const double value = g.val(t).data[0];
        CHECK(value > prev);
        CHECK(value > 0.0);
        CHECK(value < 1.0);
        prev = value;
    }
}

TEST_CASE("fuse: degenerate Eq.-style limits") {
    rng r(8);
    const int64_t rows = 6, c = 3;
    const tensor cam = random_tensor({rows, c}, r);
    const tensor pts = random_tensor({rows, c}, r);

    graph g;
    // w_env -> 1 and wide-open camera gate: fused output is exactly V_cam.
    const var w_one = g.sigmoid(g.input(tensor::full({1, 1}, 1000.0)));
    const var gate_one = g.sigmoid(g.input(tensor::full({1, c}, 1000.0)));
    const var gate_any = g.sigmoid(g.input(random_tensor({1, c}, r)));
    CHECK(g.val(w_one).data[0] == 1.0);
    const var fused = fuse_node(g, g.input(cam), g.input(pts), gate_one, gate_any, w_one);
    CHECK(same_bytes(g.val(fused), cam));

    // Equal inputs behind unit gates: any trust value returns the input.
    for (double logit : {-3.0, 0.0, 0.7, 5.0}) {
        const var w_any = g.sigmoid(g.input(tensor::full({1, 1}, logit)));
        const var same = fuse_node(g, g.input(cam), g.input(cam), gate_one, gate_one, w_any);
        for (int64_t i = 0; i < rows * c; ++i)
            CHECK(g.val(same).data[i] == doctest::Approx(cam.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("fuse: graph node and dense volumes match a scalar-loop oracle") {
    rng r(99);
    const grid_spec spec = grid_spec::from_extents(-2.0, 2.0, -2.0, 2.0, -1.0, 1.0, 1.0);
    const int c = 4;
    voxel_features cam(c, spec, feature_role::camera);
    voxel_features pts(c, spec, feature_role::lidar);
    for (double& v : cam.volume.data) v = r.uniform(-2.0, 2.0);
    for (double& v : pts.volume.data) v = r.uniform(-2.0, 2.0);
    fusion_context ctx;
    ctx.g_cam = random_tensor({1, c}, r, 0.05, 0.95);
    ctx.g_pts = random_tensor({1, c}, r, 0.05, 0.95);
    ctx.w_env = 0.73;

    const voxel_features fused = fuse(cam, pts, ctx);
    const int64_t cells = spec.voxel_count();
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < cells; ++i) {
            const double want = ctx.w_env * ctx.g_cam.data[ch] * cam.volume.data[ch * cells + i] +
                                (1.0 - ctx.w_env) * ctx.g_pts.data[ch] *
                                    pts.volume.data[ch * cells + i];
            CHECK(std::fabs(fused.volume.data[ch * cells + i] - want) <= 1e-12);
        }

    // Row-major graph node against the same oracle.
    const int64_t rows = 5;
    const tensor cam_rows = random_tensor({rows, c}, r);
    const tensor pts_rows = random_tensor({rows, c}, r);
    graph g;
    const var fused_rows = fuse_node(g, g.input(cam_rows), g.input(pts_rows), g.input(ctx.g_cam),
                                     g.input(ctx.g_pts), g.input(tensor::full({1, 1}, ctx.w_env)));
    for (int64_t rr = 0; rr < rows; ++rr)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double want = ctx.w_env * ctx.g_cam.data[ch] * cam_rows.at(rr, ch) +
                                (1.0 - ctx.w_env) * ctx.g_pts.data[ch] * pts_rows.at(rr, ch);
            CHECK(std::fabs(g.val(fused_rows).at(rr, ch) - want) <= 1e-12);
        }

    // Shape violations.
    voxel_features wrong(c + 1, spec, feature_role::lidar);
    CHECK_THROWS_AS(fuse(cam, wrong, ctx), std::invalid_argument);
    fusion_context bad = ctx;
    bad.g_cam = tensor::zeros({1, c + 2});
    CHECK_THROWS_AS(fuse(cam, pts, bad), std::invalid_argument);
    CHECK_THROWS_AS(fuse_node(g, g.input(cam_rows), g.input(tensor::zeros({rows, c + 1})),
                              g.input(ctx.g_cam), g.input(ctx.g_pts),
                              g.input(tensor::full({1, 1}, 0.5))),
                    std::invalid_argument);
}

TEST_CASE("fuse: full environment pathway matches finite differences") {
    // Prompt -> LoRA -> projection -> gates + trust -> fusion -> scalar loss,
    // checked against the central-difference oracle for every pathway param.
    const frozen_text_encoder enc = small_encoder(6, 4, 21);
    const lora_cfg cfg{2, 8.0};
    const int c = 3;
    rng r(17);
    param_store store;
    store.add("w_txt", enc.w_txt, /*trainable=*/false);
    store.add("lora_a", random_tensor({2, 6}, r));
    store.add("lora_b", random_tensor({4, 2}, r));
    store.add("w_proj", random_tensor({c, 4}, r));
    store.add("b_proj", random_tensor({c}, r));
    store.add("gate_cam_w", random_tensor({c, c}, r));
    store.add("gate_cam_b", random_tensor({c}, r));
    store.add("gate_pts_w", random_tensor({c, c}, r));
    store.add("gate_pts_b", random_tensor({c}, r));
    store.add("trust_w", random_tensor({1, c}, r));
    store.add("trust_b", random_tensor({1}, r));
    const tensor cam_rows = random_tensor({5, c}, r);
    const tensor pts_rows = random_tensor({5, c}, r);
    const tensor target = random_tensor({5, c}, r);

    auto build_loss = [&](graph& g) {
        const var f_env = encode_env_node(g, 3, enc, cfg, g.param("w_txt"), g.param("lora_a"),
                                          g.param("lora_b"));
        const var f_proj = project_env_node(g, f_env, g.param("w_proj"), g.param("b_proj"));
        const gate_vars gates = gating_masks_node(g, f_proj, g.param("gate_cam_w"),
                                                  g.param("gate_cam_b"), g.param("gate_pts_w"),
                                                  g.param("gate_pts_b"));
        const var w_env = trust_scalar_node(g, f_proj, g.param("trust_w"), g.param("trust_b"));
        // Every emitted gate entry and the trust scalar stay strictly inside (0,1).
        for (double v : g.val(gates.g_cam).data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        for (double v : g.val(gates.g_pts).data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        CHECK(g.val(w_env).data[0] > 0.0);
        CHECK(g.val(w_env).data[0] < 1.0);
        const var fused = fuse_node(g, g.input(cam_rows), g.input(pts_rows), gates.g_cam,
                                    gates.g_pts, w_env);
        return g.sum(g.mul(fused, g.input(target)));
    };
    auto loss_value = [&]() {
        graph g(&store);
        return g.val(build_loss(g)).data[0];
    };
    graph g(&store);
    store.zero_grad();
    g.backward(build_loss(g));
    const auto fd = finite_diff_grad(store, loss_value);
    for (size_t i = 0; i < store.items.size(); ++i) {
        INFO("param ", store.items[i].name);
        CHECK(grad_rel_err(store.items[i].grad, fd[i]) < 1e-7);
        if (store.items[i].trainable) CHECK(store.items[i].grad.max_abs() > 0.0);
    }
    CHECK(store.get("w_txt").grad.max_abs() == 0.0);
}

TEST_CASE("fuse_baseline: addition and concatenation semantics") {
    rng r(12);
    const grid_spec spec = grid_spec::from_extents(-2.0, 2.0, -2.0, 2.0, -1.0, 1.0, 1.0);
    const int c = 3;
    voxel_features cam(c, spec, feature_role::camera);
    voxel_features pts(c, spec, feature_role::lidar);
    for (double& v : cam.volume.data) v = r.uniform(-2.0, 2.0);
    for (double& v : pts.volume.data) v = r.uniform(-2.0, 2.0);
    voxel_features zero(c, spec, feature_role::lidar);

    // Addition with a zero branch is the other branch.
    const voxel_features add_out = fuse_baseline(fusion_strategy::addition, cam, zero);
    CHECK(same_bytes(add_out.volume, cam.volume));

    // [I|0] reducer reproduces the camera branch exactly.
    const concat_reducer_params ident = make_concat_reducer(c, 1.0, 0.0);
    const voxel_features cat_cam = fuse_baseline(fusion_strategy::concatenation, cam, pts, &ident);
    CHECK(same_bytes(cat_cam.volume, cam.volume));

    // Default reducer averages the branches.
    const concat_reducer_params avg = make_concat_reducer(c);
    const voxel_features cat_avg = fuse_baseline(fusion_strategy::concatenation, cam, pts, &avg);
    for (int64_t i = 0; i < cat_avg.volume.numel(); ++i)
        CHECK(cat_avg.volume.data[i] ==
              doctest::Approx(0.5 * cam.volume.data[i] + 0.5 * pts.volume.data[i]).epsilon(1e-12));

    CHECK_THROWS_AS(fuse_baseline(fusion_strategy::concatenation, cam, pts, nullptr),
                    std::invalid_argument);
    CHECK_THROWS_AS(fuse_baseline(fusion_strategy::gated, cam, pts), std::invalid_argument);

    CHECK(parse_fusion_strategy("addition") == fusion_strategy::addition);
    CHECK(parse_fusion_strategy("concatenation") == fusion_strategy::concatenation);
    CHECK(parse_fusion_strategy("concat") == fusion_strategy::concatenation);
    CHECK(parse_fusion_strategy("gated") == fusion_strategy::gated);
    CHECK_THROWS_WITH_AS(parse_fusion_strategy("max"),
                         "unknown fusion strategy 'max' (want addition|concat|gated)",
                         std::invalid_argument);
    CHECK(std::string(fusion_strategy_name(fusion_strategy::gated)) == "gated");
}

TEST_CASE("fuse_baseline: concatenation reducer gradcheck") {
    rng r(13);
    param_store store;
    const int c = 3;
    store.add("reducer_w", random_tensor({c, 2 * c}, r));
    store.add("reducer_b", random_tensor({c}, r));
    const tensor cam_rows = random_tensor({4, c}, r);
    const tensor pts_rows = random_tensor({4, c}, r);
    const tensor target = random_tensor({4, c}, r);
    auto loss_value = [&]() {
        graph g(&store);
        const var fused = fuse_concat_node(g, g.input(cam_rows), g.input(pts_rows),
                                           g.param("reducer_w"), g.param("reducer_b"));
        return g.val(g.sum(g.mul(fused, g.input(target)))).data[0];
    };
    graph g(&store);
    const var fused = fuse_concat_node(g, g.input(cam_rows), g.input(pts_rows),
                                       g.param("reducer_w"), g.param("reducer_b"));
    store.zero_grad();
    g.backward(g.sum(g.mul(fused, g.input(target))));
    const auto fd = finite_diff_grad(store, loss_value);
    CHECK(grad_rel_err(store.get("reducer_w").grad, fd[0]) < 1e-8);
    CHECK(grad_rel_err(store.get("reducer_b").grad, fd[1]) < 1e-8);
}

TEST_CASE("adapter freeze: optimizer steps leave W_txt bytes unchanged") {
    const frozen_text_encoder enc = small_encoder(6, 4, 33);
    const lora_cfg cfg{2, 8.0};
    rng r(3);
    param_store store;
    store.add("w_txt", enc.w_txt, /*trainable=*/false);
    store.add("lora_a", random_tensor({2, 6}, r));
    store.add("lora_b", random_tensor({4, 2}, r));
    const tensor w_txt_before = store.get("w_txt").value;
    const tensor a_before = store.get("lora_a").value;
    const tensor target = random_tensor({1, 4}, r);

    adamw opt;
    opt.lr = 1e-2;
    for (int step = 0; step < 5; ++step) {
        graph g(&store);
        const var f = encode_env_node(g, step % kPromptCount, enc, cfg, g.param("w_txt"),
                                      g.param("lora_a"), g.param("lora_b"));
        store.zero_grad();
        g.backward(g.sum(g.mul(f, g.input(target))));
        opt.step(store);
    }
    CHECK(same_bytes(store.get("w_txt").value, w_txt_before));
    CHECK(store.get("w_txt").m.max_abs() == 0.0);
    CHECK(store.get("w_txt").v.max_abs() == 0.0);
    CHECK_FALSE(same_bytes(store.get("lora_a").value, a_before));
}

TEST_CASE("prompt embedding file: load, renormalize, and reject malformed input") {
    frozen_text_encoder enc = small_encoder(3, 4, 2);
    const auto path = temp_file("embeddings.tsv");
    {
        std::ofstream out(path);
        out << "0\t1.0,0.0,0.0\n";
        out << "1\t0.0,2.0,0.0\n"; // renormalized to unit length on load
        out << "3\t0.5,0.5,0.5\n";
        out << "2\t-1.0,1.0,0.0\n";
    }
    load_prompt_embeddings(enc, path.string());
    CHECK(enc.e_prompt[0].data == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(enc.e_prompt[1].data[1] == doctest::Approx(1.0));
    for (int i = 0; i < kPromptCount; ++i) {
        double norm = 0.0;
        for (double v : enc.e_prompt[i].data) norm += v * v;
        CHECK(std::fabs(std::sqrt(norm) - 1.0) <= 1e-12);
    }
    CHECK(enc.e_prompt[2].data[0] == doctest::Approx(-1.0 / std::sqrt(2.0)));

    auto write_and_expect_throw = [&](const std::string& body, const char* what_part) {
        const auto bad = temp_file("bad.tsv");
        std::ofstream out(bad);
        out << body;
        out.close();
        frozen_text_encoder e2 = small_encoder(3, 4, 2);
        try {
            load_prompt_embeddings(e2, bad.string());
            FAIL("expected a throw for: " << body);
        } catch (const std::runtime_error& err) {
            CHECK(std::string(err.what()).find(what_part) != std::string::npos);
        }
    };
    write_and_expect_throw("0\t1.0,0.0\n1\t1,0,0\n2\t1,0,0\n3\t1,0,0\n", "want d_txt=3");
    write_and_expect_throw("0\t1,0,0\n1\t1,0,0\n2\t1,0,0\n", "missing prompt id 3");
    write_and_expect_throw("0\t1,0,0\n0\t1,0,0\n2\t1,0,0\n3\t1,0,0\n", "duplicate prompt id");
    write_and_expect_throw("0\t1,0,0\n1\t1,oops,0\n2\t1,0,0\n3\t1,0,0\n", "bad value");
    write_and_expect_throw("5\t1,0,0\n", "out of range");
    write_and_expect_throw("0 1,0,0\n", "missing tab");
    write_and_expect_throw("0\t0,0,0\n1\t1,0,0\n2\t1,0,0\n3\t1,0,0\n", "norm");
    CHECK_THROWS_AS(load_prompt_embeddings(enc, (temp_file("nope") / "missing.tsv").string()),
                    std::runtime_error);
}
