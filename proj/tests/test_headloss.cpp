#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <vector>

#include "doctest.h"
#include "woc/graph.h"
#include "woc/grid.h"
#include "woc/headloss.h"
#include "woc/optim.h"
#include "woc/rng.h"

using namespace woc;

namespace {

tensor random_tensor(std::vector<int64_t> shape, rng& r, double lo = -1.0, double hi = 1.0) {
    tensor t(std::move(shape));
    for (double& v : t.data) v = r.uniform(lo, hi);
    return t;
}

std::shared_ptr<const std::vector<loss_entry>> make_entries(std::vector<loss_entry> e) {
    return std::make_shared<const std::vector<loss_entry>>(std::move(e));
}

// Independent Lovász-extension oracle: ℓ(m) = ∫₀¹ JaccardLoss({i: m_i > t}) dt,
// evaluated exactly by summing over breakpoint intervals.
double lovasz_integral_oracle(const std::vector<loss_entry>& entries, const tensor& probs) {
    const int64_t k = probs.shape[1];
    std::vector<double> gt_mass(k, 0.0);
    for (const loss_entry& e : entries) gt_mass[e.label] += e.weight;
    int present = 0;
    double total = 0.0;
    for (int64_t c = 0; c < k; ++c) {
        if (gt_mass[c] <= 0.0) continue;
        ++present;
        struct item {
            double m, w;
            bool gt;
        };
        std::vector<item> items;
        std::vector<double> bps{0.0, 1.0};
        for (const loss_entry& e : entries) {
            const double p = probs.data[e.row * k + c];
            const bool gt = e.label == c;
            items.push_back({gt ? 1.0 - p : p, e.weight, gt});
            bps.push_back(items.back().m);
        }
        std::sort(bps.begin(), bps.end());
        bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
        double integral = 0.0;
        for (size_t s = 0; s + 1 < bps.size(); ++s) {
            const double lo = bps[s], hi = bps[s + 1];
            const double t = 0.5 * (lo + hi);
            double s_gt = 0.0, s_non = 0.0;
            for (const item& it : items)
                if (it.m > t) (it.gt ? s_gt : s_non) += it.w;
            const double delta = 1.0 - (gt_mass[c] - s_gt) / (gt_mass[c] + s_non);
            integral += delta * (hi - lo);
        }
        total += integral;
    }
    return present == 0 ? 0.0 : total / present;
}

} // namespace

TEST_CASE("entries_from_labels: ignore filtering and label validation") {
    const std::vector<uint8_t> labels{0, 3, 255, 1, 255, 2};
    const auto entries = entries_from_labels(labels, 4);
    REQUIRE(entries.size() == 4);
    CHECK(entries[0].row == 0);
    CHECK(entries[1].row == 1);
    CHECK(entries[1].label == 3);
    CHECK(entries[2].row == 3);
    CHECK(entries[3].row == 5);
    for (const loss_entry& e : entries) CHECK(e.weight == 1.0);
    CHECK_THROWS_AS(entries_from_labels(labels, 3), std::invalid_argument);
}

TEST_CASE("weather_logits: zero parameters predict nothing") {
    weather_heads heads;
    heads.w_rainy = tensor::zeros({1, 4});
    heads.b_rainy = tensor::zeros({1});
    heads.w_night = tensor::zeros({1, 4});
    heads.b_night = tensor::zeros({1});
    rng r(4);
    const auto [rainy, night] = weather_logits(random_tensor({1, 4}, r), heads);
    CHECK(rainy == 0.0);
    CHECK(night == 0.0);
    CHECK_FALSE(predict_flag(rainy));
    CHECK_FALSE(predict_flag(night));
    // sigmoid(0) = 0.5 on both heads.
    CHECK(1.0 / (1.0 + std::exp(-rainy)) == 0.5);
}

TEST_CASE("weather_logits: gradcheck through the BCE pair") {
    rng r(14);
    param_store store;
    store.add("w_rainy", random_tensor({1, 4}, r));
    store.add("b_rainy", random_tensor({1}, r));
    store.add("w_night", random_tensor({1, 4}, r));
    store.add("b_night", random_tensor({1}, r));
    const tensor f_2d = random_tensor({1, 4}, r);
    auto build = [&](graph& g) {
        const weather_logit_vars v =
            weather_logits_node(g, g.input(f_2d), g.param("w_rainy"), g.param("b_rainy"),
                                g.param("w_night"), g.param("b_night"));
        return g.add(bce_node(g, v.rainy, 1.0), bce_node(g, v.night, 0.0));
    };
    auto loss_value = [&]() {
        graph g(&store);
        return g.val(build(g)).data[0];
    };
    graph g(&store);
    store.zero_grad();
    g.backward(build(g));
    const auto fd = finite_diff_grad(store, loss_value);
    for (size_t i = 0; i < store.items.size(); ++i) {
        INFO("param ", store.items[i].name);
        CHECK(grad_rel_err(store.items[i].grad, fd[i]) < 1e-8);
    }
}

TEST_CASE("weather_logits: linearly separable flags reach 100% within 200 steps") {
    // Channel 0 encodes brightness (night is dark), channel 1 encodes rain
    // streak energy. Both heads see the same pooled vector.
    rng r(77);
    struct sample {
        tensor f_2d;
        bool rainy, night;
    };
    std::vector<sample> data;
    for (int i = 0; i < 12; ++i) {
        const bool rainy = (i % 2) == 1;
        const bool night = (i % 4) >= 2;
        tensor f({1, 4});
        f.data = {night ? 0.2 + r.uniform(-0.05, 0.05) : 1.0 + r.uniform(-0.05, 0.05),
                  rainy ? 0.9 + r.uniform(-0.05, 0.05) : 0.1 + r.uniform(-0.05, 0.05),
                  r.uniform(-0.2, 0.2), r.uniform(-0.2, 0.2)};
        data.push_back({std::move(f), rainy, night});
    }
    param_store store;
    store.add("w_rainy", tensor::zeros({1, 4}));
    store.add("b_rainy", tensor::zeros({1}));
    store.add("w_night", tensor::zeros({1, 4}));
    store.add("b_night", tensor::zeros({1}));
    adamw opt;
    opt.lr = 5e-2;
    for (int step = 0; step < 200; ++step) {
        graph g(&store);
        var loss{};
        for (size_t i = 0; i < data.size(); ++i) {
            const weather_logit_vars v =
                weather_logits_node(g, g.input(data[i].f_2d), g.param("w_rainy"),
                                    g.param("b_rainy"), g.param("w_night"), g.param("b_night"));
            const var pair = g.add(bce_node(g, v.rainy, data[i].rainy ? 1.0 : 0.0),
                                   bce_node(g, v.night, data[i].night ? 1.0 : 0.0));
            loss = (i == 0) ? pair : g.add(loss, pair);
        }
        store.zero_grad();
        g.backward(g.scale(loss, 1.0 / data.size()));
        opt.step(store);
    }
    weather_heads heads{store.get("w_rainy").value, store.get("b_rainy").value,
                        store.get("w_night").value, store.get("b_night").value};
    int correct = 0;
    for (const sample& s : data) {
        const auto [lr_, ln_] = weather_logits(s.f_2d, heads);
        if (predict_flag(lr_) == s.rainy && predict_flag(ln_) == s.night) ++correct;
    }
    CHECK(correct == static_cast<int>(data.size()));
}

TEST_CASE("cross_entropy: uniform two-class logits cost ln 2 per voxel") {
    const grid_spec spec = grid_spec::from_extents(-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0);
    label_grid labels(spec);
    for (size_t v = 0; v < labels.labels.size(); ++v) labels.labels[v] = v % 2;
    const tensor logits = tensor::zeros({2, spec.nx, spec.ny, spec.nz});
    bool flag = true;
    CHECK(std::fabs(cross_entropy(logits, labels, &flag) - std::log(2.0)) < 1e-12);
    CHECK_FALSE(flag);
}

TEST_CASE("cross_entropy: saturated one-hot logits cost nearly nothing") {
    const grid_spec spec = grid_spec::from_extents(-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0);
    label_grid labels(spec);
    tensor logits = tensor::full({3, spec.nx, spec.ny, spec.nz}, -30.0);
    const int64_t cells = spec.voxel_count();
    rng r(3);
    for (int64_t v = 0; v < cells; ++v) {
        labels.labels[v] = static_cast<uint8_t>(r.uniform_int(3));
        logits.data[labels.labels[v] * cells + v] = 30.0;
    }
    CHECK(cross_entropy(logits, labels) < 1e-10);
}

TEST_CASE("cross_entropy: random case matches scalar oracle; ignore handling") {
    const grid_spec spec = grid_spec::from_extents(-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0);
    rng r(21);
    const int k = 4;
    const tensor logits = random_tensor({k, spec.nx, spec.ny, spec.nz}, r, -2.0, 2.0);
    label_grid labels(spec);
    const int64_t cells = spec.voxel_count();
    for (int64_t v = 0; v < cells; ++v)
        labels.labels[v] = (v % 3 == 0) ? kLabelIgnore : static_cast<uint8_t>(r.uniform_int(k));

    double acc = 0.0;
    int64_t n = 0;
    for (int64_t v = 0; v < cells; ++v) {
        if (labels.labels[v] == kLabelIgnore) continue;
        double mx = -1e300, denom = 0.0;
        for (int c = 0; c < k; ++c) mx = std::max(mx, logits.data[c * cells + v]);
        for (int c = 0; c < k; ++c) denom += std::exp(logits.data[c * cells + v] - mx);
        acc += -std::log(std::exp(logits.data[labels.labels[v] * cells + v] - mx) / denom);
        ++n;
    }
    REQUIRE(n > 0);
    CHECK(std::fabs(cross_entropy(logits, labels) - acc / n) <= 1e-12);

    // Entirely ignored grid: defined as zero, flagged.
    label_grid ignored(spec);
    std::fill(ignored.labels.begin(), ignored.labels.end(), kLabelIgnore);
    bool flag = false;
    CHECK(cross_entropy(logits, ignored, &flag) == 0.0);
    CHECK(flag);
}

TEST_CASE("lovasz_softmax: perfect one-hot prediction is exactly zero") {
    const grid_spec spec = grid_spec::from_extents(-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0);
    label_grid labels(spec);
    tensor probs = tensor::zeros({3, spec.nx, spec.ny, spec.nz});
    const int64_t cells = spec.voxel_count();
    rng r(5);
    for (int64_t v = 0; v < cells; ++v) {
        labels.labels[v] = static_cast<uint8_t>(r.uniform_int(3));
        probs.data[labels.labels[v] * cells + v] = 1.0;
    }
    bool flag = true;
    CHECK(lovasz_softmax(probs, labels, &flag) == 0.0);
    CHECK_FALSE(flag);
}

TEST_CASE("lovasz_softmax: one voxel, two classes, p_true = 0.7 costs 0.3") {
    const grid_spec spec = grid_spec::from_extents(0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0);
    label_grid labels(spec);
    labels.labels[0] = 0;
    tensor probs({2, 1, 1, 1});
    probs.data = {0.7, 0.3};
    CHECK(std::fabs(lovasz_softmax(probs, labels) - 0.3) <= 1e-12);
}

TEST_CASE("lovasz_softmax: matches the threshold-integral oracle") {
    rng r(1234);
    for (int trial = 0; trial < 300; ++trial) {
        const int rows = 1 + static_cast<int>(r.uniform_int(6));
        const int k = 2 + static_cast<int>(r.uniform_int(2));
        tensor probs({rows, k});
        for (int i = 0; i < rows; ++i) {
            double denom = 0.0;
            for (int c = 0; c < k; ++c) {
                probs.at(i, c) = std::exp(r.uniform(-2.0, 2.0));
                denom += probs.at(i, c);
            }
            for (int c = 0; c < k; ++c) probs.at(i, c) /= denom;
        }
        std::vector<loss_entry> entries;
        for (int i = 0; i < rows; ++i) {
            if (r.uniform() < 0.2) continue; // leave some rows unsupervised
            const double w = (trial % 2 == 0) ? 1.0 : r.uniform(0.5, 3.0);
            entries.push_back({i, static_cast<uint8_t>(r.uniform_int(k)), w});
        }
        graph g;
        const double got =
            g.val(lovasz_softmax_node(g, g.input(probs), make_entries(entries))).data[0];
        const double want = lovasz_integral_oracle(entries, probs);
        CHECK(std::fabs(got - want) <= 1e-9);
        CHECK(got >= 0.0);
    }
}

TEST_CASE("lovasz_softmax: weighted entries equal duplicated voxels") {
    rng r(88);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 3;
        // Compact form: 4 rows, integer weights.
        tensor probs({4, k});
        std::vector<loss_entry> compact;
        std::vector<loss_entry> expanded_entries;
        std::vector<double> expanded_rows;
        for (int i = 0; i < 4; ++i) {
            double denom = 0.0;
            for (int c = 0; c < k; ++c) {
                probs.at(i, c) = std::exp(r.uniform(-1.5, 1.5));
                denom += probs.at(i, c);
            }
            for (int c = 0; c < k; ++c) probs.at(i, c) /= denom;
            const int w = 1 + static_cast<int>(r.uniform_int(4));
            const uint8_t label = static_cast<uint8_t>(r.uniform_int(k));
            compact.push_back({i, label, static_cast<double>(w)});
            for (int d = 0; d < w; ++d) {
                expanded_entries.push_back(
                    {static_cast<int32_t>(expanded_rows.size() / k), label, 1.0});
                for (int c = 0; c < k; ++c) expanded_rows.push_back(probs.at(i, c));
            }
        }
        tensor big({static_cast<int64_t>(expanded_rows.size()) / k, k});
        big.data = expanded_rows;
        graph g;
        const double compact_lovasz =
            g.val(lovasz_softmax_node(g, g.input(probs), make_entries(compact))).data[0];
        const double expanded_lovasz =
            g.val(lovasz_softmax_node(g, g.input(big), make_entries(expanded_entries))).data[0];
        CHECK(std::fabs(compact_lovasz - expanded_lovasz) <= 1e-12);
        const double compact_ce =
            g.val(cross_entropy_node(g, g.input(probs), make_entries(compact))).data[0];
        const double expanded_ce =
            g.val(cross_entropy_node(g, g.input(big), make_entries(expanded_entries))).data[0];
        CHECK(std::fabs(compact_ce - expanded_ce) <= 1e-12);
    }
}

TEST_CASE("lovasz_softmax: invariant to absent-class columns and voxel order") {
    rng r(300);
    const int k = 5, rows = 8;
    tensor probs({rows, k});
    std::vector<loss_entry> entries;
    for (int i = 0; i < rows; ++i) {
        double denom = 0.0;
        for (int c = 0; c < k; ++c) {
            probs.at(i, c) = std::exp(r.uniform(-1.0, 1.0));
            denom += probs.at(i, c);
        }
        for (int c = 0; c < k; ++c) probs.at(i, c) /= denom;
        entries.push_back({i, static_cast<uint8_t>(r.uniform_int(2)), 1.0}); // classes 0,1 only
    }
    graph g;
    const double base = g.val(lovasz_softmax_node(g, g.input(probs), make_entries(entries))).data[0];

    // Rewriting columns of classes absent from the ground truth changes nothing.
    tensor tweaked = probs;
    for (int i = 0; i < rows; ++i)
        for (int c = 2; c < k; ++c) tweaked.at(i, c) = r.uniform(0.0, 1.0);
    const double same =
        g.val(lovasz_softmax_node(g, g.input(tweaked), make_entries(entries))).data[0];
    CHECK(std::memcmp(&base, &same, sizeof(double)) == 0);

    // Voxel (entry) order permutation.
    std::vector<loss_entry> shuffled = entries;
    for (size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[r.uniform_int(static_cast<int64_t>(i))]);
    const double permuted =
        g.val(lovasz_softmax_node(g, g.input(probs), make_entries(shuffled))).data[0];
    CHECK(std::fabs(permuted - base) <= 1e-12);

    const double ce_base =
        g.val(cross_entropy_node(g, g.input(probs), make_entries(entries))).data[0];
    const double ce_perm =
        g.val(cross_entropy_node(g, g.input(probs), make_entries(shuffled))).data[0];
    CHECK(std::fabs(ce_perm - ce_base) <= 1e-12);
}

TEST_CASE("loss nodes: gradcheck through softmax, CE and Lovász") {
    rng r(444);
    param_store store;
    store.add("logits", random_tensor({6, 4}, r, -1.5, 1.5));
    auto entries = make_entries({{0, 1, 1.0},
                                 {1, 0, 2.0},
                                 {2, 3, 1.0},
                                 {4, 1, 0.5},
                                 {5, 2, 1.0}});
    auto build = [&](graph& g) {
        const var probs = g.softmax_rows(g.param("logits"));
        return g.add(cross_entropy_node(g, probs, entries),
                     lovasz_softmax_node(g, probs, entries));
    };
    auto loss_value = [&]() {
        graph g(&store);
        return g.val(build(g)).data[0];
    };
    graph g(&store);
    store.zero_grad();
    g.backward(build(g));
    const auto fd = finite_diff_grad(store, loss_value);
    CHECK(grad_rel_err(store.get("logits").grad, fd[0]) < 1e-6);
    CHECK(store.get("logits").grad.max_abs() > 0.0);
}

TEST_CASE("bce: ln 2 at zero, saturation, stability, direct formula") {
    CHECK(std::fabs(bce(0.0, 0.0) - std::log(2.0)) <= 1e-15);
    CHECK(std::fabs(bce(0.0, 1.0) - std::log(2.0)) <= 1e-15);
    CHECK(bce(30.0, 1.0) < 1e-12);
    CHECK(bce(-30.0, 0.0) < 1e-12);
    CHECK(std::isfinite(bce(1e3, 0.0)));
    CHECK(std::isfinite(bce(-1e3, 1.0)));
    CHECK(bce(1e3, 0.0) == 1e3);
    CHECK(bce(-1e3, 1.0) == 1e3);
    rng r(66);
    for (int i = 0; i < 200; ++i) {
        const double x = r.uniform(-8.0, 8.0);
        const double t = r.bernoulli(0.5) ? 1.0 : 0.0;
        const double s = 1.0 / (1.0 + std::exp(-x));
        const double direct = -(t * std::log(s) + (1.0 - t) * std::log(1.0 - s));
        CHECK(std::fabs(bce(x, t) - direct) <= 1e-12);
    }
    CHECK_THROWS_AS(bce(0.0, 0.5), std::invalid_argument);

    // Gradient of the stable form matches finite differences.
    param_store store;
    store.add("logit", tensor::scalar(0.37));
    auto loss_value = [&]() {
        graph g(&store);
        return g.val(bce_node(g, g.param("logit"), 1.0)).data[0];
    };
    graph g(&store);
    store.zero_grad();
    g.backward(bce_node(g, g.param("logit"), 1.0));
    const auto fd = finite_diff_grad(store, loss_value);
    CHECK(grad_rel_err(store.get("logit").grad, fd[0]) < 1e-9);
}

TEST_CASE("total_loss: exact weighted sum and degenerate zero") {
    rng r(31);
    graph g;
    auto entries = make_entries({{0, 1, 1.0}, {1, 0, 1.0}, {2, 2, 3.0}});
    const var logits = g.input(random_tensor({3, 4}, r, -2.0, 2.0));
    const var rainy = g.input(tensor::scalar(0.8));
    const var night = g.input(tensor::scalar(-1.2));

    loss_weights lw;
    lw.lambda_occ = 1.0;
    lw.lambda_weather = 0.1;
    const loss_vars v = total_loss_node(g, logits, entries, rainy, night, true, false, lw);
    const loss_breakdown b = read_breakdown(g, v);
    CHECK(b.occ == b.ce + b.lovasz);
    const double occ_term = lw.lambda_occ * b.occ;
    const double weather_term = lw.lambda_weather * b.weather;
    CHECK(b.total == occ_term + weather_term);
    CHECK(b.ce >= 0.0);
    CHECK(b.lovasz >= 0.0);
    CHECK(b.weather >= 0.0);

    // lambda_weather = 0 collapses the total onto the occupancy term alone.
    loss_weights occ_only;
    occ_only.lambda_weather = 0.0;
    const loss_vars vo = total_loss_node(g, logits, entries, rainy, night, true, false, occ_only);
    const loss_breakdown bo = read_breakdown(g, vo);
    CHECK(bo.total == bo.occ);

    // Saturated weather logits + fully ignored grid: every component is 0.
    auto no_entries = make_entries({});
    loss_weights ones;
    ones.lambda_occ = 1.0;
    ones.lambda_weather = 1.0;
    const loss_vars vz = total_loss_node(g, logits, no_entries, g.input(tensor::scalar(800.0)),
                                         g.input(tensor::scalar(-800.0)), true, false, ones);
    const loss_breakdown bz = read_breakdown(g, vz);
    CHECK(bz.ce == 0.0);
    CHECK(bz.lovasz == 0.0);
    CHECK(bz.weather == 0.0);
    CHECK(bz.total == 0.0);
}

TEST_CASE("total_loss: lambda_weather = 0 sends zero gradient to the weather heads") {
    rng r(52);
    param_store store;
    store.add("logits", random_tensor({4, 3}, r));
    store.add("w_rainy", random_tensor({1, 2}, r));
    store.add("b_rainy", random_tensor({1}, r));
    const tensor f_2d = random_tensor({1, 2}, r);
    auto entries = make_entries({{0, 1, 1.0}, {2, 0, 1.0}});
    loss_weights lw;
    lw.lambda_weather = 0.0;
    graph g(&store);
    const var rainy = g.linear(g.input(f_2d), g.param("w_rainy"), g.param("b_rainy"));
    const loss_vars v = total_loss_node(g, g.param("logits"), entries, rainy,
                                        g.input(tensor::scalar(0.3)), true, false, lw);
    store.zero_grad();
    g.backward(v.total);
    CHECK(store.get("w_rainy").grad.max_abs() == 0.0);
    CHECK(store.get("b_rainy").grad.max_abs() == 0.0);
    CHECK(store.get("logits").grad.max_abs() > 0.0);
}

TEST_CASE("occ_head_node: gradcheck on a small fused batch") {
    rng r(61);
    param_store store;
    const int c = 4, k = 6;
    store.add("occ_w1", random_tensor({c, c}, r));
    store.add("occ_b1", random_tensor({c}, r));
    store.add("occ_w2", random_tensor({k, c}, r));
    store.add("occ_b2", random_tensor({k}, r));
    const tensor fused = random_tensor({5, c}, r);
    auto entries = make_entries({{0, 2, 1.0}, {1, 5, 1.0}, {3, 0, 4.0}, {4, 2, 1.0}});
    auto build = [&](graph& g) {
        const var logits = occ_head_node(g, g.input(fused), g.param("occ_w1"), g.param("occ_b1"),
                                         g.param("occ_w2"), g.param("occ_b2"));
        const var probs = g.softmax_rows(logits);
        return g.add(cross_entropy_node(g, probs, entries),
                     lovasz_softmax_node(g, probs, entries));
    };
    auto loss_value = [&]() {
        graph g(&store);
        return g.val(build(g)).data[0];
    };
    graph g(&store);
    store.zero_grad();
    g.backward(build(g));
    const auto fd = finite_diff_grad(store, loss_value);
    for (size_t i = 0; i < store.items.size(); ++i) {
        INFO("param ", store.items[i].name);
        CHECK(grad_rel_err(store.items[i].grad, fd[i]) < 1e-6);
    }
}
