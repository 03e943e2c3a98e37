#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "woc/model.h"
#include "woc/pipeline.h"
#include "woc/scenegen.h"

namespace {

constexpr double kGradTolerance = 1e-4;

// Parses "cd,cn,rd,rn" into the four weather-mix weights; returns an error
// message naming the key, or "" on success.
std::string parse_mix(const std::string& text, std::array<double, 4>& out) {
    std::istringstream in(text);
    std::string tok;
    size_t i = 0;
    double sum = 0.0;
    while (std::getline(in, tok, ',')) {
        if (i >= 4) return "mix wants exactly four comma-separated weights";
        try {
            size_t used = 0;
            out[i] = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            return "mix has a non-numeric weight '" + tok + "'";
        }
        if (out[i] < 0.0) return "mix weights must be non-negative";
        sum += out[i];
        ++i;
    }
    if (i != 4) return "mix wants exactly four comma-separated weights";
    if (sum <= 0.0) return "mix weights must not all be zero";
    return "";
}

std::string parse_strategies(const std::string& text, std::vector<woc::fusion_strategy>& out) {
    std::istringstream in(text);
    std::string tok;
    out.clear();
    while (std::getline(in, tok, ',')) {
        try {
            out.push_back(woc::parse_fusion_strategy(tok));
        } catch (const std::exception& e) {
            return std::string("strategies: ") + e.what();
        }
    }
    if (out.empty()) return "strategies must name at least one strategy";
    return "";
}

woc::grid_spec grid_preset(const std::string& name) {
    if (name == "desk") return woc::desk_spec();
    if (name == "paper") return woc::paper_spec();
    throw std::invalid_argument("grid: unknown preset '" + name + "' (want desk|paper)");
}

void echo_config(const CLI::App& sub) {
    std::cout << "# wocc " << sub.get_name() << " — resolved config\n"
              << sub.config_to_str(true, false) << "# ---\n";
}

int eval_threads(bool deterministic) {
    if (deterministic) return 1;
    const char* env = std::getenv("WOC_EVAL_THREADS");
    if (env == nullptr) return 1;
    return std::max(1, std::atoi(env));
}

// ---- gen ---------------------------------------------------------------------

struct gen_opts {
    int scenes = 200;
    uint64_t seed = 1;
    std::string mix = "0.4,0.2,0.2,0.2";
    std::string out;
    std::string grid = "desk";
    bool tsv = false;
    bool deterministic = true;
};

int run_gen(const CLI::App& sub, const gen_opts& o) {
    echo_config(sub);
    woc::dataset_gen_cfg cfg;
    cfg.scenes = o.scenes;
    cfg.seed = o.seed;
    const std::string mix_err = parse_mix(o.mix, cfg.mix);
    if (!mix_err.empty()) throw std::invalid_argument(mix_err);
    cfg.scene_cfg.spec = grid_preset(o.grid);

    const auto manifest = woc::generate_dataset(cfg, o.out, std::cerr);
    int counts[4] = {0, 0, 0, 0};
    for (const auto& e : manifest) ++counts[woc::select_prompt(e.weather.rainy, e.weather.night)];
    woc::text_table t;
    t.header = {"condition", "scenes"};
    t.rows = {{"clear-day", std::to_string(counts[woc::select_prompt(false, false)])},
              {"clear-night", std::to_string(counts[woc::select_prompt(false, true)])},
              {"rainy-day", std::to_string(counts[woc::select_prompt(true, false)])},
              {"rainy-night", std::to_string(counts[woc::select_prompt(true, true)])}};
    std::cout << render_table(t, o.tsv) << "wrote " << manifest.size() << " scenes to " << o.out
              << "\n";
    return 0;
}

// ---- train -------------------------------------------------------------------

struct train_opts {
    std::string data;
    std::string out;
    std::string strategy = "gated";
    std::string grid = "desk";
    int epochs = 30;
    uint64_t seed = 1;
    uint64_t model_seed = 7;
    double lr = 2e-4;
    double weight_decay = 0.01;
    double lambda_occ = 1.0;
    double lambda_weather = 0.1;
    bool tsv = false;
    bool deterministic = true;
};

woc::model_cfg model_cfg_from_opts(const train_opts& o) {
    woc::model_cfg mc;
    mc.spec = grid_preset(o.grid);
    mc.strategy = woc::parse_fusion_strategy(o.strategy);
    mc.model_seed = o.model_seed;
    mc.loss.lambda_occ = o.lambda_occ;
    mc.loss.lambda_weather = o.lambda_weather;
    return mc;
}

int run_train(const CLI::App& sub, const train_opts& o) {
    echo_config(sub);
    const woc::model_cfg mc = model_cfg_from_opts(o);
    woc::occ_model m = woc::build_model(mc);
    const woc::dataset data = woc::load_dataset(m, o.data);

    woc::train_cfg tc;
    tc.epochs = o.epochs;
    tc.seed = o.seed;
    tc.opt.lr = o.lr;
    tc.opt.weight_decay = o.weight_decay;
    const woc::train_result res = woc::train(m, data, tc, std::cerr);

    woc::save_checkpoint(o.out, m, woc::model_cfg_to_text(mc));
    const woc::epoch_stats& last = res.epochs.back();
    char line[256];
    std::snprintf(line, sizeof line,
                  "final: epoch=%d total=%.6f ce=%.6f lovasz=%.6f weather=%.6f weather_acc=%.4f\n",
                  last.epoch, last.total, last.ce, last.lovasz, last.weather, last.weather_acc);
    std::cout << line << "checkpoint written: " << o.out << "\n";
    return 0;
}

// ---- eval --------------------------------------------------------------------

struct eval_opts {
    std::string ckpt;
    std::string data;
    bool by_condition = false;
    bool per_class = false;
    bool gt_prompts = false;
    bool tsv = false;
    bool deterministic = true;
};

int run_eval(const CLI::App& sub, const eval_opts& o) {
    echo_config(sub);
    const std::string cfg_text = woc::read_checkpoint_config(o.ckpt);
    if (cfg_text.empty())
        throw std::runtime_error("checkpoint '" + o.ckpt +
                                 "' carries no config echo; cannot rebuild the model");
    woc::occ_model m = woc::build_model(woc::model_cfg_from_text(cfg_text));
    woc::load_checkpoint(o.ckpt, m);
    const woc::dataset data = woc::load_dataset(m, o.data);

    woc::eval_cfg ec;
    ec.gt_prompts = o.gt_prompts;
    ec.threads = eval_threads(o.deterministic);
    const woc::eval_report rep = woc::evaluate(m, data, ec);

    woc::text_table overall;
    overall.header = {"mIoU", "IoU", "rainyAcc", "nightAcc", "w_clearday", "w_rainynight"};
    auto wfmt = [](double v) {
        if (!woc::metric_defined(v)) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    overall.rows = {{woc::format_metric(rep.overall_iou.miou),
                     woc::format_metric(rep.overall_iou.binary_iou),
                     woc::format_metric(rep.rainy_acc), woc::format_metric(rep.night_acc),
                     wfmt(rep.mean_w_env[size_t(woc::select_prompt(false, false))]),
                     wfmt(rep.mean_w_env[size_t(woc::select_prompt(true, true))])}};
    std::cout << render_table(overall, o.tsv);
    if (o.by_condition) std::cout << "\n" << render_table(woc::condition_table(rep), o.tsv);
    if (o.per_class) std::cout << "\n" << render_table(woc::per_class_table(rep), o.tsv);
    return 0;
}

// ---- compare -----------------------------------------------------------------

struct compare_opts {
    std::string data;
    std::string eval_data;
    std::string strategies = "addition,concat,gated";
    std::string grid = "desk";
    int seeds = 3;
    uint64_t base_seed = 1;
    int epochs = 30;
    double lr = 2e-4;
    double weight_decay = 0.01;
    double lambda_weather = 0.1;
    int bench_reps = 50;
    bool tsv = false;
    bool deterministic = true;
};

int run_compare(const CLI::App& sub, const compare_opts& o) {
    echo_config(sub);
    woc::compare_cfg cc;
    const std::string strat_err = parse_strategies(o.strategies, cc.strategies);
    if (!strat_err.empty()) throw std::invalid_argument(strat_err);
    cc.model.spec = grid_preset(o.grid);
    cc.model.loss.lambda_weather = o.lambda_weather;
    cc.seeds = o.seeds;
    cc.base_seed = o.base_seed;
    cc.train.epochs = o.epochs;
    cc.train.opt.lr = o.lr;
    cc.train.opt.weight_decay = o.weight_decay;
    cc.bench_reps = o.bench_reps;

    woc::occ_model probe = woc::build_model(cc.model);
    const woc::dataset train_data = woc::load_dataset(probe, o.data);
    const woc::dataset eval_data = woc::load_dataset(probe, o.eval_data);

    const woc::compare_result res = woc::compare(cc, train_data, eval_data, std::cerr);
    std::cout << render_table(woc::compare_table(res), o.tsv);
    // Timing varies run to run, so the latency column goes to stderr.
    woc::text_table lat;
    lat.header = {"strategy", "fusion_ms"};
    for (const auto& row : res.rows) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", row.fusion_ms);
        lat.rows.push_back({woc::fusion_strategy_name(row.strategy), buf});
    }
    std::cerr << render_table(lat, o.tsv);
    return 0;
}

// ---- gradcheck -----------------------------------------------------------------

struct gradcheck_opts {
    std::string op;
    bool full = false;
    uint64_t seed = 7;
    bool tsv = false;
    bool deterministic = true;
};

int run_gradcheck_cmd(const CLI::App& sub, const gradcheck_opts& o) {
    echo_config(sub);
    const auto rows = woc::run_gradcheck(o.seed, kGradTolerance, o.op);
    std::cout << render_table(woc::gradcheck_table(rows), o.tsv);
    for (const woc::gradcheck_row& r : rows)
        if (!r.pass) {
            std::cerr << "gradcheck: pathway '" << r.pathway << "' exceeded tolerance "
                      << kGradTolerance << "\n";
            return 1;
        }
    return 0;
}

// ---- bench -------------------------------------------------------------------

struct bench_opts {
    int channels = 16;
    std::string grid = "desk";
    int reps = 50;
    uint64_t seed = 1;
    bool tsv = false;
    bool deterministic = true;
};

int run_bench(const CLI::App& sub, const bench_opts& o) {
    echo_config(sub);
    const auto rows = woc::bench_fusion(o.channels, grid_preset(o.grid), o.reps, o.seed);
    std::cout << render_table(woc::bench_table(rows), o.tsv);
    return 0;
}

std::string trim_ws(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// CLI11 applies a config file only when it hangs off the top-level app, so the
// per-subcommand file is expanded here into --key=value tokens before parsing.
// Keys the command line already sets are dropped, which is what gives flags
// precedence over the file. Values keep CLI11's validators and error wording.
std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    size_t cfg_at = args.size();
    std::string file;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) return args; // CLI11 reports the missing value
            file = args[i + 1];
            cfg_at = i;
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            file = args[i].substr(9);
            cfg_at = i;
            break;
        }
    }
    if (cfg_at == args.size()) return args;

    std::ifstream in(file);
    if (!in) throw std::runtime_error("config: cannot open '" + file + "'");
    std::vector<std::string> extra;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim_ws(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: " + file + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim_ws(t.substr(0, eq));
        std::string value = trim_ws(t.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config: " + file + ":" + std::to_string(lineno) +
                                     ": empty key");
        if (key == "config")
            throw std::runtime_error("config: key 'config' is not allowed inside a config file");
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
            value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        const std::string flag = "--" + key;
        bool overridden = false;
        for (size_t i = 0; i < args.size() && !overridden; ++i) {
            if (i == cfg_at || (cfg_at + 1 < args.size() && i == cfg_at + 1 &&
                                args[cfg_at] == "--config"))
                continue;
            overridden = args[i] == flag || args[i].rfind(flag + "=", 0) == 0 ||
                         args[i] == "--no-" + key;
        }
        if (!overridden) extra.push_back(flag + "=" + value);
    }
    args.insert(args.begin() + long(cfg_at), extra.begin(), extra.end());
    return args;
}

void add_common_flags(CLI::App* sub, bool& tsv, bool& deterministic) {
    sub->add_flag("--tsv", tsv, "emit tables as tab-separated values")->capture_default_str();
    sub->add_flag("--deterministic,!--no-deterministic", deterministic,
                  "single-threaded, byte-reproducible mode (default on); when off, "
                  "WOC_EVAL_THREADS may parallelize evaluation")
        ->default_str("true");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"weather-aware camera-LiDAR occupancy pipeline"};
    app.require_subcommand(1);
    std::string config_path; // consumed by expand_config_args before the parse

    gen_opts go;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic scene dataset");
    gen->add_option("--scenes", go.scenes, "number of scenes")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000000000));
    gen->add_option("--seed", go.seed, "generator seed")->capture_default_str();
    gen->add_option("--mix", go.mix, "weather mix cd,cn,rd,rn")
        ->capture_default_str()
        ->check(CLI::Validator(
            [](std::string& s) {
                std::array<double, 4> v;
                return parse_mix(s, v);
            },
            "MIX"));
    gen->add_option("--grid", go.grid, "grid preset")
        ->capture_default_str()
        ->check(CLI::IsMember({"desk", "paper"}));
    gen->add_option("--out", go.out, "output dataset directory")->required();
    gen->add_option("--config", config_path, "flat key=value config file; flags override")
        ->configurable(false);
    add_common_flags(gen, go.tsv, go.deterministic);

    train_opts to;
    CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
    train->add_option("--data", to.data, "dataset directory")->required();
    train->add_option("--out", to.out, "checkpoint path to write")->required();
    train->add_option("--strategy", to.strategy, "fusion strategy")
        ->capture_default_str()
        ->check(CLI::IsMember({"addition", "concat", "concatenation", "gated"}));
    train->add_option("--grid", to.grid, "grid preset")
        ->capture_default_str()
        ->check(CLI::IsMember({"desk", "paper"}));
    train->add_option("--epochs", to.epochs, "training epochs")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000000000));
    train->add_option("--seed", to.seed, "shuffle seed")->capture_default_str();
    train->add_option("--model-seed", to.model_seed, "parameter init seed")
        ->capture_default_str();
    train->add_option("--lr", to.lr, "learning rate")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    train->add_option("--weight-decay", to.weight_decay, "decoupled weight decay")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    train->add_option("--lambda-occ", to.lambda_occ, "occupancy loss weight")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    train->add_option("--lambda-weather", to.lambda_weather, "weather loss weight")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    train->add_option("--config", config_path, "flat key=value config file; flags override")
        ->configurable(false);
    add_common_flags(train, to.tsv, to.deterministic);

    eval_opts eo;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--ckpt", eo.ckpt, "checkpoint path")->required();
    eval->add_option("--data", eo.data, "dataset directory")->required();
    eval->add_flag("--by-condition", eo.by_condition, "add the Rainy/Day/Night breakdown");
    eval->add_flag("--per-class", eo.per_class, "add the per-class IoU table");
    eval->add_flag("--gt-prompts", eo.gt_prompts,
                   "select prompts from ground-truth weather flags instead of predictions");
    eval->add_option("--config", config_path, "flat key=value config file; flags override")
        ->configurable(false);
    add_common_flags(eval, eo.tsv, eo.deterministic);

    compare_opts co;
    CLI::App* compare = app.add_subcommand(
        "compare", "train and evaluate fusion strategies across seeds");
    compare->add_option("--data", co.data, "training dataset directory")->required();
    compare->add_option("--eval-data", co.eval_data, "held-out dataset directory")->required();
    compare->add_option("--strategies", co.strategies, "comma-separated strategy list")
        ->capture_default_str()
        ->check(CLI::Validator(
            [](std::string& s) {
                std::vector<woc::fusion_strategy> v;
                return parse_strategies(s, v);
            },
            "STRATEGIES"));
    compare->add_option("--grid", co.grid, "grid preset")
        ->capture_default_str()
        ->check(CLI::IsMember({"desk", "paper"}));
    compare->add_option("--seeds", co.seeds, "seeds per strategy")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000000000));
    compare->add_option("--base-seed", co.base_seed, "first seed")->capture_default_str();
    compare->add_option("--epochs", co.epochs, "training epochs")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000000000));
    compare->add_option("--lr", co.lr, "learning rate")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    compare->add_option("--weight-decay", co.weight_decay, "decoupled weight decay")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    compare->add_option("--lambda-weather", co.lambda_weather, "weather loss weight")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    compare->add_option("--bench-reps", co.bench_reps, "fusion benchmark repetitions")
        ->capture_default_str()
        ->check(CLI::Range(10, 1000000));
    compare->add_option("--config", config_path, "flat key=value config file; flags override")
        ->configurable(false);
    add_common_flags(compare, co.tsv, co.deterministic);

    gradcheck_opts gco;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "verify analytic gradients against central differences");
    gradcheck->add_flag("--full", gco.full, "check every pathway (the default)");
    gradcheck->add_option("--op", gco.op, "check a single pathway")
        ->check(CLI::IsMember({"lift_splat_depth", "point_encoder", "lora_adapter",
                               "env_projection", "gating_masks", "trust_mlp", "occupancy_head",
                               "weather_heads", "concat_reducer"}))
        ->excludes(gradcheck->get_option("--full"));
    gradcheck->add_option("--seed", gco.seed, "probe seed")->capture_default_str();
    gradcheck->add_option("--config", config_path,
                          "flat key=value config file; flags override")
        ->configurable(false);
    add_common_flags(gradcheck, gco.tsv, gco.deterministic);

    bench_opts bo;
    CLI::App* bench = app.add_subcommand("bench", "time the fusion strategies");
    bench->add_option("--channels", bo.channels, "feature channels")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000000000));
    bench->add_option("--grid", bo.grid, "grid preset")
        ->capture_default_str()
        ->check(CLI::IsMember({"desk", "paper"}));
    bench->add_option("--reps", bo.reps, "timed repetitions")
        ->capture_default_str()
        ->check(CLI::Range(10, 1000000));
    bench->add_option("--seed", bo.seed, "volume seed")->capture_default_str();
    bench->add_option("--config", config_path, "flat key=value config file; flags override")
        ->configurable(false);
    add_common_flags(bench, bo.tsv, bo.deterministic);

    try {
        std::vector<std::string> args = expand_config_args(argc, argv);
        std::reverse(args.begin(), args.end()); // the vector overload takes reversed argv
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) return run_gen(*gen, go);
        if (train->parsed()) return run_train(*train, to);
        if (eval->parsed()) return run_eval(*eval, eo);
        if (compare->parsed()) return run_compare(*compare, co);
        if (gradcheck->parsed()) return run_gradcheck_cmd(*gradcheck, gco);
        if (bench->parsed()) return run_bench(*bench, bo);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help() << "\n";
    return 2;
}
