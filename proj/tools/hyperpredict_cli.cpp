// Command-line front end for the pipeline.
//
//   hyperpredict [--config cfg.json] [--seed N] [--out-dir DIR] [--workers N] <command> ...
//
// Exit codes: 0 success, 1 data/IO error, 2 config error, 3 numerical failure,
// 4 infeasible selection under strict mode.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "hyperpredict/errors.hpp"
#include "hyperpredict/pipeline.hpp"

namespace hp = hyperpredict;
namespace fs = std::filesystem;

namespace {

hp::HyperparamPoint parse_hp_args(const std::vector<std::string>& args) {
    hp::HyperparamPoint point;
    for (const auto& a : args) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) throw hp::ConfigError("--hp expects name=value, got '" + a + "'");
        try {
            point.set(a.substr(0, eq), hp::parse_number(a.substr(eq + 1)));
        } catch (const hp::DataError&) {
            throw hp::ConfigError("--hp value is not a number: '" + a + "'");
        }
    }
    if (point.size() == 0) throw hp::ConfigError("register needs at least one --hp name=value");
    return point;
}

void print_report(const hp::ExperimentReport& r) {
    std::printf("%s: %zu rows\n", r.id.c_str(), r.rows);
    for (const auto& [k, v] : r.summary) std::printf("  %s = %.6g\n", k.c_str(), v);
    for (const auto& f : r.files) std::printf("  wrote %s\n", f.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Amortized hyperparameter prediction for deformable registration"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out_dir = "hyperpredict_out";
    bool strict = false;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Global seed (overrides the config)");
    app.add_option("--out-dir", out_dir, "Working/output directory");
    app.add_option("--workers", workers, "Worker threads for precompute and encoding")->check(CLI::PositiveNumber);
    app.add_flag("--strict", strict, "Fail (exit 4) instead of falling back when no row is feasible");
    app.fallthrough();

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset and split manifest");
    auto* pre = app.add_subcommand("precompute", "Run oracle registrations for sampled hyperparameters");
    std::vector<std::string> splits{"train", "val"};
    pre->add_option("--splits", splits, "Splits to precompute")->delimiter(',');
    auto* enc = app.add_subcommand("encode", "Encode every pair");
    auto* tr = app.add_subcommand("train", "Train the predictor");
    auto* sw = app.add_subcommand("sweep", "Predict metrics over the hyperparameter grid for one pair");
    std::string pair;
    bool two_d = false;
    sw->add_option("--pair", pair, "Pair id")->required();
    sw->add_flag("--2d", two_d, "Sweep be x le (multi mode)");
    auto* sel = app.add_subcommand("select", "Select per-pair optimal hyperparameters");
    std::string split = "test";
    sel->add_option("--split", split, "Split to select for");
    auto* reg = app.add_subcommand("register", "Register one pair with given hyperparameters");
    std::vector<std::string> hp_args;
    reg->add_option("--pair", pair, "Pair id")->required();
    reg->add_option("--hp", hp_args, "name=value (repeatable)")->required();
    auto* e1 = app.add_subcommand("exp1", "Prediction accuracy on test pairs");
    auto* e2 = app.add_subcommand("exp2", "Per-pair selection vs cross-validation");
    auto* e3 = app.add_subcommand("exp3", "Per-subject and per-label optimum distributions");
    auto* ab = app.add_subcommand("ablate", "Architecture/encoder/data/alpha ablations");
    auto* tm = app.add_subcommand("timing", "Sweep and registration wall-clock");
    std::optional<int> n_values;
    tm->add_option("--n-values", n_values, "Number of hyperparameter values")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        hp::PipelineConfig cfg = config_path.empty() ? hp::PipelineConfig{} : hp::load_config(config_path);
        if (seed) cfg.seed = *seed;
        cfg.apply_seed();
        if (workers) cfg.workers = *workers;
        if (n_values) cfg.timing_values = *n_values;
        if (strict) cfg.selection.policy = hp::InfeasiblePolicy::error;
        cfg.validate();

        const hp::Workspace ws{fs::path(out_dir)};
        fs::create_directories(ws.root());
        const std::string started = hp::utc_timestamp();
        std::vector<fs::path> outputs;
        std::string command;

        if (*gen) {
            command = "gen-data";
            const auto m = hp::generate_dataset(cfg, ws);
            outputs = {ws.manifest(), ws.dataset_json(), ws.pairs_dir()};
            std::printf("generated %zu pairs in %s\n", m.size(), ws.pairs_dir().string().c_str());
        } else if (*pre) {
            command = "precompute";
            std::vector<hp::Split> s;
            for (const auto& name : splits) s.push_back(hp::parse_split(name));
            const auto sum = hp::cmd_precompute(cfg, ws, s);
            outputs = {ws.records()};
            std::printf("records: %zu (computed %zu, reused %zu, skipped %zu)\n", sum.rows, sum.computed, sum.reused,
                        sum.skipped);
        } else if (*enc) {
            command = "encode";
            const auto t = hp::cmd_encode(cfg, ws);
            outputs = {ws.encodings()};
            std::printf("encoded %zu pairs\n", t.size());
        } else if (*tr) {
            command = "train";
            const auto res = hp::cmd_train(cfg, ws);
            outputs = {ws.predictor(), ws.loss_curve()};
            if (res.best_epoch > 0) {
                const auto& best = res.log.at(static_cast<std::size_t>(res.best_epoch - 1));
                std::printf("trained %zu epochs; best epoch %d (train %.6g, val %.6g)\n", res.log.size(),
                            res.best_epoch, best.train_loss, best.val_loss);
            } else {
                std::printf("trained 0 epochs\n");
            }
        } else if (*sw) {
            command = "sweep";
            outputs = {hp::cmd_sweep(cfg, ws, pair, two_d)};
            std::printf("wrote %s\n", outputs.front().string().c_str());
        } else if (*sel) {
            command = "select";
            outputs = {hp::cmd_select(cfg, ws, hp::parse_split(split))};
            std::printf("wrote %s\n", outputs.front().string().c_str());
        } else if (*reg) {
            command = "register";
            const auto out = hp::cmd_register(cfg, ws, pair, parse_hp_args(hp_args));
            outputs = {out.field, out.metrics};
            std::printf("mean dice %.6f, %%nfv %.4f\n", out.targets.metrics.mean_dice(),
                        out.targets.metrics.nfv_percent);
        } else {
            hp::ExperimentReport r;
            if (*e1) {
                command = "exp1";
                r = hp::cmd_experiment1(cfg, ws);
            } else if (*e2) {
                command = "exp2";
                r = hp::cmd_experiment2(cfg, ws);
            } else if (*e3) {
                command = "exp3";
                r = hp::cmd_experiment3(cfg, ws);
            } else if (*ab) {
                command = "ablate";
                r = hp::cmd_ablations(cfg, ws);
            } else {
                command = "timing";
                r = hp::cmd_timing(cfg, ws);
            }
            outputs = r.files;
            print_report(r);
        }
        hp::write_run_manifest(cfg, ws, command, started, outputs);
        return 0;
    } catch (const hp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const hp::InfeasibleSelection& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return 4;
    } catch (const hp::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
