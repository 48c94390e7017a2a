// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails.
//
//   acceptance [--work-dir DIR] [--only 1,4,...] [--workers N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gradcheck.hpp"
#include "hyperpredict/metrics.hpp"
#include "hyperpredict/pipeline.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hyperpredict;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct Context {
    fs::path work;
    int workers = 1;

    // Workspace from the end-to-end run, reused by the throughput and folding checks.
    std::optional<std::pair<PipelineConfig, Workspace>> e2e;
};

PipelineConfig make_config(const std::string& json, int workers) {
    PipelineConfig cfg = config_from_json_text(json);
    cfg.workers = workers;
    cfg.apply_seed();
    cfg.validate();
    return cfg;
}

Workspace fresh_workspace(const Context& ctx, const std::string& name) {
    const fs::path root = ctx.work / name;
    fs::remove_all(root);
    fs::create_directories(root);
    return Workspace{root};
}

// gen-data, precompute, encode, train.
double build_and_train(const PipelineConfig& cfg, const Workspace& ws) {
    generate_dataset(cfg, ws);
    const auto t0 = Clock::now();
    cmd_precompute(cfg, ws);
    cmd_encode(cfg, ws);
    cmd_train(cfg, ws);
    return seconds_since(t0);
}

// 1 ----------------------------------------------------------------------

Outcome oracle_equivalence(Context&) {
    const auto t0 = Clock::now();
    Rng rng(0xacce55);
    const int n = 1000;
    std::map<std::string, int> mismatches{{"dice", 0}, {"dice_all", 0}, {"count_folded", 0},
                                          {"select_optimal", 0}, {"cross_validation_select", 0}};
    for (int k = 0; k < n; ++k) {
        const Shape s{4 + static_cast<int>(rng.below(12)), 4 + static_cast<int>(rng.below(12))};
        const auto L = static_cast<std::uint32_t>(1 + rng.below(6));
        const auto a = oracle::random_labels(rng, s, L);
        const auto b = oracle::random_labels(rng, s, L);
        const auto label = static_cast<std::uint32_t>(1 + rng.below(L));
        if (dice(a, b, label) != oracle::dice(a, b, label)) ++mismatches["dice"];
        const auto all = dice_all(a, b, L);
        for (std::uint32_t l = 1; l <= L; ++l) {
            if (all[l - 1] != oracle::dice(a, b, l)) {
                ++mismatches["dice_all"];
                break;
            }
        }

        const auto jac = jacobian_determinant(oracle::random_field(rng, s, rng.uniform(0.05, 1.0)));
        const double eps = rng.below(2) == 0 ? 0.0 : rng.uniform(0.0, 0.5);
        if (count_folded(jac, eps).count != oracle::count_folded(jac, eps)) ++mismatches["count_folded"];

        const SweepTable t = oracle::random_table(rng, 1 + rng.below(20), L);
        const SelectionCriterion c = oracle::random_criterion(rng, L);
        if (select_optimal(t, c).row != oracle::select(t, c)) ++mismatches["select_optimal"];

        std::vector<HyperparamPoint> cands;
        const int n_cands = 1 + static_cast<int>(rng.below(8));
        for (int i = 0; i < n_cands; ++i) cands.push_back({{"lambda", std::exp(-6.0 + 0.75 * i)}});
        std::vector<RegistrationRecord> recs;
        const int pairs = 1 + static_cast<int>(rng.below(6));
        for (int p = 0; p < pairs; ++p) {
            for (const auto& hp : cands) {
                const int reps = 1 + static_cast<int>(rng.below(2));
                for (int r = 0; r < reps; ++r) {
                    recs.push_back({"p" + std::to_string(p), hp, oracle::random_metrics(rng, L), 0});
                }
            }
        }
        const SelectionCriterion cv_crit = oracle::random_criterion(rng, L);
        const auto expected = oracle::cross_validation(recs, cands, cv_crit);
        try {
            const auto got = cross_validation_select(recs, cands, cv_crit);
            if (!expected || got != cands[*expected]) ++mismatches["cross_validation_select"];
        } catch (const InfeasibleSelection&) {
            if (expected) ++mismatches["cross_validation_select"];
        }
    }
    const double secs = seconds_since(t0);
    int total = 0;
    std::string detail = fmt("%d instances per routine;", n);
    for (const auto& [name, m] : mismatches) {
        total += m;
        detail += fmt(" %s %d", name.c_str(), m);
    }
    detail += fmt(" mismatches; %.2f s", secs);
    return {total == 0 && secs < 60.0, detail};
}

// 2 ----------------------------------------------------------------------

Outcome gradient_correctness(Context&) {
    const auto t0 = Clock::now();
    int probes = 0;
    double worst = 0.0;
    for (std::uint64_t net = 0; net < 20; ++net) {
        const auto problem = gradcheck::random_problem(0x9a4d + net);
        for (const auto& p : gradcheck::check(problem, 5, 0x51 + net)) {
            ++probes;
            worst = std::max(worst, p.relative_error());
        }
    }
    const double secs = seconds_since(t0);
    return {probes >= 50 && worst < 1e-5 && secs < 30.0,
            fmt("%d probes over 20 random nets; max relative error %.3g; %.2f s", probes, worst, secs)};
}

// 3 ----------------------------------------------------------------------

Outcome analytic_jacobian(Context&) {
    Rng rng(0x1ac0b);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const Shape s{4 + static_cast<int>(rng.below(20)), 4 + static_cast<int>(rng.below(20))};
        const double a = rng.uniform(-1.5, 1.5), b = rng.uniform(-1.5, 1.5);
        const double c = rng.uniform(-1.5, 1.5), d = rng.uniform(-1.5, 1.5);
        DisplacementField u(s);
        for (int y = 0; y < s.ny; ++y) {
            for (int x = 0; x < s.nx; ++x) u(x, y) = {a * x + b * y, c * x + d * y};
        }
        const auto jac = jacobian_determinant(u);
        const double expected = (1 + a) * (1 + d) - b * c;
        for (std::size_t i = 0; i < jac.size(); ++i) worst = std::max(worst, std::abs(jac[i] - expected));
    }

    const Shape s{16, 12};
    DisplacementField fold(s);
    for (int y = 0; y < s.ny; ++y) {
        for (int x = 0; x < s.nx; ++x) fold(x, y) = {-2.0 * x, 0.0};
    }
    const auto jac = jacobian_determinant(fold);
    JacobianGrid interior({s.nx - 2, s.ny - 2});
    for (int y = 1; y + 1 < s.ny; ++y) {
        for (int x = 1; x + 1 < s.nx; ++x) interior(x - 1, y - 1) = jac(x, y);
    }
    const std::size_t folded = count_folded(interior).count;
    return {worst <= 1e-12 && folded == interior.size(),
            fmt("200 random affine fields, max |det - det(I+A)| %.3g; a=-2 folds %zu of %zu interior cells",
                worst, folded, interior.size())};
}

// 4 ----------------------------------------------------------------------

Outcome end_to_end(Context& ctx) {
    const PipelineConfig cfg = make_config(R"({
        "seed": 1,
        "samples_per_pair": 16,
        "dataset": {"nx": 64, "ny": 64, "label_count": 8, "pair_count": 100, "fractions": [0.6, 0.2, 0.2]}
    })", ctx.workers);
    const Workspace ws = fresh_workspace(ctx, "end_to_end");
    const double secs = build_and_train(cfg, ws);
    const auto r = cmd_experiment1(cfg, ws);
    ctx.e2e.emplace(cfg, ws);
    const double mae = r.summary.at("mae_mean_dice");
    const double nfv = r.summary.at("mae_nfv_percent");
    const double bias = r.summary.at("bias_mean_dice");
    return {mae <= 0.05 && nfv <= 0.5 && std::abs(bias) <= 0.01 && secs <= 900.0,
            fmt("60/20/20 pairs, 16 lambda/pair: mean-Dice MAE %.4f, %%nfv MAE %.3f, Dice bias %+.4f; "
                "precompute+train %.0f s",
                mae, nfv, bias, secs)};
}

// 5 ----------------------------------------------------------------------

Outcome selection_vs_cv(Context& ctx) {
    const PipelineConfig cfg = make_config(R"({
        "seed": 5,
        "dataset": {"pair_count": 200, "fractions": [0.6, 0.2, 0.2], "amplitude": 2, "amplitude_max": 6}
    })", ctx.workers);
    const Workspace ws = fresh_workspace(ctx, "selection_vs_cv");
    build_and_train(cfg, ws);
    const auto r = cmd_experiment2(cfg, ws);
    const double dh = r.summary.at("mean_dice_hyperpredict");
    const double dc = r.summary.at("mean_dice_cv");
    const double nh = r.summary.at("mean_nfv_percent_hyperpredict");
    const double nc = r.summary.at("mean_nfv_percent_cv");
    return {dh >= dc - 0.01 && nh <= nc,
            fmt("amplitude 2-6 cells, %zu test pairs: Dice %.4f vs CV %.4f, %%nfv %.4f vs CV %.4f "
                "(better %.0f, worse %.0f, equal %.0f)",
                r.rows, dh, dc, nh, nc, r.summary.at("better"), r.summary.at("worse"), r.summary.at("equal"))};
}

// 6 ----------------------------------------------------------------------

// log(lambda*) per pair for one label, from tables keyed by pair id.
std::map<std::string, double> label_optima(const std::map<std::string, SweepTable>& tables, std::uint32_t label,
                                           const SelectionCriterion& base) {
    SelectionCriterion c = SelectionCriterion::single_label_of(label, base.nfv_ceiling);
    std::map<std::string, double> out;
    for (const auto& [id, t] : tables) out[id] = std::log(select_optimal(t, c).hp.get("lambda"));
    return out;
}

int sign(double v) { return (v > 0) - (v < 0); }

Outcome label_heterogeneity(Context& ctx) {
    const PipelineConfig cfg = make_config(R"({
        "seed": 7,
        "dataset": {"label_count": 2, "pair_count": 100, "fractions": [0.6, 0.2, 0.2]}
    })", ctx.workers);
    const Workspace ws = fresh_workspace(ctx, "label_heterogeneity");
    build_and_train(cfg, ws);

    // Brute-force oracle sweep and predicted sweep over the same grid.
    const auto grid = evaluation_grid(cfg, cfg.exp1_points);
    const auto ids = pair_ids(read_manifest(ws), {Split::test});
    std::vector<OracleJob> jobs;
    for (const auto& id : ids) {
        for (const auto& hp : grid) jobs.push_back({id, hp});
    }
    const auto records = run_oracle_jobs(cfg, ws, jobs, ws.root() / "oracle_sweeps.csv");
    std::map<std::string, SweepTable> oracle_tables, predicted_tables;
    for (const auto& r : records) oracle_tables[r.pair_id].push_back({r.hp, r.target});
    const Predictor p = Predictor::load(ws.predictor());
    const auto enc = encode_pairs(cfg, ws, ids, p.encoder());
    for (const auto& id : ids) {
        if (oracle_tables[id].size() == grid.size()) predicted_tables[id] = sweep_pair(p, enc.at(id), grid);
    }
    std::erase_if(oracle_tables, [&](const auto& kv) { return !predicted_tables.count(kv.first); });

    // Label 1 is the bulky disc, label 2 the thin ring.
    const auto o_bulky = label_optima(oracle_tables, 1, cfg.selection);
    const auto o_thin = label_optima(oracle_tables, 2, cfg.selection);
    const auto p_bulky = label_optima(predicted_tables, 1, cfg.selection);
    const auto p_thin = label_optima(predicted_tables, 2, cfg.selection);
    auto med = [](const std::map<std::string, double>& m) {
        std::vector<double> v;
        for (const auto& [k, x] : m) v.push_back(x);
        return median(v);
    };
    const double o_diff = med(o_thin) - med(o_bulky);
    const double p_diff = med(p_thin) - med(p_bulky);
    int agree = 0;
    for (const auto& [id, t] : o_thin) {
        if (sign(t - o_bulky.at(id)) == sign(p_thin.at(id) - p_bulky.at(id))) ++agree;
    }
    const auto n = static_cast<int>(o_thin.size());
    const double frac = n > 0 ? static_cast<double>(agree) / n : 0.0;
    const bool medians_ok = sign(p_diff) != 0 && sign(p_diff) == sign(o_diff);
    return {medians_ok && frac >= 0.8,
            fmt("median log-lambda* thin-bulky: predicted %+.3f, oracle %+.3f (sign %s); per-pair sign agreement "
                "%d/%d = %.0f%% (need >= 80%%)",
                p_diff, o_diff, medians_ok ? "matches" : "differs", agree, n, 100.0 * frac)};
}

// 7 ----------------------------------------------------------------------

Outcome throughput(Context& ctx) {
    if (!ctx.e2e) return {false, "needs the end-to-end workspace (criterion 4)"};
    const auto& [cfg, ws] = *ctx.e2e;
    const Predictor p = Predictor::load(ws.predictor());
    const auto id = pair_ids(read_manifest(ws), {Split::test}).front();
    const Encoding e = encode_pairs(cfg, ws, {id}, p.encoder()).at(id);

    const auto grid = grid_points("lambda", make_grid(cfg.grid_lo, cfg.grid_hi, 8000));
    auto t0 = Clock::now();
    const auto table = sweep_pair(p, e, grid);
    const Selection s = select_optimal(table, cfg.selection);
    const double sweep_secs = seconds_since(t0);

    // Same architecture over the multi-weight schema.
    MlpConfig mlp = cfg.mlp;
    const Predictor multi = Predictor::create(p.encoder(), mode_search_names(HyperparamMode::multi),
                                              cfg.dataset.label_count, mlp);
    const auto axis = make_grid(cfg.grid_lo, cfg.grid_hi, 200);
    t0 = Clock::now();
    const auto t2 = sweep_2d(multi, e, axis, axis, {{"sx", 5}});
    const Selection s2 = select_optimal(t2, cfg.selection);
    const double sweep2_secs = seconds_since(t0);
    return {table.size() == 8000 && t2.size() == 40000 && sweep_secs < 1.0 && sweep2_secs < 5.0,
            fmt("8000-value sweep+select %.3f s (row %zu); 200x200 sweep_2d+select %.3f s (row %zu)", sweep_secs,
                s.row, sweep2_secs, s2.row)};
}

// 8 ----------------------------------------------------------------------

Outcome folding_trend(Context& ctx) {
    if (!ctx.e2e) return {false, "needs the end-to-end workspace (criterion 4)"};
    const auto& [cfg, ws] = *ctx.e2e;
    const auto recs = read_records(ws.root() / "cache" / "test_records.csv", cfg.registration.mode,
                                   cfg.dataset.label_count);
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> sweeps;
    for (const auto& r : recs) {
        sweeps[r.pair_id].first.push_back(r.hp.get("lambda"));
        sweeps[r.pair_id].second.push_back(r.target.nfv_percent);
    }
    std::vector<double> rhos;
    for (const auto& [id, xy] : sweeps) rhos.push_back(spearman(xy.first, xy.second));
    const double worst = rhos.empty() ? 0.0 : *std::max_element(rhos.begin(), rhos.end());
    const bool finite = std::all_of(rhos.begin(), rhos.end(), [](double v) { return std::isfinite(v); });
    return {rhos.size() >= 10 && finite && worst <= -0.8,
            fmt("%zu pairs x %d lambda: Spearman(lambda, %%nfv) median %.3f, weakest %.3f", rhos.size(),
                cfg.exp1_points, median(rhos), worst)};
}

// 9 ----------------------------------------------------------------------

std::map<std::string, std::string> pipeline_outputs(const PipelineConfig& cfg, const Workspace& ws) {
    build_and_train(cfg, ws);
    cmd_experiment1(cfg, ws);
    cmd_experiment2(cfg, ws);
    cmd_experiment3(cfg, ws);
    std::map<std::string, std::string> out{{"records.csv", slurp(ws.records())},
                                           {"encodings.csv", slurp(ws.encodings())},
                                           {"predictor.bin", slurp(ws.predictor())},
                                           {"loss_curve.csv", slurp(ws.loss_curve())}};
    for (const auto& f : fs::directory_iterator(ws.reports())) {
        out["reports/" + f.path().filename().string()] = slurp(f.path());
    }
    return out;
}

Outcome determinism(Context& ctx) {
    const std::string json = R"({
        "seed": 11,
        "samples_per_pair": 8,
        "dataset": {"pair_count": 20, "fractions": [0.5, 0.25, 0.25]},
        "train": {"epochs": 40},
        "grid": {"n": 50}
    })";
    const auto a = pipeline_outputs(make_config(json, 1), fresh_workspace(ctx, "determinism_a"));
    // The rerun uses a different worker count; outputs must not depend on it.
    const auto b = pipeline_outputs(make_config(json, std::max(2, ctx.workers)), fresh_workspace(ctx, "determinism_b"));
    std::vector<std::string> differ;
    for (const auto& [name, bytes] : a) {
        if (!b.count(name) || b.at(name) != bytes) differ.push_back(name);
    }
    std::string detail = fmt("%zu files compared across two fresh runs (1 vs %d workers)", a.size(),
                             std::max(2, ctx.workers));
    for (const auto& d : differ) detail += "; differs: " + d;
    return {differ.empty() && a.size() == b.size() && a.size() >= 8, detail};
}

// 10 ---------------------------------------------------------------------

Outcome relaxation(Context&) {
    Rng rng(0x7e1a);
    int violations = 0, checks = 0;
    for (int k = 0; k < 1000; ++k) {
        const auto L = static_cast<std::uint32_t>(1 + rng.below(5));
        const SweepTable t = oracle::random_table(rng, 1 + rng.below(25), L);
        SelectionCriterion c = oracle::random_criterion(rng, L);
        std::vector<double> ceilings;
        for (int i = 0; i < 6; ++i) ceilings.push_back(oracle::lattice(rng, 16, 2.5));
        ceilings.push_back(std::numeric_limits<double>::infinity());
        std::sort(ceilings.begin(), ceilings.end());
        double prev = -std::numeric_limits<double>::infinity();
        for (const double ceil : ceilings) {
            c.nfv_ceiling = ceil;
            const double obj = select_optimal(t, c).objective;
            ++checks;
            if (obj < prev) ++violations;
            prev = obj;
        }
    }
    return {violations == 0, fmt("1000 random tables, %d ceiling steps, %d decreases", checks, violations)};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome(Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = (fs::temp_directory_path() / "hyperpredict_acceptance").string();
    std::vector<int> only;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    app.add_option("--work-dir", work, "Scratch directory for generated workspaces");
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    app.add_option("--workers", workers, "Worker threads for oracle runs")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    Context ctx{fs::path(work), workers, std::nullopt};
    fs::create_directories(ctx.work);

    const std::vector<Criterion> criteria{
        {1, "oracle equivalence", oracle_equivalence},
        {2, "gradient correctness", gradient_correctness},
        {3, "analytic jacobian", analytic_jacobian},
        {4, "end-to-end learning", end_to_end},
        {5, "selection vs cross-validation", selection_vs_cv},
        {6, "per-label optima heterogeneity", label_heterogeneity},
        {7, "throughput", throughput},
        {8, "monotone folding trend", folding_trend},
        {9, "determinism", determinism},
        {10, "relaxation monotonicity", relaxation},
    };
    // Criteria 7 and 8 reuse the workspace built by criterion 4.
    std::set<int> selected(only.begin(), only.end());
    if (selected.count(7) || selected.count(8)) selected.insert(4);

    int failed = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %2d %s  %-32s %s [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
