#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "hyperpredict/errors.hpp"
#include "hyperpredict/pipeline.hpp"
#include "hyperpredict/rng.hpp"

namespace hyperpredict {

namespace fs = std::filesystem;

namespace {

fs::path cache_dir(const Workspace& ws) { return ws.root() / "cache"; }

std::vector<std::string> hp_columns(HyperparamMode mode, const std::string& prefix = "hp_") {
    std::vector<std::string> out;
    for (const auto& n : mode_schema(mode)) out.push_back(prefix + n);
    return out;
}

void append_hp(std::vector<std::string>& row, const HyperparamPoint& hp, HyperparamMode mode) {
    for (const auto& n : mode_schema(mode)) row.push_back(format_number(hp.get(n)));
}

fs::path emit(const Workspace& ws, const std::string& name, const CsvTable& t, ExperimentReport& report) {
    fs::create_directories(ws.reports());
    const fs::path p = ws.reports() / name;
    write_csv(p, t);
    report.files.push_back(p);
    return p;
}

// Test pairs plus their encodings under the predictor's encoder.
struct TestSet {
    Predictor predictor;
    std::vector<std::string> ids;
    EncodingTable enc;
};

TestSet load_test_set(const PipelineConfig& cfg, const Workspace& ws) {
    TestSet t;
    t.predictor = Predictor::load(ws.predictor());
    if (t.predictor.label_count() != cfg.dataset.label_count) {
        throw ConfigError("predictor label count does not match dataset.label_count");
    }
    t.ids = pair_ids(read_manifest(ws), {Split::test});
    if (t.ids.empty()) throw DataError("dataset has no test pairs");
    t.enc = encode_pairs(cfg, ws, t.ids, t.predictor.encoder());
    return t;
}

// Oracle targets on the Experiment 1 grid for every test pair.
std::vector<RegistrationRecord> test_targets(const PipelineConfig& cfg, const Workspace& ws,
                                             const std::vector<std::string>& ids) {
    std::vector<OracleJob> jobs;
    for (const auto& id : ids) {
        for (auto& hp : evaluation_grid(cfg, cfg.exp1_points)) jobs.push_back({id, std::move(hp)});
    }
    return run_oracle_jobs(cfg, ws, jobs, cache_dir(ws) / "test_records.csv");
}

std::vector<std::string> agreement_row(const std::string& metric, const AgreementSummary& a) {
    return {metric, format_number(a.bias), format_number(a.sd), format_number(a.loa_lo),
            format_number(a.loa_hi), format_number(a.mad), format_number(a.mad_sd)};
}

struct ErrorSummary {
    double dice = 0.0;       // over every per-label Dice value
    double mean_dice = 0.0;
    double nfv = 0.0;
};

ErrorSummary prediction_errors(const Predictor& p, const EncodingTable& enc,
                               const std::vector<RegistrationRecord>& records) {
    std::vector<double> pd, td, pm, tm, pn, tn;
    for (const auto& r : records) {
        const MetricVector m = p.forward(enc.at(r.pair_id), r.hp);
        pd.insert(pd.end(), m.dice.begin(), m.dice.end());
        td.insert(td.end(), r.target.dice.begin(), r.target.dice.end());
        pm.push_back(m.mean_dice());
        tm.push_back(r.target.mean_dice());
        pn.push_back(m.nfv_percent);
        tn.push_back(r.target.nfv_percent);
    }
    return {mean_absolute_error(pd, td), mean_absolute_error(pm, tm), mean_absolute_error(pn, tn)};
}

}  // namespace

ExperimentReport cmd_experiment1(const PipelineConfig& cfg, const Workspace& ws) {
    const TestSet ts = load_test_set(cfg, ws);
    const auto records = test_targets(cfg, ws, ts.ids);
    const HyperparamMode mode = cfg.registration.mode;
    const std::uint32_t L = cfg.dataset.label_count;

    ExperimentReport report;
    report.id = "exp1";
    CsvTable rows;
    rows.header = {"pair_id"};
    for (auto& c : hp_columns(mode)) rows.header.push_back(std::move(c));
    rows.header.insert(rows.header.end(), {"pred_mean_dice", "target_mean_dice", "residual_mean_dice",
                                           "pred_nfv_percent", "target_nfv_percent", "residual_nfv_percent"});
    std::vector<double> pm, tm, pn, tn;
    std::vector<std::vector<double>> pl(L), tl(L);
    for (const auto& r : records) {
        const MetricVector m = ts.predictor.forward(ts.enc.at(r.pair_id), r.hp);
        std::vector<std::string> row{r.pair_id};
        append_hp(row, r.hp, mode);
        const double md = m.mean_dice(), td = r.target.mean_dice();
        row.insert(row.end(), {format_number(md), format_number(td), format_number(md - td),
                               format_number(m.nfv_percent), format_number(r.target.nfv_percent),
                               format_number(m.nfv_percent - r.target.nfv_percent)});
        rows.rows.push_back(std::move(row));
        pm.push_back(md);
        tm.push_back(td);
        pn.push_back(m.nfv_percent);
        tn.push_back(r.target.nfv_percent);
        for (std::uint32_t l = 0; l < L; ++l) {
            pl[l].push_back(m.dice[l]);
            tl[l].push_back(r.target.dice[l]);
        }
    }
    if (records.size() < 2) throw DataError("exp1 needs at least two evaluated rows");
    emit(ws, "exp1_residuals.csv", rows, report);

    CsvTable agree;
    agree.header = {"metric", "bias", "sd", "loa_lo", "loa_hi", "mad", "mad_sd"};
    const auto a_dice = bland_altman(pm, tm);
    const auto a_nfv = bland_altman(pn, tn);
    agree.rows.push_back(agreement_row("mean_dice", a_dice));
    agree.rows.push_back(agreement_row("nfv_percent", a_nfv));
    for (std::uint32_t l = 0; l < L; ++l) {
        agree.rows.push_back(agreement_row("dice_" + std::to_string(l + 1), bland_altman(pl[l], tl[l])));
    }
    emit(ws, "exp1_agreement.csv", agree, report);

    report.rows = records.size();
    report.summary = {{"mae_mean_dice", a_dice.mad},
                      {"bias_mean_dice", a_dice.bias},
                      {"mae_nfv_percent", a_nfv.mad},
                      {"bias_nfv_percent", a_nfv.bias}};
    return report;
}

ExperimentReport cmd_experiment2(const PipelineConfig& cfg, const Workspace& ws) {
    const TestSet ts = load_test_set(cfg, ws);
    const HyperparamMode mode = cfg.registration.mode;
    const std::uint32_t L = cfg.dataset.label_count;

    // Population baseline on the validation pairs.
    const auto candidates = cv_candidates(cfg);
    std::vector<OracleJob> cv_jobs;
    for (const auto& id : pair_ids(read_manifest(ws), {Split::val})) {
        for (const auto& hp : candidates) cv_jobs.push_back({id, hp});
    }
    if (cv_jobs.empty()) throw DataError("dataset has no validation pairs for the cross-validation baseline");
    const auto cv_records = run_oracle_jobs(cfg, ws, cv_jobs, cache_dir(ws) / "cv_records.csv");
    const HyperparamPoint cv = cross_validation_select(cv_records, candidates, cfg.selection);

    // Per-pair selections on the dense grid.
    const auto grid = evaluation_grid(cfg, cfg.grid_n);
    std::vector<Selection> picks;
    std::vector<OracleJob> jobs;
    for (const auto& id : ts.ids) {
        picks.push_back(select_optimal(sweep_pair(ts.predictor, ts.enc.at(id), grid), cfg.selection));
        jobs.push_back({id, picks.back().hp});
        jobs.push_back({id, cv});
    }
    const auto records = run_oracle_jobs(cfg, ws, jobs, cache_dir(ws) / "exp2_records.csv");
    std::map<std::string, const RegistrationRecord*> by_key;
    for (const auto& r : records) by_key[job_key(r.pair_id, r.hp)] = &r;

    ExperimentReport report;
    report.id = "exp2";
    CsvTable rows;
    rows.header = {"pair_id"};
    for (auto& c : hp_columns(mode, "hp_")) rows.header.push_back(std::move(c));
    for (auto& c : hp_columns(mode, "cv_")) rows.header.push_back(std::move(c));
    rows.header.insert(rows.header.end(),
                       {"predicted_feasible", "before_mean_dice", "hyperpredict_mean_dice", "cv_mean_dice",
                        "hyperpredict_nfv_percent", "cv_nfv_percent", "case"});
    std::vector<double> hp_dice, cv_dice, hp_nfv, cv_nfv;
    int better = 0, worse = 0, equal = 0;
    std::size_t qual = 0;
    double qual_score = -std::numeric_limits<double>::infinity();
    std::vector<double> before_all;
    for (std::size_t i = 0; i < ts.ids.size(); ++i) {
        const auto& id = ts.ids[i];
        const auto a = by_key.find(job_key(id, picks[i].hp));
        const auto b = by_key.find(job_key(id, cv));
        if (a == by_key.end() || b == by_key.end()) continue;  // divergent, logged as skipped
        const ImagePair pair = load_pair(ws, id);
        const double before = mean(dice_all(pair.fixed_labels, pair.moving_labels, L));
        const double dh = a->second->target.mean_dice(), dc = b->second->target.mean_dice();
        const double nh = a->second->target.nfv_percent, nc = b->second->target.nfv_percent;
        std::string kase;
        if (picks[i].hp == cv || dh == dc) {
            kase = "equal";
            ++equal;
        } else if (dh > dc) {
            kase = "better";
            ++better;
        } else {
            kase = "worse";
            ++worse;
        }
        std::vector<std::string> row{id};
        append_hp(row, picks[i].hp, mode);
        append_hp(row, cv, mode);
        row.insert(row.end(), {picks[i].feasible ? "1" : "0", format_number(before), format_number(dh),
                               format_number(dc), format_number(nh), format_number(nc), kase});
        rows.rows.push_back(std::move(row));
        hp_dice.push_back(dh);
        cv_dice.push_back(dc);
        hp_nfv.push_back(nh);
        cv_nfv.push_back(nc);
        before_all.push_back(before);
        // Qualitative example: largest folding reduction, then largest Dice gain.
        const double score = (nc - nh) * 1e3 + (dh - dc);
        if (score > qual_score) {
            qual_score = score;
            qual = rows.rows.size() - 1;
        }
    }
    if (rows.rows.empty()) throw NumericalError("exp2: every test registration diverged");
    emit(ws, "exp2_pairs.csv", rows, report);

    report.summary = {{"mean_dice_hyperpredict", mean(hp_dice)},
                      {"mean_dice_cv", mean(cv_dice)},
                      {"mean_nfv_percent_hyperpredict", mean(hp_nfv)},
                      {"mean_nfv_percent_cv", mean(cv_nfv)},
                      {"mean_dice_before", mean(before_all)},
                      {"better", better},
                      {"worse", worse},
                      {"equal", equal}};
    CsvTable summary;
    summary.header = {"metric", "value"};
    for (const auto& [k, v] : report.summary) summary.rows.push_back({k, format_number(v)});
    emit(ws, "exp2_summary.csv", summary, report);

    CsvTable q;
    q.header = {"pair_id", "before_mean_dice", "hyperpredict_mean_dice", "cv_mean_dice", "hyperpredict_nfv_percent",
                "cv_nfv_percent"};
    const auto& qr = rows.rows[qual];
    const std::size_t off = 1 + 2 * mode_schema(mode).size() + 1;
    q.rows.push_back({qr[0], qr[off], qr[off + 1], qr[off + 2], qr[off + 3], qr[off + 4]});
    emit(ws, "exp2_qualitative.csv", q, report);

    report.rows = rows.rows.size();
    return report;
}

ExperimentReport cmd_experiment3(const PipelineConfig& cfg, const Workspace& ws) {
    const TestSet ts = load_test_set(cfg, ws);
    const HyperparamMode mode = cfg.registration.mode;
    const std::uint32_t L = cfg.dataset.label_count;
    const auto grid = evaluation_grid(cfg, cfg.grid_n);
    const std::string axis = mode_search_names(mode).front();

    std::vector<SweepTable> tables;
    for (const auto& id : ts.ids) tables.push_back(sweep_pair(ts.predictor, ts.enc.at(id), grid));

    ExperimentReport report;
    report.id = "exp3";
    CsvTable optima;
    optima.header = {"pair_id", "objective"};
    for (auto& c : hp_columns(mode)) optima.header.push_back(std::move(c));
    optima.header.insert(optima.header.end(), {"predicted_objective", "predicted_nfv_percent", "feasible"});

    // objective name -> selected log values, one per pair
    std::vector<std::pair<std::string, std::vector<double>>> dists;
    const auto add = [&](const std::string& name, const std::vector<Selection>& sel) {
        std::vector<double> logs;
        for (std::size_t i = 0; i < sel.size(); ++i) {
            std::vector<std::string> row{ts.ids[i], name};
            append_hp(row, sel[i].hp, mode);
            row.insert(row.end(), {format_number(sel[i].objective), format_number(sel[i].metrics.nfv_percent),
                                   sel[i].feasible ? "1" : "0"});
            optima.rows.push_back(std::move(row));
            logs.push_back(std::log(sel[i].hp.get(axis)));
        }
        dists.emplace_back(name, std::move(logs));
    };
    std::vector<Selection> subject;
    for (const auto& t : tables) subject.push_back(select_optimal(t, cfg.selection));
    add("subject", subject);
    for (std::uint32_t l = 1; l <= L; ++l) add("label_" + std::to_string(l), select_per_label(tables, l, cfg.selection));
    emit(ws, "exp3_optima.csv", optima, report);

    constexpr int kBins = 12;
    CsvTable hist;
    hist.header = {"objective", "bin", "log_lo", "log_hi", "count"};
    const double width = (cfg.grid_hi - cfg.grid_lo) / kBins;
    for (const auto& [name, logs] : dists) {
        std::vector<int> counts(kBins, 0);
        for (const double v : logs) {
            const int b = std::clamp(static_cast<int>(std::floor((v - cfg.grid_lo) / width)), 0, kBins - 1);
            ++counts[static_cast<std::size_t>(b)];
        }
        for (int b = 0; b < kBins; ++b) {
            hist.rows.push_back({name, std::to_string(b), format_number(cfg.grid_lo + b * width),
                                 format_number(b == kBins - 1 ? cfg.grid_hi : cfg.grid_lo + (b + 1) * width),
                                 std::to_string(counts[static_cast<std::size_t>(b)])});
        }
        report.summary["median_log_" + name] = median(logs);
    }
    emit(ws, "exp3_histogram.csv", hist, report);

    CsvTable curves;
    curves.header = hp_columns(mode);
    for (std::uint32_t l = 1; l <= L; ++l) curves.header.push_back("dice_" + std::to_string(l));
    curves.header.insert(curves.header.end(), {"mean_dice", "nfv_percent"});
    for (std::size_t g = 0; g < grid.size(); ++g) {
        MetricVector avg;
        avg.dice.assign(L, 0.0);
        for (const auto& t : tables) {
            for (std::uint32_t l = 0; l < L; ++l) avg.dice[l] += t[g].metrics.dice[l];
            avg.nfv_percent += t[g].metrics.nfv_percent;
        }
        for (double& d : avg.dice) d /= static_cast<double>(tables.size());
        avg.nfv_percent /= static_cast<double>(tables.size());
        std::vector<std::string> row;
        append_hp(row, grid[g], mode);
        for (const double d : avg.dice) row.push_back(format_number(d));
        row.push_back(format_number(avg.mean_dice()));
        row.push_back(format_number(avg.nfv_percent));
        curves.rows.push_back(std::move(row));
    }
    emit(ws, "exp3_label_curves.csv", curves, report);
    report.rows = optima.rows.size();
    return report;
}

ExperimentReport cmd_ablations(const PipelineConfig& cfg, const Workspace& ws) {
    const auto manifest = read_manifest(ws);
    const auto test_ids = pair_ids(manifest, {Split::test});
    if (test_ids.empty()) throw DataError("dataset has no test pairs");
    const auto test = test_targets(cfg, ws, test_ids);
    const auto records = read_records(ws.records(), cfg.registration.mode, cfg.dataset.label_count);
    const TrainInputs full = split_records(ws, records);

    std::vector<std::string> all_ids;
    for (const auto& m : manifest) all_ids.push_back(m.id);
    std::map<std::string, EncodingTable> enc_cache;
    const auto encodings = [&](const EncoderConfig& e) -> const EncodingTable& {
        const std::string key = std::string(summary_name(e.summary)) + "/" + bank_name(e.bank);
        auto it = enc_cache.find(key);
        if (it == enc_cache.end()) it = enc_cache.emplace(key, encode_pairs(cfg, ws, all_ids, e)).first;
        return it->second;
    };

    ExperimentReport report;
    report.id = "ablate";
    CsvTable t;
    t.header = {"study", "variant", "metric", "mae"};
    const auto run = [&](const std::string& study, const std::string& variant, const TrainInputs& in,
                         const EncoderConfig& e, const MlpConfig& mlp, const TrainConfig& tc) {
        const auto& enc = encodings(e);
        const TrainResult res = train_variant(cfg, in, enc, e, mlp, tc);
        const ErrorSummary err = prediction_errors(res.predictor, enc, test);
        t.rows.push_back({study, variant, "dice", format_number(err.dice)});
        t.rows.push_back({study, variant, "mean_dice", format_number(err.mean_dice)});
        t.rows.push_back({study, variant, "nfv_percent", format_number(err.nfv)});
        report.summary[study + ":" + variant + ":nfv_percent"] = err.nfv;
        report.summary[study + ":" + variant + ":mean_dice"] = err.mean_dice;
    };

    const int width = cfg.mlp.hidden.empty() ? 64 : cfg.mlp.hidden.front();
    for (const int depth : cfg.ablation.depths) {
        MlpConfig mlp = cfg.mlp;
        mlp.hidden.assign(static_cast<std::size_t>(depth), width);
        run("depth", std::to_string(depth), full, cfg.encoder, mlp, cfg.train);
    }
    if (cfg.ablation.summaries) {
        for (const SummaryMode s : {SummaryMode::mean, SummaryMode::min_max_mean}) {
            EncoderConfig e = cfg.encoder;
            e.summary = s;
            run("summary", summary_name(s), full, e, cfg.mlp, cfg.train);
        }
    }
    if (cfg.ablation.banks) {
        for (const FeatureBank b : {FeatureBank::differential, FeatureBank::smoothing}) {
            EncoderConfig e = cfg.encoder;
            e.bank = b;
            run("encoder", bank_name(b), full, e, cfg.mlp, cfg.train);
        }
    }
    std::vector<double> fractions = cfg.ablation.fractions;
    std::sort(fractions.begin(), fractions.end());
    for (const double f : fractions) {
        TrainInputs in = full;
        in.train = subsample_pairs(full.train, f, derive_seed(cfg.seed, 0x14));
        run("fraction", format_number(f), in, cfg.encoder, cfg.mlp, cfg.train);
    }
    for (const double a : cfg.ablation.alphas) {
        TrainConfig tc = cfg.train;
        tc.alpha = a;
        run("alpha", format_number(a), full, cfg.encoder, cfg.mlp, tc);
    }
    if (t.rows.empty()) throw ConfigError("ablation: no variants configured");
    emit(ws, "ablation.csv", t, report);
    report.rows = t.rows.size();
    return report;
}

ExperimentReport cmd_timing(const PipelineConfig& cfg, const Workspace& ws) {
    using clock = std::chrono::steady_clock;
    const Predictor p = Predictor::load(ws.predictor());
    const auto ids = pair_ids(read_manifest(ws), {Split::test});
    if (ids.empty()) throw DataError("dataset has no test pairs");
    const std::string& id = ids.front();
    const Encoding e = encode_pairs(cfg, ws, {id}, p.encoder()).at(id);
    const ImagePair pair = load_pair(ws, id);

    std::vector<HyperparamPoint> grid;
    if (cfg.timing_values == 1) {
        grid = {evaluation_grid(cfg, 2).front()};
    } else {
        grid = evaluation_grid(cfg, cfg.timing_values);
    }
    const auto t0 = clock::now();
    const Selection s = select_optimal(sweep_pair(p, e, grid), cfg.selection);
    const auto t1 = clock::now();
    const auto result = register_pair(pair, s.hp, cfg.registration);
    const auto t2 = clock::now();
    (void)result;

    const double sweep = std::chrono::duration<double>(t1 - t0).count();
    const double reg = std::chrono::duration<double>(t2 - t1).count();
    ExperimentReport report;
    report.id = "timing";
    CsvTable t;
    t.header = {"pair_id", "n_values", "sweep_seconds", "register_seconds", "with_registration_seconds"};
    t.rows.push_back({id, std::to_string(grid.size()), format_number(sweep), format_number(reg),
                      format_number(sweep + reg)});
    emit(ws, "timing.csv", t, report);
    report.rows = 1;
    report.summary = {{"sweep_seconds", sweep}, {"register_seconds", reg}, {"with_registration_seconds", sweep + reg}};
    return report;
}

}  // namespace hyperpredict
