#include "hyperpredict/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hyperpredict/errors.hpp"
#include "hyperpredict/grid_io.hpp"
#include "hyperpredict/rng.hpp"

namespace hyperpredict {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPrecomputeStream = 0x13;
constexpr std::uint64_t kSubsampleStream = 0x14;

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw DataError("cannot read " + p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::string> hp_columns(HyperparamMode mode) {
    std::vector<std::string> out;
    for (const auto& n : mode_schema(mode)) out.push_back("hp_" + n);
    return out;
}

fs::path skip_file(const fs::path& cache) {
    return cache.parent_path() / (cache.stem().string() + "_skipped.csv");
}

}  // namespace

// Dataset ----------------------------------------------------------------

std::vector<ManifestEntry> generate_dataset(const PipelineConfig& cfg, const Workspace& ws) {
    cfg.dataset.validate();
    const auto split = split_dataset(cfg.dataset);
    std::vector<ManifestEntry> manifest(static_cast<std::size_t>(cfg.dataset.pair_count));
    const auto assign = [&](const std::vector<int>& idx, Split s) {
        for (const int i : idx) manifest[static_cast<std::size_t>(i)] = {format_pair_id(i), s};
    };
    assign(split.train, Split::train);
    assign(split.val, Split::val);
    assign(split.test, Split::test);

    fs::create_directories(ws.pairs_dir());
    for (int i = 0; i < cfg.dataset.pair_count; ++i) {
        const ImagePair pair = generate_pair(cfg.dataset, i);
        const fs::path dir = ws.pair_dir(pair.id);
        fs::create_directories(dir);
        save_grid(dir / "fixed.grid", pair.fixed);
        save_grid(dir / "moving.grid", pair.moving);
        save_grid(dir / "fixed_labels.grid", pair.fixed_labels);
        save_grid(dir / "moving_labels.grid", pair.moving_labels);
    }
    CsvTable t;
    t.header = {"id", "split"};
    for (const auto& m : manifest) t.rows.push_back({m.id, split_name(m.split)});
    write_csv(ws.manifest(), t);

    std::ofstream os(ws.dataset_json());
    PipelineConfig snapshot = cfg;
    os << config_to_json_text(snapshot) << '\n';
    return manifest;
}

std::vector<ManifestEntry> read_manifest(const Workspace& ws) {
    if (!fs::exists(ws.manifest())) {
        throw DataError("no dataset in " + ws.root().string() + " (run gen-data first)");
    }
    const CsvTable t = read_csv(ws.manifest());
    std::vector<ManifestEntry> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.push_back({t.at(r, "id"), parse_split(t.at(r, "split"))});
    }
    return out;
}

std::vector<std::string> pair_ids(const std::vector<ManifestEntry>& manifest, std::vector<Split> splits) {
    std::vector<std::string> out;
    for (const auto& m : manifest) {
        if (std::find(splits.begin(), splits.end(), m.split) != splits.end()) out.push_back(m.id);
    }
    return out;
}

ImagePair load_pair(const Workspace& ws, const std::string& id) {
    const fs::path dir = ws.pair_dir(id);
    if (!fs::exists(dir)) throw DataError("unknown pair '" + id + "'");
    ImagePair p;
    p.id = id;
    p.fixed = load_scalar_grid(dir / "fixed.grid");
    p.moving = load_scalar_grid(dir / "moving.grid");
    p.fixed_labels = load_label_grid(dir / "fixed_labels.grid");
    p.moving_labels = load_label_grid(dir / "moving_labels.grid");
    return p;
}

std::string dataset_hash(const Workspace& ws) {
    std::uint64_t h = hash_string(read_file(ws.manifest()));
    for (const auto& m : read_manifest(ws)) {
        for (const char* name : {"fixed", "moving", "fixed_labels", "moving_labels"}) {
            h = mix64(h ^ hash_string(read_file(ws.pair_dir(m.id) / (std::string(name) + ".grid"))));
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Records ----------------------------------------------------------------

std::vector<std::string> record_header(HyperparamMode mode, std::uint32_t label_count) {
    std::vector<std::string> h{"pair_id"};
    for (auto& c : hp_columns(mode)) h.push_back(std::move(c));
    for (std::uint32_t l = 1; l <= label_count; ++l) h.push_back("dice_" + std::to_string(l));
    h.insert(h.end(), {"mean_dice", "nfv", "nfv_percent"});
    return h;
}

std::vector<std::string> record_row(const RegistrationRecord& r, HyperparamMode mode) {
    std::vector<std::string> row{r.pair_id};
    for (const auto& n : mode_schema(mode)) row.push_back(format_number(r.hp.get(n)));
    for (const double d : r.target.dice) row.push_back(format_number(d));
    row.push_back(format_number(r.target.mean_dice()));
    row.push_back(std::to_string(r.nfv));
    row.push_back(format_number(r.target.nfv_percent));
    return row;
}

RegistrationRecord parse_record(const CsvTable& t, std::size_t row, HyperparamMode mode,
                                std::uint32_t label_count) {
    RegistrationRecord r;
    r.pair_id = t.at(row, "pair_id");
    for (const auto& n : mode_schema(mode)) r.hp.set(n, t.number(row, "hp_" + n));
    r.target.dice.resize(label_count);
    for (std::uint32_t l = 1; l <= label_count; ++l) r.target.dice[l - 1] = t.number(row, "dice_" + std::to_string(l));
    r.nfv = static_cast<std::size_t>(t.number(row, "nfv"));
    r.target.nfv_percent = t.number(row, "nfv_percent");
    return r;
}

std::vector<RegistrationRecord> read_records(const fs::path& path, HyperparamMode mode,
                                             std::uint32_t label_count) {
    const CsvTable t = read_csv(path);
    if (t.header != record_header(mode, label_count)) {
        throw DataError(path.string() + ": header does not match the configured mode/label count");
    }
    std::vector<RegistrationRecord> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) out.push_back(parse_record(t, r, mode, label_count));
    return out;
}

void write_records(const fs::path& path, const std::vector<RegistrationRecord>& records, HyperparamMode mode,
                   std::uint32_t label_count) {
    CsvTable t;
    t.header = record_header(mode, label_count);
    for (const auto& r : records) t.rows.push_back(record_row(r, mode));
    write_csv(path, t);
}

std::string job_key(const std::string& pair_id, const HyperparamPoint& hp) { return pair_id + "|" + hp.key(); }

std::vector<RegistrationRecord> run_oracle_jobs(const PipelineConfig& cfg, const Workspace& ws,
                                                const std::vector<OracleJob>& jobs, const fs::path& cache,
                                                OracleRunSummary* summary) {
    const HyperparamMode mode = cfg.registration.mode;
    const std::uint32_t L = cfg.dataset.label_count;
    if (!cache.parent_path().empty()) fs::create_directories(cache.parent_path());

    // Existing rows, in file order.
    std::vector<RegistrationRecord> existing;
    std::map<std::string, std::size_t> done;
    if (fs::exists(cache)) {
        existing = read_records(cache, mode, L);
        for (std::size_t i = 0; i < existing.size(); ++i) done.emplace(job_key(existing[i].pair_id, existing[i].hp), i);
    }
    const fs::path skips = skip_file(cache);
    std::set<std::string> skipped;
    CsvTable skip_table;
    skip_table.header = {"pair_id", "hp_key", "reason"};
    if (fs::exists(skips)) {
        skip_table = read_csv(skips);
        for (std::size_t r = 0; r < skip_table.rows.size(); ++r) {
            skipped.insert(skip_table.at(r, "pair_id") + "|" + skip_table.at(r, "hp_key"));
        }
    }

    std::vector<std::size_t> pending;
    std::set<std::string> queued;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        cfg.registration.check_hyperparams(jobs[j].hp);
        const std::string k = job_key(jobs[j].pair_id, jobs[j].hp);
        if (done.count(k) || skipped.count(k) || queued.count(k)) continue;
        queued.insert(k);
        pending.push_back(j);
    }
    OracleRunSummary sum;

    if (!pending.empty()) {
        // Rewrite what is already there so a partially written line from an
        // interrupted run does not corrupt the appended rows.
        write_records(cache, existing, mode, L);
        write_csv(skips, skip_table);

        std::map<std::string, ImagePair> pairs;
        for (const std::size_t j : pending) {
            if (!pairs.count(jobs[j].pair_id)) pairs.emplace(jobs[j].pair_id, load_pair(ws, jobs[j].pair_id));
        }
        std::ofstream out(cache, std::ios::app);
        std::ofstream skip_out(skips, std::ios::app);
        std::mutex writer;
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::atomic<bool> stop{false};

        const auto work = [&] {
            while (!stop) {
                const std::size_t n = next.fetch_add(1);
                if (n >= pending.size()) return;
                const OracleJob& job = jobs[pending[n]];
                try {
                    const ImagePair& pair = pairs.at(job.pair_id);
                    const auto result = register_pair(pair, job.hp, cfg.registration);
                    const auto targets = evaluate_registration(pair, result.field, L);
                    RegistrationRecord rec{job.pair_id, job.hp, targets.metrics, targets.nfv};
                    std::lock_guard lock(writer);
                    out << join(record_row(rec, mode)) << '\n' << std::flush;
                    done.emplace(job_key(rec.pair_id, rec.hp), existing.size());
                    existing.push_back(std::move(rec));
                    ++sum.computed;
                } catch (const NumericalError& e) {
                    std::lock_guard lock(writer);
                    std::string reason = e.what();
                    std::replace(reason.begin(), reason.end(), ',', ';');
                    skip_out << job.pair_id << ',' << job.hp.key() << ',' << reason << '\n' << std::flush;
                    skipped.insert(job_key(job.pair_id, job.hp));
                    skip_table.rows.push_back({job.pair_id, job.hp.key(), reason});
                    ++sum.skipped;
                } catch (...) {
                    std::lock_guard lock(writer);
                    if (!failure) failure = std::current_exception();
                    stop = true;
                }
            }
        };
        const int n_workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(pending.size())));
        {
            std::vector<std::jthread> pool;
            for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
            work();
        }
        out.close();
        skip_out.close();
        if (failure) std::rethrow_exception(failure);
    }

    // Canonical order: the job list first, then any unrelated earlier rows.
    std::vector<RegistrationRecord> result;
    std::vector<bool> used(existing.size(), false);
    std::set<std::string> emitted;
    for (const auto& job : jobs) {
        const std::string k = job_key(job.pair_id, job.hp);
        const auto it = done.find(k);
        if (it == done.end() || emitted.count(k)) continue;
        emitted.insert(k);
        used[it->second] = true;
        result.push_back(existing[it->second]);
    }
    std::vector<RegistrationRecord> canonical = result;
    for (std::size_t i = 0; i < existing.size(); ++i) {
        if (!used[i]) canonical.push_back(existing[i]);
    }
    write_records(cache, canonical, mode, L);
    if (!pending.empty()) {
        std::stable_sort(skip_table.rows.begin(), skip_table.rows.end());
        write_csv(skips, skip_table);
    }

    sum.rows = result.size();
    sum.reused = sum.rows - sum.computed;
    sum.skipped = 0;
    std::set<std::string> seen;
    for (const auto& job : jobs) {
        const std::string k = job_key(job.pair_id, job.hp);
        if (skipped.count(k) && seen.insert(k).second) ++sum.skipped;
    }
    if (summary) *summary = sum;
    return result;
}

std::vector<HyperparamPoint> precompute_samples(const PipelineConfig& cfg, const std::string& pair_id) {
    const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, kPrecomputeStream), hash_string(pair_id));
    return sample_hyperparams(cfg.registration.mode, cfg.train.log_mu, cfg.train.log_sigma, cfg.samples_per_pair,
                              seed, cfg.registration.default_spacing);
}

OracleRunSummary cmd_precompute(const PipelineConfig& cfg, const Workspace& ws, const std::vector<Split>& splits) {
    const auto ids = pair_ids(read_manifest(ws), splits);
    std::vector<OracleJob> jobs;
    for (const auto& id : ids) {
        for (auto& hp : precompute_samples(cfg, id)) jobs.push_back({id, std::move(hp)});
    }
    OracleRunSummary sum;
    run_oracle_jobs(cfg, ws, jobs, ws.records(), &sum);
    return sum;
}

// Encodings --------------------------------------------------------------

EncodingTable encode_pairs(const PipelineConfig& cfg, const Workspace& ws, const std::vector<std::string>& ids,
                           const EncoderConfig& encoder) {
    EncodingTable table;
    std::vector<Encoding> out(ids.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    const auto work = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= ids.size()) return;
            try {
                out[i] = encode(load_pair(ws, ids[i]), encoder);
            } catch (...) {
                std::lock_guard lock(m);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const int n = std::max(1, std::min<int>(cfg.workers, static_cast<int>(ids.size())));
        for (int w = 1; w < n; ++w) pool.emplace_back(work);
        work();
    }
    if (failure) std::rethrow_exception(failure);
    for (std::size_t i = 0; i < ids.size(); ++i) table.emplace(ids[i], std::move(out[i]));
    return table;
}

void write_encodings(const fs::path& path, const EncodingTable& table) {
    CsvTable t;
    t.header = {"pair_id"};
    const std::size_t dim = table.empty() ? 0 : table.begin()->second.values.size();
    for (std::size_t i = 0; i < dim; ++i) t.header.push_back("e_" + std::to_string(i));
    for (const auto& [id, e] : table) {
        if (e.values.size() != dim) throw DataError("encodings of differing length");
        std::vector<std::string> row{id};
        for (const double v : e.values) row.push_back(format_number(v));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

EncodingTable read_encodings(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("missing encodings " + path.string() + " (run encode first)");
    const CsvTable t = read_csv(path);
    EncodingTable table;
    for (const auto& row : t.rows) {
        Encoding e;
        for (std::size_t i = 1; i < row.size(); ++i) e.values.push_back(parse_number(row[i]));
        table.emplace(row.at(0), std::move(e));
    }
    return table;
}

EncodingTable cmd_encode(const PipelineConfig& cfg, const Workspace& ws) {
    const auto manifest = read_manifest(ws);
    std::vector<std::string> ids;
    for (const auto& m : manifest) ids.push_back(m.id);
    auto table = encode_pairs(cfg, ws, ids, cfg.encoder);
    write_encodings(ws.encodings(), table);
    return table;
}

// Training ---------------------------------------------------------------

std::vector<RegistrationRecord> subsample_pairs(const std::vector<RegistrationRecord>& records, double fraction,
                                                std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("data fraction must be in (0, 1]");
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.pair_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (fraction >= 1.0 || ids.empty()) return records;
    Rng rng(seed);
    for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.below(i + 1)]);
    const auto keep_n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * ids.size())));
    const std::set<std::string> keep(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep_n));
    std::vector<RegistrationRecord> out;
    for (const auto& r : records) {
        if (keep.count(r.pair_id)) out.push_back(r);
    }
    return out;
}

TrainInputs split_records(const Workspace& ws, const std::vector<RegistrationRecord>& records) {
    std::map<std::string, Split> split;
    for (const auto& m : read_manifest(ws)) split[m.id] = m.split;
    TrainInputs in;
    for (const auto& r : records) {
        const auto it = split.find(r.pair_id);
        if (it == split.end()) throw DataError("record for unknown pair '" + r.pair_id + "'");
        if (it->second == Split::train) in.train.push_back(r);
        if (it->second == Split::val) in.val.push_back(r);
    }
    return in;
}

namespace {

TrainResult train_on(const PipelineConfig& cfg, const TrainInputs& in, const EncodingTable& enc,
                     const EncoderConfig& encoder, const MlpConfig& mlp, const TrainConfig& tc) {
    if (in.train.empty()) throw DataError("no training records (run precompute first)");
    for (const auto* rs : {&in.train, &in.val}) {
        for (const auto& r : *rs) {
            if (!enc.count(r.pair_id)) throw DataError("missing encoding for pair '" + r.pair_id + "'");
        }
    }
    TrainingData data{in.train, in.val, [&](const std::string& id) -> const Encoding& { return enc.at(id); }};
    return train(data, encoder, mode_search_names(cfg.registration.mode), cfg.dataset.label_count, mlp, tc);
}

}  // namespace

TrainResult cmd_train(const PipelineConfig& cfg, const Workspace& ws) {
    const auto records = read_records(ws.records(), cfg.registration.mode, cfg.dataset.label_count);
    TrainInputs in = split_records(ws, records);
    in.train = subsample_pairs(in.train, cfg.data_fraction, derive_seed(cfg.seed, kSubsampleStream));
    const EncodingTable enc = read_encodings(ws.encodings());
    const auto expected = encoding_length(cfg.encoder);
    for (const auto& [id, e] : enc) {
        if (e.values.size() != expected) throw DataError("encodings do not match the encoder config (re-run encode)");
    }
    TrainResult res = train_on(cfg, in, enc, cfg.encoder, cfg.mlp, cfg.train);
    res.predictor.save(ws.predictor());
    CsvTable curve;
    curve.header = {"epoch", "train_loss", "val_loss"};
    for (const auto& e : res.log) {
        curve.rows.push_back({std::to_string(e.epoch), format_number(e.train_loss), format_number(e.val_loss)});
    }
    write_csv(ws.loss_curve(), curve);
    return res;
}

TrainResult train_variant(const PipelineConfig& cfg, const TrainInputs& in, const EncodingTable& enc,
                          const EncoderConfig& encoder, const MlpConfig& mlp, const TrainConfig& tc) {
    return train_on(cfg, in, enc, encoder, mlp, tc);
}

// Sweeps and selection ---------------------------------------------------

std::vector<HyperparamPoint> evaluation_grid(const PipelineConfig& cfg, int n) {
    const auto values = make_grid(cfg.grid_lo, cfg.grid_hi, n);
    if (cfg.registration.mode == HyperparamMode::single) return grid_points("lambda", values);
    HyperparamPoint fixed{{"le", cfg.fixed_le}, {"sx", static_cast<double>(cfg.registration.default_spacing)}};
    return grid_points("be", values, fixed);
}

std::vector<HyperparamPoint> cv_candidates(const PipelineConfig& cfg) {
    return evaluation_grid(cfg, cfg.cv_candidate_count);
}

namespace {

std::vector<std::string> sweep_header(HyperparamMode mode, std::uint32_t L) {
    std::vector<std::string> h = hp_columns(mode);
    for (std::uint32_t l = 1; l <= L; ++l) h.push_back("dice_" + std::to_string(l));
    h.insert(h.end(), {"mean_dice", "nfv_percent"});
    return h;
}

Encoding encoding_for(const Workspace& ws, const std::string& id, const EncoderConfig& encoder) {
    if (fs::exists(ws.encodings())) {
        const auto table = read_encodings(ws.encodings());
        const auto it = table.find(id);
        if (it != table.end() && it->second.values.size() == encoding_length(encoder)) return it->second;
    }
    return encode(load_pair(ws, id), encoder);
}

}  // namespace

fs::path cmd_sweep(const PipelineConfig& cfg, const Workspace& ws, const std::string& pair_id, bool two_d) {
    const Predictor p = Predictor::load(ws.predictor());
    const Encoding e = encoding_for(ws, pair_id, p.encoder());
    const HyperparamMode mode = cfg.registration.mode;
    SweepTable table;
    if (two_d) {
        if (mode != HyperparamMode::multi) throw ConfigError("2D sweeps need registration.mode = multi");
        const auto values = make_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_n);
        table = sweep_2d(p, e, values, values, {{"sx", static_cast<double>(cfg.registration.default_spacing)}});
    } else {
        table = sweep_pair(p, e, evaluation_grid(cfg, cfg.grid_n));
    }
    CsvTable t;
    t.header = sweep_header(mode, p.label_count());
    for (const auto& row : table) {
        std::vector<std::string> r;
        for (const auto& n : mode_schema(mode)) r.push_back(format_number(row.hp.get(n)));
        for (const double d : row.metrics.dice) r.push_back(format_number(d));
        r.push_back(format_number(row.metrics.mean_dice()));
        r.push_back(format_number(row.metrics.nfv_percent));
        t.rows.push_back(std::move(r));
    }
    fs::create_directories(ws.reports());
    const fs::path out = ws.reports() / ((two_d ? "sweep2d_" : "sweep_") + pair_id + ".csv");
    write_csv(out, t);
    return out;
}

fs::path cmd_select(const PipelineConfig& cfg, const Workspace& ws, Split split) {
    const Predictor p = Predictor::load(ws.predictor());
    const auto ids = pair_ids(read_manifest(ws), {split});
    const auto enc = encode_pairs(cfg, ws, ids, p.encoder());
    const auto grid = evaluation_grid(cfg, cfg.grid_n);
    const HyperparamMode mode = cfg.registration.mode;
    CsvTable t;
    t.header = {"pair_id"};
    for (auto& c : hp_columns(mode)) t.header.push_back(std::move(c));
    t.header.insert(t.header.end(), {"predicted_objective", "predicted_nfv_percent", "feasible"});
    for (const auto& id : ids) {
        const Selection s = select_optimal(sweep_pair(p, enc.at(id), grid), cfg.selection);
        std::vector<std::string> r{id};
        for (const auto& n : mode_schema(mode)) r.push_back(format_number(s.hp.get(n)));
        r.push_back(format_number(s.objective));
        r.push_back(format_number(s.metrics.nfv_percent));
        r.push_back(s.feasible ? "1" : "0");
        t.rows.push_back(std::move(r));
    }
    fs::create_directories(ws.reports());
    const fs::path out = ws.reports() / "selections.csv";
    write_csv(out, t);
    return out;
}

RegisterOutput cmd_register(const PipelineConfig& cfg, const Workspace& ws, const std::string& pair_id,
                            const HyperparamPoint& hp) {
    cfg.registration.check_hyperparams(hp);
    HyperparamPoint full = hp;
    if (cfg.registration.mode == HyperparamMode::multi && !full.contains("sx")) {
        full.set("sx", cfg.registration.default_spacing);
    }
    const ImagePair pair = load_pair(ws, pair_id);
    const auto result = register_pair(pair, full, cfg.registration);
    RegisterOutput out;
    out.targets = evaluate_registration(pair, result.field, cfg.dataset.label_count);
    const fs::path dir = ws.root() / "registrations" / pair_id;
    fs::create_directories(dir);
    out.field = dir / "field.grid";
    out.metrics = dir / "metrics.csv";
    save_grid(out.field, result.field);
    write_records(out.metrics, {{pair_id, full, out.targets.metrics, out.targets.nfv}}, cfg.registration.mode,
                  cfg.dataset.label_count);
    return out;
}

// Run manifests ------------------------------------------------------------

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_run_manifest(const PipelineConfig& cfg, const Workspace& ws, const std::string& command,
                        const std::string& started, const std::vector<fs::path>& outputs) {
    using nlohmann::json;
    json j;
    j["command"] = command;
    j["config"] = json::parse(config_to_json_text(cfg));
    j["seeds"] = {{"global", cfg.seed},
                  {"dataset", cfg.dataset.seed},
                  {"init", cfg.mlp.init_seed},
                  {"shuffle", cfg.train.shuffle_seed},
                  {"precompute", derive_seed(cfg.seed, kPrecomputeStream)},
                  {"subsample", derive_seed(cfg.seed, kSubsampleStream)}};
    j["dataset_hash"] = fs::exists(ws.manifest()) ? dataset_hash(ws) : "";
    j["started"] = started;
    j["finished"] = utc_timestamp();
    j["out_dir"] = fs::absolute(ws.root()).string();
    std::vector<std::string> rel;
    for (const auto& p : outputs) rel.push_back(fs::relative(p, ws.root()).generic_string());
    j["outputs"] = rel;
    fs::create_directories(ws.runs());
    std::ofstream os(ws.runs() / (command + ".json"));
    os << j.dump(2) << '\n';
}

}  // namespace hyperpredict
