#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hyperpredict/errors.hpp"
#include "hyperpredict/pipeline.hpp"
#include "hyperpredict/rng.hpp"

namespace hyperpredict {

using nlohmann::json;

namespace {

// Unknown keys are rejected so typos do not silently fall back to defaults.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
        if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

Similarity parse_similarity(const std::string& s) {
    if (s == "mse") return Similarity::mse;
    if (s == "ncc") return Similarity::ncc;
    throw ConfigError("unknown similarity '" + s + "'");
}

const char* similarity_name(Similarity s) { return s == Similarity::mse ? "mse" : "ncc"; }

const char* policy_name(InfeasiblePolicy p) {
    return p == InfeasiblePolicy::error ? "error" : "min_nfv_fallback";
}

void parse_dataset(const json& j, DatasetConfig& d) {
    check_keys(j, "dataset", {"nx", "ny", "label_count", "amplitude", "amplitude_max", "smoothness",
                              "noise_sd", "pair_count", "fractions"});
    int nx = d.shape.nx, ny = d.shape.ny;
    read(j, "nx", nx);
    read(j, "ny", ny);
    d.shape = Shape{nx, ny};
    read(j, "label_count", d.label_count);
    read(j, "amplitude", d.amplitude);
    read(j, "amplitude_max", d.amplitude_max);
    read(j, "smoothness", d.smoothness);
    read(j, "noise_sd", d.noise_sd);
    read(j, "pair_count", d.pair_count);
    if (j.contains("fractions")) {
        std::vector<double> f;
        read(j, "fractions", f);
        if (f.size() != 3) throw ConfigError("dataset.fractions needs three values");
        d.train_fraction = f[0];
        d.val_fraction = f[1];
        d.test_fraction = f[2];
    }
}

void parse_registration(const json& j, RegistrationConfig& r) {
    check_keys(j, "registration",
               {"mode", "similarity", "iterations", "step_size", "levels", "tolerance", "spacing"});
    std::string s;
    if (j.contains("mode")) {
        read(j, "mode", s);
        r.mode = parse_mode(s);
    }
    if (j.contains("similarity")) {
        read(j, "similarity", s);
        r.similarity = parse_similarity(s);
    }
    read(j, "iterations", r.iterations);
    read(j, "step_size", r.step_size);
    read(j, "levels", r.levels);
    read(j, "tolerance", r.tolerance);
    read(j, "spacing", r.default_spacing);
}

void parse_encoder(const json& j, EncoderConfig& e) {
    check_keys(j, "encoder", {"channels", "pool", "summary", "bank"});
    read(j, "channels", e.channels);
    if (j.contains("pool")) {
        std::vector<int> p;
        read(j, "pool", p);
        if (p.size() != 2) throw ConfigError("encoder.pool needs [nx, ny]");
        e.pool_nx = p[0];
        e.pool_ny = p[1];
    }
    std::string s;
    if (j.contains("summary")) {
        read(j, "summary", s);
        e.summary = parse_summary(s);
    }
    if (j.contains("bank")) {
        read(j, "bank", s);
        e.bank = parse_bank(s);
    }
}

void parse_train(const json& j, TrainConfig& t) {
    check_keys(j, "train", {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "epochs", "alpha",
                            "log_mu", "log_sigma"});
    read(j, "learning_rate", t.learning_rate);
    read(j, "beta1", t.beta1);
    read(j, "beta2", t.beta2);
    read(j, "epsilon", t.epsilon);
    read(j, "batch_size", t.batch_size);
    read(j, "epochs", t.epochs);
    read(j, "alpha", t.alpha);
    read(j, "log_mu", t.log_mu);
    read(j, "log_sigma", t.log_sigma);
}

void parse_selection(const json& j, SelectionCriterion& c) {
    check_keys(j, "selection", {"nfv_ceiling", "objective", "labels", "policy"});
    read(j, "nfv_ceiling", c.nfv_ceiling);
    std::string s;
    if (j.contains("objective")) {
        read(j, "objective", s);
        c.objective = parse_objective(s);
    }
    read(j, "labels", c.labels);
    if (j.contains("policy")) {
        read(j, "policy", s);
        c.policy = parse_policy(s);
    }
}

void parse_ablation(const json& j, AblationConfig& a) {
    check_keys(j, "ablation", {"depths", "fractions", "alphas", "summaries", "banks"});
    read(j, "depths", a.depths);
    read(j, "fractions", a.fractions);
    read(j, "alphas", a.alphas);
    read(j, "summaries", a.summaries);
    read(j, "banks", a.banks);
}

}  // namespace

void PipelineConfig::apply_seed() {
    dataset.seed = seed;
    mlp.init_seed = derive_seed(seed, 0x11);
    train.shuffle_seed = derive_seed(seed, 0x12);
}

void PipelineConfig::validate() const {
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (samples_per_pair < 1) throw ConfigError("samples_per_pair must be >= 1");
    if (!(data_fraction > 0.0 && data_fraction <= 1.0)) throw ConfigError("data_fraction must be in (0, 1]");
    dataset.validate();
    registration.validate();
    encoder.validate();
    mlp.validate();
    train.validate();
    selection.validate();
    for (const auto l : selection.labels) {
        if (l > dataset.label_count) throw ConfigError("selection label exceeds label_count");
    }
    if (!(grid_lo < grid_hi)) throw ConfigError("grid.lo must be < grid.hi");
    if (grid_n < 2) throw ConfigError("grid.n must be >= 2");
    if (exp1_points < 2) throw ConfigError("exp1_points must be >= 2");
    if (cv_candidate_count < 2) throw ConfigError("cv_candidates must be >= 2");
    if (!(fixed_le > 0.0)) throw ConfigError("fixed_le must be > 0");
    if (timing_values < 1) throw ConfigError("timing_values must be >= 1");
    for (const int d : ablation.depths) {
        if (d < 1) throw ConfigError("ablation depths must be >= 1");
    }
    for (const double f : ablation.fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("ablation fractions must be in (0, 1]");
    }
    for (const double a : ablation.alphas) {
        if (!(a >= 0.0)) throw ConfigError("ablation alphas must be >= 0");
    }
}

PipelineConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "config", {"seed", "workers", "samples_per_pair", "data_fraction", "dataset", "registration",
                             "encoder", "mlp", "train", "selection", "grid", "exp1_points", "cv_candidates",
                             "fixed_le", "timing_values", "ablation"});
    PipelineConfig cfg;
    read(j, "seed", cfg.seed);
    read(j, "workers", cfg.workers);
    read(j, "samples_per_pair", cfg.samples_per_pair);
    read(j, "data_fraction", cfg.data_fraction);
    if (j.contains("dataset")) parse_dataset(j["dataset"], cfg.dataset);
    if (j.contains("registration")) parse_registration(j["registration"], cfg.registration);
    if (j.contains("encoder")) parse_encoder(j["encoder"], cfg.encoder);
    if (j.contains("mlp")) {
        check_keys(j["mlp"], "mlp", {"hidden", "negative_slope"});
        read(j["mlp"], "hidden", cfg.mlp.hidden);
        read(j["mlp"], "negative_slope", cfg.mlp.negative_slope);
    }
    if (j.contains("train")) parse_train(j["train"], cfg.train);
    if (j.contains("selection")) parse_selection(j["selection"], cfg.selection);
    if (j.contains("grid")) {
        check_keys(j["grid"], "grid", {"lo", "hi", "n"});
        read(j["grid"], "lo", cfg.grid_lo);
        read(j["grid"], "hi", cfg.grid_hi);
        read(j["grid"], "n", cfg.grid_n);
    }
    read(j, "exp1_points", cfg.exp1_points);
    read(j, "cv_candidates", cfg.cv_candidate_count);
    read(j, "fixed_le", cfg.fixed_le);
    read(j, "timing_values", cfg.timing_values);
    if (j.contains("ablation")) parse_ablation(j["ablation"], cfg.ablation);
    cfg.apply_seed();
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_json_text(ss.str());
}

std::string config_to_json_text(const PipelineConfig& cfg) {
    const auto& d = cfg.dataset;
    const auto& r = cfg.registration;
    const auto& e = cfg.encoder;
    const auto& t = cfg.train;
    const auto& s = cfg.selection;
    json j;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["samples_per_pair"] = cfg.samples_per_pair;
    j["data_fraction"] = cfg.data_fraction;
    j["dataset"] = {{"nx", d.shape.nx},
                    {"ny", d.shape.ny},
                    {"label_count", d.label_count},
                    {"amplitude", d.amplitude},
                    {"amplitude_max", d.amplitude_max},
                    {"smoothness", d.smoothness},
                    {"noise_sd", d.noise_sd},
                    {"pair_count", d.pair_count},
                    {"fractions", {d.train_fraction, d.val_fraction, d.test_fraction}}};
    j["registration"] = {{"mode", mode_name(r.mode)},
                         {"similarity", similarity_name(r.similarity)},
                         {"iterations", r.iterations},
                         {"step_size", r.step_size},
                         {"levels", r.levels},
                         {"tolerance", r.tolerance},
                         {"spacing", r.default_spacing}};
    j["encoder"] = {{"channels", e.channels},
                    {"pool", {e.pool_nx, e.pool_ny}},
                    {"summary", summary_name(e.summary)},
                    {"bank", bank_name(e.bank)}};
    j["mlp"] = {{"hidden", cfg.mlp.hidden}, {"negative_slope", cfg.mlp.negative_slope}};
    j["train"] = {{"learning_rate", t.learning_rate}, {"beta1", t.beta1}, {"beta2", t.beta2},
                  {"epsilon", t.epsilon},             {"batch_size", t.batch_size},
                  {"epochs", t.epochs},               {"alpha", t.alpha},
                  {"log_mu", t.log_mu},               {"log_sigma", t.log_sigma}};
    j["selection"] = {{"nfv_ceiling", s.nfv_ceiling},
                      {"objective", objective_name(s.objective)},
                      {"labels", s.labels},
                      {"policy", policy_name(s.policy)}};
    j["grid"] = {{"lo", cfg.grid_lo}, {"hi", cfg.grid_hi}, {"n", cfg.grid_n}};
    j["exp1_points"] = cfg.exp1_points;
    j["cv_candidates"] = cfg.cv_candidate_count;
    j["fixed_le"] = cfg.fixed_le;
    j["timing_values"] = cfg.timing_values;
    j["ablation"] = {{"depths", cfg.ablation.depths},
                     {"fractions", cfg.ablation.fractions},
                     {"alphas", cfg.ablation.alphas},
                     {"summaries", cfg.ablation.summaries},
                     {"banks", cfg.ablation.banks}};
    return j.dump(2);
}

}  // namespace hyperpredict
