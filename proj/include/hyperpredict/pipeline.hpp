#pragma once

// End-to-end orchestration: dataset generation, oracle precompute into the CSV
// cache, encoding, training, sweeps/selection, and the experiment suites.
//
// Everything lives under one output directory:
//   pairs/<id>/{fixed,moving,fixed_labels,moving_labels}.grid
//   manifest.csv          id,split
//   records.csv           oracle targets for train/val pairs
//   encodings.csv         pair_id,e_0..e_{D-1}
//   predictor.bin         trained surrogate
//   loss_curve.csv        epoch,train_loss,val_loss
//   reports/*.csv         experiment outputs
//   runs/<command>.json   run manifests

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hyperpredict/csv.hpp"
#include "hyperpredict/selection.hpp"

namespace hyperpredict {

struct AblationConfig {
    std::vector<int> depths{1, 2};
    std::vector<double> fractions{0.25, 0.5, 1.0};
    std::vector<double> alphas{0.0, 0.1, 1.0, 10.0};
    bool summaries = true;  // mean vs min_max_mean
    bool banks = true;      // differential vs smoothing feature bank
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    int workers = 1;
    int samples_per_pair = 16;
    double data_fraction = 1.0;

    DatasetConfig dataset;
    RegistrationConfig registration;
    EncoderConfig encoder;
    MlpConfig mlp;
    TrainConfig train;
    SelectionCriterion selection;

    // Evaluation grid, natural-log exponents.
    double grid_lo = -7.6;
    double grid_hi = -1.6;
    int grid_n = 200;
    int exp1_points = 20;      // grid values per test pair in Experiment 1
    int cv_candidate_count = 10;  // log-spaced over the grid range
    double fixed_le = 0.01;    // multi mode: "le" pinned for 1D sweeps
    int timing_values = 8000;
    AblationConfig ablation;

    // Propagates the global seed into component seeds.
    void apply_seed();
    void validate() const;
};

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const PipelineConfig& cfg);

class Workspace {
public:
    explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}

    [[nodiscard]] const std::filesystem::path& root() const { return root_; }
    [[nodiscard]] std::filesystem::path pairs_dir() const { return root_ / "pairs"; }
    [[nodiscard]] std::filesystem::path pair_dir(const std::string& id) const { return pairs_dir() / id; }
    [[nodiscard]] std::filesystem::path manifest() const { return root_ / "manifest.csv"; }
    [[nodiscard]] std::filesystem::path dataset_json() const { return root_ / "dataset.json"; }
    [[nodiscard]] std::filesystem::path records() const { return root_ / "records.csv"; }
    [[nodiscard]] std::filesystem::path encodings() const { return root_ / "encodings.csv"; }
    [[nodiscard]] std::filesystem::path predictor() const { return root_ / "predictor.bin"; }
    [[nodiscard]] std::filesystem::path loss_curve() const { return root_ / "loss_curve.csv"; }
    [[nodiscard]] std::filesystem::path reports() const { return root_ / "reports"; }
    [[nodiscard]] std::filesystem::path runs() const { return root_ / "runs"; }

private:
    std::filesystem::path root_;
};

struct ManifestEntry {
    std::string id;
    Split split;
};

// Dataset ----------------------------------------------------------------

std::vector<ManifestEntry> generate_dataset(const PipelineConfig& cfg, const Workspace& ws);
std::vector<ManifestEntry> read_manifest(const Workspace& ws);
std::vector<std::string> pair_ids(const std::vector<ManifestEntry>& manifest, std::vector<Split> splits);
ImagePair load_pair(const Workspace& ws, const std::string& id);
std::string dataset_hash(const Workspace& ws);

// Records ----------------------------------------------------------------

// pair_id, hp_<name>..., dice_1..dice_L, mean_dice, nfv, nfv_percent
std::vector<std::string> record_header(HyperparamMode mode, std::uint32_t label_count);
std::vector<std::string> record_row(const RegistrationRecord& r, HyperparamMode mode);
RegistrationRecord parse_record(const CsvTable& t, std::size_t row, HyperparamMode mode,
                                std::uint32_t label_count);
std::vector<RegistrationRecord> read_records(const std::filesystem::path& path, HyperparamMode mode,
                                             std::uint32_t label_count);
void write_records(const std::filesystem::path& path, const std::vector<RegistrationRecord>& records,
                   HyperparamMode mode, std::uint32_t label_count);

// Completion key used for resumability.
std::string job_key(const std::string& pair_id, const HyperparamPoint& hp);

struct OracleJob {
    std::string pair_id;
    HyperparamPoint hp;
};

struct OracleRunSummary {
    std::size_t rows = 0;       // records available for the job list
    std::size_t computed = 0;   // newly run this call
    std::size_t reused = 0;     // found in the cache
    std::size_t skipped = 0;    // jobs logged as divergent in the skip file
};

// Runs register + evaluate for every job not already in `cache`, fanning out
// over `workers` threads with a single writer. Completed rows are appended as
// they finish; at the end the cache is rewritten in job order. Divergent jobs
// go to "<cache stem>_skipped.csv" and are not retried.
std::vector<RegistrationRecord> run_oracle_jobs(const PipelineConfig& cfg, const Workspace& ws,
                                                const std::vector<OracleJob>& jobs,
                                                const std::filesystem::path& cache,
                                                OracleRunSummary* summary = nullptr);

// Hyperparameter samples assigned to one pair during precompute.
std::vector<HyperparamPoint> precompute_samples(const PipelineConfig& cfg, const std::string& pair_id);

OracleRunSummary cmd_precompute(const PipelineConfig& cfg, const Workspace& ws,
                                const std::vector<Split>& splits = {Split::train, Split::val});

// Encodings --------------------------------------------------------------

using EncodingTable = std::map<std::string, Encoding>;

EncodingTable encode_pairs(const PipelineConfig& cfg, const Workspace& ws,
                           const std::vector<std::string>& ids, const EncoderConfig& encoder);
void write_encodings(const std::filesystem::path& path, const EncodingTable& table);
EncodingTable read_encodings(const std::filesystem::path& path);
EncodingTable cmd_encode(const PipelineConfig& cfg, const Workspace& ws);

// Training ---------------------------------------------------------------

// Keeps a deterministic fraction of the training pairs (all of their rows).
std::vector<RegistrationRecord> subsample_pairs(const std::vector<RegistrationRecord>& records,
                                                double fraction, std::uint64_t seed);

struct TrainInputs {
    std::vector<RegistrationRecord> train;
    std::vector<RegistrationRecord> val;
};
TrainInputs split_records(const Workspace& ws, const std::vector<RegistrationRecord>& records);

TrainResult cmd_train(const PipelineConfig& cfg, const Workspace& ws);

// Trains one model with explicit encoder/network/optimizer settings (used by
// the ablations); `enc` must hold encodings for every record's pair.
TrainResult train_variant(const PipelineConfig& cfg, const TrainInputs& in, const EncodingTable& enc,
                          const EncoderConfig& encoder, const MlpConfig& mlp, const TrainConfig& tc);

// Sweeps and selection ---------------------------------------------------

std::vector<HyperparamPoint> evaluation_grid(const PipelineConfig& cfg, int n);
std::vector<HyperparamPoint> cv_candidates(const PipelineConfig& cfg);

std::filesystem::path cmd_sweep(const PipelineConfig& cfg, const Workspace& ws, const std::string& pair_id,
                                bool two_d);
std::filesystem::path cmd_select(const PipelineConfig& cfg, const Workspace& ws, Split split);

struct RegisterOutput {
    std::filesystem::path field;
    std::filesystem::path metrics;
    RegistrationTargets targets;
};
RegisterOutput cmd_register(const PipelineConfig& cfg, const Workspace& ws, const std::string& pair_id,
                            const HyperparamPoint& hp);

// Experiments ------------------------------------------------------------

struct ExperimentReport {
    std::string id;
    std::size_t rows = 0;
    std::map<std::string, double> summary;
    std::vector<std::filesystem::path> files;
};

ExperimentReport cmd_experiment1(const PipelineConfig& cfg, const Workspace& ws);
ExperimentReport cmd_experiment2(const PipelineConfig& cfg, const Workspace& ws);
ExperimentReport cmd_experiment3(const PipelineConfig& cfg, const Workspace& ws);
ExperimentReport cmd_ablations(const PipelineConfig& cfg, const Workspace& ws);
ExperimentReport cmd_timing(const PipelineConfig& cfg, const Workspace& ws);

// Run manifests ------------------------------------------------------------

void write_run_manifest(const PipelineConfig& cfg, const Workspace& ws, const std::string& command,
                        const std::string& started, const std::vector<std::filesystem::path>& outputs);
std::string utc_timestamp();

}  // namespace hyperpredict
