#pragma once

// Surrogate predictor: an MLP mapping (pair encoding, hyperparameters) to
// per-label Dice and %nfv, trained with a multitask MSE loss via Adam.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hyperpredict/encoder.hpp"
#include "hyperpredict/metrics.hpp"
#include "hyperpredict/registration.hpp"

namespace hyperpredict {

struct MlpConfig {
    std::vector<int> hidden{64, 64};
    double negative_slope = 0.01;
    std::uint64_t init_seed = 0;

    void validate() const;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 32;
    int epochs = 300;
    double alpha = 1.0;
    std::uint64_t shuffle_seed = 0;
    // Log-normal hyperparameter sampling used to build training data.
    double log_mu = -4.605170185988091;  // log(0.01)
    double log_sigma = 1.5;

    void validate() const;
};

/// One cached oracle run: the training target for (pair, hyperparameters).
struct RegistrationRecord {
    std::string pair_id;
    HyperparamPoint hp;
    MetricVector target;
    std::size_t nfv = 0;
};

struct LossParts {
    double total = 0.0;
    double overlap = 0.0;
    double nfv = 0.0;
};

// overlap = mean over labels of (y - y_hat)^2, nfv = (x - x_hat)^2,
// total = overlap + alpha * nfv.
LossParts multitask_loss(const MetricVector& pred, const MetricVector& target, double alpha);

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
};

struct Gradients {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;

    [[nodiscard]] std::vector<double> flatten() const;
};

/// Columns are samples. Inputs are already normalized feature vectors;
/// targets hold L Dice rows followed by one %nfv row.
struct Batch {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd targets;
};

class Predictor {
public:
    Predictor() = default;

    static Predictor create(const EncoderConfig& encoder, std::vector<std::string> hp_names,
                            std::uint32_t label_count, const MlpConfig& mlp);

    [[nodiscard]] std::uint32_t label_count() const { return label_count_; }
    [[nodiscard]] const std::vector<std::string>& hp_names() const { return hp_names_; }
    [[nodiscard]] const EncoderConfig& encoder() const { return encoder_; }
    [[nodiscard]] std::size_t encoding_dim() const { return enc_mean_.size(); }
    [[nodiscard]] std::size_t input_dim() const { return encoding_dim() + hp_names_.size(); }
    [[nodiscard]] std::size_t output_dim() const { return label_count_ + 1; }
    [[nodiscard]] double negative_slope() const { return negative_slope_; }
    [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    // Normalization statistics: encodings per feature, hyperparameters in log space.
    void set_normalization(std::vector<double> enc_mean, std::vector<double> enc_sd,
                           std::vector<double> hp_mean, std::vector<double> hp_sd);
    [[nodiscard]] const std::vector<double>& hp_mean() const { return hp_mean_; }
    [[nodiscard]] const std::vector<double>& hp_sd() const { return hp_sd_; }

    [[nodiscard]] Eigen::VectorXd normalize_encoding(const Encoding& e) const;
    [[nodiscard]] Eigen::VectorXd normalize_hyperparams(const HyperparamPoint& hp) const;
    [[nodiscard]] Eigen::VectorXd input_vector(const Encoding& e, const HyperparamPoint& hp) const;

    // Raw network output for normalized inputs (columns are samples).
    [[nodiscard]] Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

    // Raw (unclamped) prediction.
    [[nodiscard]] MetricVector forward(const Encoding& e, const HyperparamPoint& hp) const;

    // Raw predictions for many hyperparameter points against one encoding.
    // The encoding's first-layer contribution is computed once.
    [[nodiscard]] std::vector<MetricVector> forward_many(const Encoding& e,
                                                         const std::vector<HyperparamPoint>& hps) const;

    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] std::vector<double> parameters() const;
    void set_parameters(const std::vector<double>& flat);

    void save(std::ostream& os) const;
    void save(const std::filesystem::path& path) const;
    static Predictor load(std::istream& is);
    static Predictor load(const std::filesystem::path& path);

    friend bool operator==(const Predictor& a, const Predictor& b);

private:
    void check_encoding(const Encoding& e) const;

    EncoderConfig encoder_;
    std::vector<std::string> hp_names_;
    std::uint32_t label_count_ = 0;
    double negative_slope_ = 0.01;
    std::vector<double> enc_mean_, enc_sd_;
    std::vector<double> hp_mean_, hp_sd_;
    std::vector<DenseLayer> layers_;
};

// Mean multitask loss over the batch and its exact gradient w.r.t. every
// weight and bias.
Gradients backward(const Predictor& p, const Batch& batch, double alpha, LossParts* loss = nullptr);

LossParts batch_loss(const Predictor& p, const Batch& batch, double alpha);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainingData {
    std::vector<RegistrationRecord> train;
    std::vector<RegistrationRecord> val;
    // Encoding lookup by pair id.
    std::function<const Encoding&(const std::string&)> encoding;
};

struct TrainResult {
    Predictor predictor;
    std::vector<EpochLog> log;
    int best_epoch = 0;
};

// Normalization is fitted on the training records. Returns the parameters at
// the lowest validation loss (last epoch when there are no validation records).
TrainResult train(const TrainingData& data, const EncoderConfig& encoder,
                  const std::vector<std::string>& hp_names, std::uint32_t label_count,
                  const MlpConfig& mlp, const TrainConfig& cfg);

// Builds a normalized batch for the given records.
Batch make_batch(const Predictor& p, const std::vector<RegistrationRecord>& records,
                 const std::function<const Encoding&(const std::string&)>& encoding);

// n draws exp(mu + sigma * z), z ~ N(0, 1).
std::vector<double> sample_lognormal(double mu, double sigma, int n, std::uint64_t seed);

// Hyperparameter points for the mode: every search name drawn independently
// from the log-normal; "sx" pinned to `spacing` in multi mode.
std::vector<HyperparamPoint> sample_hyperparams(HyperparamMode mode, double mu, double sigma, int n,
                                                std::uint64_t seed, int spacing = 5);

}  // namespace hyperpredict
