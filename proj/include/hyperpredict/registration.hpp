#pragma once

// Hyperparameterized dense deformable registration used as the oracle that
// produces training targets: gradient descent on
//   L_sim(f, m o phi) + sum_k w_k * L_reg,k(phi)
// with backtracking step control and a coarse-to-fine pyramid.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hyperpredict/field.hpp"
#include "hyperpredict/metrics.hpp"
#include "hyperpredict/synth.hpp"

namespace hyperpredict {

enum class Similarity { mse, ncc };
enum class Regularizer { diffusion, bending, elastic };

// Which hyperparameter schema is active.
//   single: {"lambda"} weighting the diffusion regularizer
//   multi:  {"be", "le", "sx"} for bending, elastic, and control spacing
enum class HyperparamMode { single, multi };

/// Named hyperparameter values, e.g. {"lambda": 0.1}.
class HyperparamPoint {
public:
    HyperparamPoint() = default;
    HyperparamPoint(std::initializer_list<std::pair<const std::string, double>> values)
        : values_(values) {}

    void set(const std::string& name, double value) { values_[name] = value; }
    [[nodiscard]] double get(const std::string& name) const;
    [[nodiscard]] std::optional<double> find(const std::string& name) const;
    [[nodiscard]] bool contains(const std::string& name) const { return values_.count(name) > 0; }
    [[nodiscard]] const std::map<std::string, double>& values() const { return values_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }

    // Stable text form "name=value;..." with round-trip precision.
    [[nodiscard]] std::string key() const;

    friend bool operator==(const HyperparamPoint&, const HyperparamPoint&) = default;
    friend auto operator<=>(const HyperparamPoint&, const HyperparamPoint&) = default;

private:
    std::map<std::string, double> values_;
};

const char* mode_name(HyperparamMode mode);
HyperparamMode parse_mode(const std::string& name);
// Every name the mode accepts.
std::vector<std::string> mode_schema(HyperparamMode mode);
// Names that are searched over and fed to the predictor ("sx" is held fixed).
std::vector<std::string> mode_search_names(HyperparamMode mode);
// Names acting as regularization weights (used for tie-breaking).
bool is_regularization_weight(const std::string& name);

struct RegistrationConfig {
    Similarity similarity = Similarity::mse;
    HyperparamMode mode = HyperparamMode::single;
    int iterations = 150;          // per pyramid level
    double step_size = 2.0;        // initial step, cells per unit normalized gradient
    int levels = 2;                // pyramid levels including full resolution
    double tolerance = 1e-7;       // relative loss change for early stop
    int default_spacing = 5;       // "sx" when absent in multi mode

    void validate() const;
    // Throws ConfigError unless `hp` fits the active mode's schema.
    void check_hyperparams(const HyperparamPoint& hp) const;
};

struct LossTerms {
    double similarity = 0.0;
    double regularization = 0.0;  // weighted sum
    [[nodiscard]] double total() const { return similarity + regularization; }
};

struct RegistrationResult {
    DisplacementField field;
    LossTerms loss;
    LossTerms initial_loss;  // at the zero field, full resolution
    int iterations = 0;
};

/// Thrown when the loss becomes non-finite; carries the last finite field.
class RegistrationDivergence : public NumericalError {
public:
    RegistrationDivergence(const std::string& what, DisplacementField last)
        : NumericalError(what), last_field(std::move(last)) {}
    DisplacementField last_field;
};

double similarity_loss(const ScalarGrid& fixed, const ScalarGrid& warped, Similarity kind);

// Mean over cells of the squared stencil responses:
//   diffusion: forward first differences along each axis, per component
//   bending:   u_xx^2 + u_yy^2 + 2 u_xy^2
//   elastic:   e_xx^2 + e_yy^2 + 2 e_xy^2 with e = (grad u + grad u^T) / 2
double regularizer_energy(const DisplacementField& field, Regularizer kind);

// Energy plus its exact gradient w.r.t. every displacement component,
// accumulated as `scale * dE/du` into `grad`.
double regularizer_energy_and_gradient(const DisplacementField& field, Regularizer kind,
                                       double scale, DisplacementField& grad);

// Similarity value and its exact gradient w.r.t. the displacement at every
// cell (through the bilinear warp).
double similarity_and_gradient(const ScalarGrid& fixed, const ScalarGrid& moving,
                               const DisplacementField& field, Similarity kind,
                               DisplacementField& grad);

// Weighted regularization terms implied by a hyperparameter point.
std::vector<std::pair<Regularizer, double>> regularization_weights(const HyperparamPoint& hp,
                                                                   HyperparamMode mode);

LossTerms evaluate_loss(const ImagePair& pair, const DisplacementField& field,
                        const HyperparamPoint& hp, const RegistrationConfig& cfg);

RegistrationResult register_pair(const ImagePair& pair, const HyperparamPoint& hp,
                                 const RegistrationConfig& cfg);

/// Target metrics of one registration: per-label Dice of the warped moving
/// labels against the fixed labels, plus folding of the field.
struct RegistrationTargets {
    MetricVector metrics;
    std::size_t nfv = 0;
};

RegistrationTargets evaluate_registration(const ImagePair& pair, const DisplacementField& field,
                                          std::uint32_t label_count);

}  // namespace hyperpredict
