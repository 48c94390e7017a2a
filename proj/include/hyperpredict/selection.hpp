#pragma once

// Optimal-hyperparameter selection over predicted (or measured) sweeps:
// maximize an overlap objective subject to %nfv below a ceiling.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hyperpredict/predictor.hpp"

namespace hyperpredict {

enum class ObjectiveKind { mean_dice_all, mean_dice_subset, single_label };
enum class InfeasiblePolicy { error, min_nfv_fallback };

struct SelectionCriterion {
    double nfv_ceiling = 0.5;  // percent; rows need %nfv strictly below it
    ObjectiveKind objective = ObjectiveKind::mean_dice_all;
    std::vector<std::uint32_t> labels;  // 1-based; subset or the single label
    InfeasiblePolicy policy = InfeasiblePolicy::min_nfv_fallback;

    void validate() const;
    [[nodiscard]] double objective_value(const MetricVector& m) const;
    [[nodiscard]] bool feasible(const MetricVector& m) const { return m.nfv_percent < nfv_ceiling; }

    static SelectionCriterion single_label_of(std::uint32_t label, double ceiling = 0.5) {
        return {ceiling, ObjectiveKind::single_label, {label}, InfeasiblePolicy::min_nfv_fallback};
    }
    static SelectionCriterion unconstrained() {
        return {std::numeric_limits<double>::infinity(), ObjectiveKind::mean_dice_all, {},
                InfeasiblePolicy::min_nfv_fallback};
    }
};

const char* objective_name(ObjectiveKind kind);
ObjectiveKind parse_objective(const std::string& name);
InfeasiblePolicy parse_policy(const std::string& name);

struct SweepRow {
    HyperparamPoint hp;
    MetricVector metrics;
};

using SweepTable = std::vector<SweepRow>;

struct Selection {
    std::size_t row = 0;
    HyperparamPoint hp;
    MetricVector metrics;
    double objective = 0.0;
    bool feasible = false;
};

// Sum of log regularization weights; larger means smoother fields.
double regularization_strength(const HyperparamPoint& hp);

// Among feasible rows, the maximum objective; ties go to stronger
// regularization, then to the lexicographically larger point.
Selection select_optimal(const SweepTable& table, const SelectionCriterion& crit);

// n values exp(t), t evenly spaced over [lo_exp, hi_exp], endpoints included.
std::vector<double> make_grid(double lo_exp, double hi_exp, int n);

// One-hyperparameter grid points, with optional fixed extra values.
std::vector<HyperparamPoint> grid_points(const std::string& name, const std::vector<double>& values,
                                         const HyperparamPoint& fixed = {});

// Predictions clamped to valid metric ranges.
SweepTable sweep_pair(const Predictor& p, const Encoding& e, const std::vector<HyperparamPoint>& grid);

// Cartesian product be x le (be outer, le inner); `fixed` supplies e.g. sx.
SweepTable sweep_2d(const Predictor& p, const Encoding& e, const std::vector<double>& grid_be,
                    const std::vector<double>& grid_le, const HyperparamPoint& fixed = {});

std::vector<Selection> select_per_label(const std::vector<SweepTable>& tables, std::uint32_t label,
                                        SelectionCriterion crit);

// Population baseline: the single candidate with the best mean objective over
// all validation pairs whose mean %nfv is below the ceiling.
HyperparamPoint cross_validation_select(const std::vector<RegistrationRecord>& val_records,
                                        const std::vector<HyperparamPoint>& candidates,
                                        const SelectionCriterion& crit);

}  // namespace hyperpredict
