#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hyperpredict/field.hpp"

namespace hyperpredict {

/// Per-label Dice plus folding percentage, for predicted or target metrics.
struct MetricVector {
    std::vector<double> dice;  // label 1..L at index 0..L-1
    double nfv_percent = 0.0;

    [[nodiscard]] std::size_t label_count() const { return dice.size(); }
    [[nodiscard]] double mean_dice() const;
    // Dice clamped to [0, 1] and %nfv to [0, 100].
    [[nodiscard]] MetricVector clamped() const;

    friend bool operator==(const MetricVector&, const MetricVector&) = default;
};

/// Bland-Altman style agreement between two paired measurement series.
struct AgreementSummary {
    double bias = 0.0;    // mean(pred - target)
    double sd = 0.0;      // sample sd of differences
    double loa_lo = 0.0;  // bias - 1.96 sd
    double loa_hi = 0.0;  // bias + 1.96 sd
    double mad = 0.0;     // mean |pred - target|
    double mad_sd = 0.0;  // sample sd of |pred - target|
};

/// Dice overlap of label `label` between two label maps:
/// 2|A ∩ B| / (|A| + |B|), 1 when both masks are empty.
double dice(const LabelGrid& a, const LabelGrid& b, std::uint32_t label);

/// Dice for labels 1..label_count in a single pass.
std::vector<double> dice_all(const LabelGrid& a, const LabelGrid& b, std::uint32_t label_count);

double mean_absolute_error(std::span<const double> pred, std::span<const double> target);

AgreementSummary bland_altman(std::span<const double> pred, std::span<const double> target);

double mean(std::span<const double> v);
// Sample (n - 1) standard deviation; 0 for fewer than two values.
double sample_sd(std::span<const double> v);
double median(std::vector<double> v);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace hyperpredict
