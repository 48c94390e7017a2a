#pragma once

// Reproducible synthetic labeled image pairs.

#include <cstdint>
#include <string>
#include <vector>

#include "hyperpredict/field.hpp"

namespace hyperpredict {

struct DatasetConfig {
    Shape shape{64, 64};
    std::uint32_t label_count = 8;
    double amplitude = 3.0;      // max generating displacement, cells
    double amplitude_max = 0.0;  // > amplitude: per-pair amplitude uniform in [amplitude, amplitude_max]
    double smoothness = 6.0;     // Gaussian sigma of the generating field, cells
    double noise_sd = 0.08;
    std::uint64_t seed = 0;
    int pair_count = 100;
    double train_fraction = 0.62;
    double val_fraction = 0.19;
    double test_fraction = 0.19;

    void validate() const;
};

struct ImagePair {
    std::string id;
    ScalarGrid fixed;
    ScalarGrid moving;
    LabelGrid fixed_labels;
    LabelGrid moving_labels;

    [[nodiscard]] Shape shape() const { return fixed.shape(); }
    void validate(std::uint32_t label_count) const;
};

// A generated pair together with the field that produced the moving side.
// The generating field is a diagnostic only.
struct SyntheticPair {
    ImagePair pair;
    DisplacementField generating_field;
    double amplitude = 0.0;
};

struct DatasetSplit {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

enum class Split { train, val, test };

std::string format_pair_id(int index);
const char* split_name(Split s);
Split parse_split(const std::string& name);

// Clean anatomy for one index: label map and matching noise-free intensities.
struct Anatomy {
    LabelGrid labels;
    ScalarGrid intensity;
};
Anatomy generate_anatomy(const DatasetConfig& config, int index);

// Per-label intensity used by the generator (index 0 is background).
double label_intensity(std::uint32_t label, std::uint32_t label_count);

SyntheticPair generate_pair_with_truth(const DatasetConfig& config, int index);
ImagePair generate_pair(const DatasetConfig& config, int index);

DatasetSplit split_dataset(const DatasetConfig& config);

}  // namespace hyperpredict
