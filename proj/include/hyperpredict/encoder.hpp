#pragma once

// Frozen, deterministic encoder for an image pair. Builds a bank of feature
// channels, average-pools each channel to a coarse grid, then reduces across
// channels per pooled cell.

#include <string>
#include <vector>

#include "hyperpredict/synth.hpp"

namespace hyperpredict {

enum class SummaryMode { mean, min_max_mean };

// Two fixed feature banks. `differential` mixes intensities, differences and
// gradient responses; `smoothing` keeps intensities and multi-scale smoothing
// with signed and absolute differences only.
enum class FeatureBank { differential, smoothing };

inline constexpr int kMaxEncoderChannels = 16;

struct EncoderConfig {
    int channels = 16;
    // A single global pool: finer pooling overfits at tens of training pairs.
    int pool_nx = 1;
    int pool_ny = 1;
    SummaryMode summary = SummaryMode::mean;
    FeatureBank bank = FeatureBank::differential;

    void validate() const;
};

struct Encoding {
    std::vector<double> values;
    friend bool operator==(const Encoding&, const Encoding&) = default;
};

const char* summary_name(SummaryMode mode);
SummaryMode parse_summary(const std::string& name);
const char* bank_name(FeatureBank bank);
FeatureBank parse_bank(const std::string& name);

std::size_t encoding_length(const EncoderConfig& cfg);

// Pooled channel stack before cross-channel reduction: one vector of
// pool_nx * pool_ny values per channel. Exposed for inspection.
std::vector<std::vector<double>> encode_channels(const ImagePair& pair, const EncoderConfig& cfg);

// Channel indices (within the first cfg.channels) that depend on the
// fixed/moving difference and vanish when the two images coincide.
std::vector<int> difference_channels(const EncoderConfig& cfg);

// Channel indices derived from spatial gradients.
std::vector<int> gradient_channels(const EncoderConfig& cfg);

Encoding encode(const ImagePair& pair, const EncoderConfig& cfg);

}  // namespace hyperpredict
