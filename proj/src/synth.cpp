#include "hyperpredict/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "hyperpredict/errors.hpp"
#include "hyperpredict/rng.hpp"

namespace hyperpredict {

namespace {

enum Stream : std::uint64_t { kAnatomy = 0, kField = 1, kFixedNoise = 2, kMovingNoise = 3, kAmp = 4 };

Rng stream_rng(const DatasetConfig& c, int index, Stream s) {
    return Rng(derive_seed(derive_seed(c.seed, static_cast<std::uint64_t>(index)), s));
}

struct Ellipse {
    double cx, cy, a, b, theta;

    [[nodiscard]] bool contains(double x, double y) const {
        const double dx = x - cx;
        const double dy = y - cy;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        const double u = (dx * c + dy * s) / a;
        const double v = (-dx * s + dy * c) / b;
        return u * u + v * v <= 1.0;
    }
};

void paint(LabelGrid& labels, const Ellipse& e, std::uint32_t label) {
    for (int y = 0; y < labels.ny(); ++y) {
        for (int x = 0; x < labels.nx(); ++x) {
            if (e.contains(x, y)) labels(x, y) = label;
        }
    }
}

std::vector<std::uint32_t> label_counts(const LabelGrid& labels, std::uint32_t label_count) {
    std::vector<std::uint32_t> counts(label_count + 1, 0);
    for (const auto l : labels) {
        if (l <= label_count) ++counts[l];
    }
    return counts;
}

void add_noise(ScalarGrid& image, double sd, Rng& rng) {
    for (double& v : image) {
        if (sd > 0.0) v += sd * rng.normal();
        v = std::clamp(v, 0.0, 1.0);
    }
}

}  // namespace

void DatasetConfig::validate() const {
    check_shape(shape);
    if (label_count < 2) throw ConfigError("dataset: label count must be >= 2");
    if (!(amplitude >= 0.0)) throw ConfigError("dataset: amplitude must be >= 0");
    if (amplitude_max != 0.0 && amplitude_max < amplitude) {
        throw ConfigError("dataset: amplitude_max must be >= amplitude");
    }
    if (!(smoothness > 0.0)) throw ConfigError("dataset: smoothness must be > 0");
    if (!(noise_sd >= 0.0)) throw ConfigError("dataset: noise sd must be >= 0");
    if (pair_count < 1) throw ConfigError("dataset: pair count must be >= 1");
    const double fractions[] = {train_fraction, val_fraction, test_fraction};
    for (const double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("dataset: split fractions must be in [0, 1]");
    }
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
        throw ConfigError("dataset: split fractions must sum to 1");
    }
}

void ImagePair::validate(std::uint32_t label_count) const {
    const Shape s = fixed.shape();
    if (moving.shape() != s || fixed_labels.shape() != s || moving_labels.shape() != s) {
        throw ConfigError("pair " + id + ": grids do not share a shape");
    }
    for (const LabelGrid* g : {&fixed_labels, &moving_labels}) {
        for (const auto l : *g) {
            if (l > label_count) throw ConfigError("pair " + id + ": label id out of range");
        }
    }
}

std::string format_pair_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pair_%04d", index);
    return buf;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + name + "'");
}

double label_intensity(std::uint32_t label, std::uint32_t label_count) {
    if (label == 0 || label > label_count) return 0.0;
    if (label_count == 2) return label == 1 ? 0.2 : 0.9;
    if (label == 1) return 0.8;
    if (label == 2) return 0.45;
    const double golden = 0.38196601125;
    const double frac = std::fmod(0.1 + golden * static_cast<double>(label - 3), 1.0);
    return 0.15 + 0.85 * frac;
}

Anatomy generate_anatomy(const DatasetConfig& config, int index) {
    const Shape shape = config.shape;
    const std::uint32_t L = config.label_count;
    Rng rng = stream_rng(config, index, kAnatomy);
    const double n = std::min(shape.nx, shape.ny);
    const double cx = 0.5 * (shape.nx - 1) + rng.uniform(-0.03, 0.03) * n;
    const double cy = 0.5 * (shape.ny - 1) + rng.uniform(-0.03, 0.03) * n;
    const double scale = rng.uniform(0.92, 1.06);
    const double tilt = rng.uniform(-0.25, 0.25);

    LabelGrid labels(shape, 0u);
    if (L == 2) {
        // Two-structure layout: a faint bulky disc (label 1) inside a separate
        // high-contrast thin ring (label 2), with background between them.
        const double r = 0.16 * n * rng.uniform(0.9, 1.1);
        const double inner = 0.31 * n * rng.uniform(0.95, 1.05);
        const double width = std::max(2.0, 0.047 * n);
        for (int y = 0; y < shape.ny; ++y) {
            for (int x = 0; x < shape.nx; ++x) {
                const double d = std::hypot(x - cx, y - cy);
                if (d <= r) labels(x, y) = 1;
                if (d >= inner && d < inner + width) labels(x, y) = 2;
            }
        }
        ScalarGrid intensity(shape);
        for (std::size_t i = 0; i < labels.size(); ++i) intensity[i] = label_intensity(labels[i], L);
        return {std::move(labels), gaussian_smooth(intensity, 0.6)};
    }

    // Outer ellipse becomes the thin ribbon (label 2) once the bulk (label 1)
    // is painted inside it.
    const double ribbon = std::max(1.5, rng.uniform(0.028, 0.04) * n);
    const Ellipse outer{cx, cy, 0.42 * n * scale, 0.36 * n * scale, tilt};
    paint(labels, outer, 2);
    paint(labels, Ellipse{cx, cy, outer.a - ribbon, outer.b - ribbon, tilt}, 1);

    if (L > 2) {
        const double ring = 0.18 * n * scale;
        const auto structures = static_cast<double>(L - 2);
        for (std::uint32_t k = 3; k <= L; ++k) {
            const double angle = 2.0 * std::numbers::pi * (k - 3) / structures + tilt +
                                 rng.uniform(-0.15, 0.15);
            const double r = ring * rng.uniform(0.9, 1.1);
            const double px = cx + r * std::cos(angle);
            const double py = cy + r * std::sin(angle);
            const double theta = angle + rng.uniform(-0.3, 0.3);
            const double jitter = rng.uniform(0.9, 1.1);
            Ellipse e{px, py, 1.0, 1.0, theta};
            switch ((k - 3) % 4) {
                case 0:  // ventricle-like, bulky
                    e.a = 0.09 * n * jitter;
                    e.b = 0.06 * n * jitter;
                    break;
                case 1:  // nucleus-like, small
                    e.a = e.b = std::max(1.5, 0.045 * n * jitter);
                    break;
                case 2:  // thin stripe
                    e.a = 0.1 * n * jitter;
                    e.b = 1.0;
                    break;
                default:  // medium blob
                    e.a = 0.07 * n * jitter;
                    e.b = 0.05 * n * jitter;
                    break;
            }
            paint(labels, e, k);
        }
    }

    ScalarGrid intensity(shape);
    for (std::size_t i = 0; i < labels.size(); ++i) intensity[i] = label_intensity(labels[i], L);
    intensity = gaussian_smooth(intensity, 0.6);
    return {std::move(labels), std::move(intensity)};
}

SyntheticPair generate_pair_with_truth(const DatasetConfig& config, int index) {
    config.validate();
    const Shape shape = config.shape;
    const std::uint32_t L = config.label_count;
    Anatomy anatomy = generate_anatomy(config, index);

    const auto fixed_counts = label_counts(anatomy.labels, L);
    for (std::uint32_t l = 1; l <= L; ++l) {
        if (fixed_counts[l] == 0) {
            throw ConfigError("pair generation: label " + std::to_string(l) +
                              " is absent from the fixed anatomy (grid too small for " +
                              std::to_string(L) + " labels)");
        }
    }

    double amplitude = config.amplitude;
    if (config.amplitude_max > config.amplitude) {
        Rng amp_rng = stream_rng(config, index, kAmp);
        amplitude = amp_rng.uniform(config.amplitude, config.amplitude_max);
    }

    DisplacementField field(shape);
    if (amplitude > 0.0) {
        // Gaussian-smoothed sparse noise: random vector impulses at interior
        // sites, each spread with the smoothness kernel.
        Rng frng = stream_rng(config, index, kField);
        ScalarGrid fx(shape);
        ScalarGrid fy(shape);
        const int bumps = 12;
        const double w = config.smoothness;
        for (int b = 0; b < bumps; ++b) {
            const double bx = frng.uniform(0.15, 0.85) * (shape.nx - 1);
            const double by = frng.uniform(0.15, 0.85) * (shape.ny - 1);
            const double vx = frng.normal();
            const double vy = frng.normal();
            for (int y = 0; y < shape.ny; ++y) {
                for (int x = 0; x < shape.nx; ++x) {
                    const double r2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                    const double g = std::exp(-0.5 * r2 / (w * w));
                    fx(x, y) += vx * g;
                    fy(x, y) += vy * g;
                }
            }
        }
        double peak = 0.0;
        for (std::size_t i = 0; i < fx.size(); ++i) peak = std::max(peak, std::hypot(fx[i], fy[i]));
        const double k = peak > 0.0 ? amplitude / peak : 0.0;
        for (std::size_t i = 0; i < fx.size(); ++i) field[i] = {k * fx[i], k * fy[i]};
    }

    ImagePair pair;
    pair.id = format_pair_id(index);
    pair.fixed = anatomy.intensity;
    pair.fixed_labels = anatomy.labels;
    pair.moving = warp(anatomy.intensity, field, Interpolation::linear);
    pair.moving_labels = warp_labels(anatomy.labels, field);

    Rng fixed_noise = stream_rng(config, index, kFixedNoise);
    Rng moving_noise = stream_rng(config, index, kMovingNoise);
    add_noise(pair.fixed, config.noise_sd, fixed_noise);
    add_noise(pair.moving, config.noise_sd, moving_noise);

    const auto moving_counts = label_counts(pair.moving_labels, L);
    for (std::uint32_t l = 1; l <= L; ++l) {
        if (moving_counts[l] == 0) {
            throw ConfigError("pair generation: label " + std::to_string(l) + " vanished in " +
                              pair.id + " (deformation amplitude too large)");
        }
    }
    return {std::move(pair), std::move(field), amplitude};
}

ImagePair generate_pair(const DatasetConfig& config, int index) {
    return generate_pair_with_truth(config, index).pair;
}

DatasetSplit split_dataset(const DatasetConfig& config) {
    config.validate();
    const int n = config.pair_count;
    const int n_train = static_cast<int>(std::lround(n * config.train_fraction));
    const int n_val = std::min(n - n_train, static_cast<int>(std::lround(n * config.val_fraction)));

    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    Rng rng(derive_seed(config.seed, 0x5b117ULL));
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(ids[i], ids[j]);
    }
    DatasetSplit split;
    split.train.assign(ids.begin(), ids.begin() + n_train);
    split.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    split.test.assign(ids.begin() + n_train + n_val, ids.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

}  // namespace hyperpredict
