#include "hyperpredict/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "hyperpredict/errors.hpp"

namespace hyperpredict {

namespace {

enum class Kind { plain, difference, gradient, difference_gradient };

struct Channel {
    ScalarGrid grid;
    Kind kind;
};

ScalarGrid combine(const ScalarGrid& a, const ScalarGrid& b, double (*op)(double, double)) {
    ScalarGrid out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
    return out;
}

ScalarGrid map(const ScalarGrid& a, double (*op)(double)) {
    ScalarGrid out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i]);
    return out;
}

double sub(double a, double b) { return a - b; }
double mul(double a, double b) { return a * b; }
double absval(double a) { return std::abs(a); }
double square(double a) { return a * a; }

ScalarGrid dog(const ScalarGrid& g, double s1, double s2) {
    return combine(gaussian_smooth(g, s1), gaussian_smooth(g, s2), sub);
}

// Zero mean, unit sd. A constant image maps to all zeros.
ScalarGrid standardize(const ScalarGrid& g) {
    double mu = 0.0;
    for (const double v : g.values()) mu += v;
    mu /= static_cast<double>(g.size());
    double var = 0.0;
    for (const double v : g.values()) var += (v - mu) * (v - mu);
    const double sd = std::sqrt(var / static_cast<double>(g.size()));
    ScalarGrid out(g.shape());
    const double scale = sd > 1e-12 ? 1.0 / sd : 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = (g[i] - mu) * scale;
    return out;
}

// Order is part of the encoder's definition; channels are taken as a prefix.
// Both images are standardized first so that pooled features reflect
// structure and misalignment rather than absolute intensity levels.
std::vector<Channel> build_bank(const ImagePair& pair, FeatureBank bank, int count) {
    const ScalarGrid f = standardize(pair.fixed);
    const ScalarGrid m = standardize(pair.moving);
    const ScalarGrid d = combine(f, m, sub);
    std::vector<Channel> ch;
    ch.reserve(kMaxEncoderChannels);
    auto push = [&](auto&& make, Kind kind) {
        if (static_cast<int>(ch.size()) < count) ch.push_back({make(), kind});
    };
    if (bank == FeatureBank::differential) {
        push([&] { return f; }, Kind::plain);
        push([&] { return m; }, Kind::plain);
        push([&] { return d; }, Kind::difference);
        push([&] { return gradient_magnitude(f); }, Kind::gradient);
        push([&] { return gradient_magnitude(m); }, Kind::gradient);
        push([&] { return combine(f, m, mul); }, Kind::plain);
        push([&] { return gaussian_smooth(f, 1.0); }, Kind::plain);
        push([&] { return gaussian_smooth(m, 1.0); }, Kind::plain);
        push([&] { return dog(f, 1.0, 2.0); }, Kind::plain);
        push([&] { return dog(m, 1.0, 2.0); }, Kind::plain);
        push([&] { return gaussian_smooth(d, 2.0); }, Kind::difference);
        push([&] { return map(d, absval); }, Kind::difference);
        push([&] { return gradient_magnitude(d); }, Kind::difference_gradient);
        push([&] { return map(d, square); }, Kind::difference);
        push([&] {
            return combine(gaussian_smooth(gradient_magnitude(f), 2.0),
                           gaussian_smooth(gradient_magnitude(m), 2.0), sub);
        }, Kind::difference_gradient);
        push([&] { return dog(d, 1.0, 3.0); }, Kind::difference);
    } else {
        push([&] { return f; }, Kind::plain);
        push([&] { return m; }, Kind::plain);
        push([&] { return d; }, Kind::difference);
        push([&] { return map(d, absval); }, Kind::difference);
        for (const double s : {1.0, 2.0, 4.0}) {
            push([&] { return gaussian_smooth(f, s); }, Kind::plain);
            push([&] { return gaussian_smooth(m, s); }, Kind::plain);
            push([&] { return gaussian_smooth(d, s); }, Kind::difference);
            push([&] { return gaussian_smooth(map(d, absval), s); }, Kind::difference);
        }
    }
    return ch;
}

std::vector<double> pool(const ScalarGrid& g, int px, int py) {
    std::vector<double> out(static_cast<std::size_t>(px) * py);
    for (int by = 0; by < py; ++by) {
        const int y0 = by * g.ny() / py;
        const int y1 = (by + 1) * g.ny() / py;
        for (int bx = 0; bx < px; ++bx) {
            const int x0 = bx * g.nx() / px;
            const int x1 = (bx + 1) * g.nx() / px;
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) acc += g(x, y);
            }
            out[static_cast<std::size_t>(by) * px + bx] = acc / ((x1 - x0) * (y1 - y0));
        }
    }
    return out;
}

std::vector<int> channels_of(const EncoderConfig& cfg, bool (*pred)(Kind)) {
    // Kinds depend only on the bank layout, so probe with a tiny constant pair.
    ImagePair probe;
    const Shape s{kMinAxis, kMinAxis};
    probe.fixed = probe.moving = ScalarGrid(s, 0.0);
    probe.fixed_labels = probe.moving_labels = LabelGrid(s, 0u);
    const auto bank = build_bank(probe, cfg.bank, cfg.channels);
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(bank.size()); ++i) {
        if (pred(bank[i].kind)) out.push_back(i);
    }
    return out;
}

}  // namespace

void EncoderConfig::validate() const {
    if (channels < 1 || channels > kMaxEncoderChannels) {
        throw ConfigError("encoder: channel count must be in [1, " +
                          std::to_string(kMaxEncoderChannels) + "]");
    }
    if (pool_nx < 1 || pool_ny < 1) throw ConfigError("encoder: pool shape must be >= 1");
}

const char* summary_name(SummaryMode mode) {
    return mode == SummaryMode::mean ? "mean" : "min_max_mean";
}

SummaryMode parse_summary(const std::string& name) {
    if (name == "mean") return SummaryMode::mean;
    if (name == "min_max_mean") return SummaryMode::min_max_mean;
    throw ConfigError("unknown summary mode '" + name + "'");
}

const char* bank_name(FeatureBank bank) {
    return bank == FeatureBank::differential ? "differential" : "smoothing";
}

FeatureBank parse_bank(const std::string& name) {
    if (name == "differential") return FeatureBank::differential;
    if (name == "smoothing") return FeatureBank::smoothing;
    throw ConfigError("unknown feature bank '" + name + "'");
}

std::size_t encoding_length(const EncoderConfig& cfg) {
    cfg.validate();
    const std::size_t cells = static_cast<std::size_t>(cfg.pool_nx) * cfg.pool_ny;
    return cfg.summary == SummaryMode::mean ? cells : 3 * cells;
}

std::vector<std::vector<double>> encode_channels(const ImagePair& pair, const EncoderConfig& cfg) {
    cfg.validate();
    if (pair.moving.shape() != pair.fixed.shape()) throw ConfigError("encode: shape mismatch");
    if (pair.fixed.nx() < cfg.pool_nx || pair.fixed.ny() < cfg.pool_ny) {
        throw ConfigError("encode: grid is smaller than the pool shape");
    }
    const auto bank = build_bank(pair, cfg.bank, cfg.channels);
    std::vector<std::vector<double>> pooled;
    pooled.reserve(bank.size());
    for (const Channel& c : bank) pooled.push_back(pool(c.grid, cfg.pool_nx, cfg.pool_ny));
    return pooled;
}

std::vector<int> difference_channels(const EncoderConfig& cfg) {
    return channels_of(cfg, [](Kind k) { return k == Kind::difference || k == Kind::difference_gradient; });
}

std::vector<int> gradient_channels(const EncoderConfig& cfg) {
    return channels_of(cfg, [](Kind k) { return k == Kind::gradient || k == Kind::difference_gradient; });
}

Encoding encode(const ImagePair& pair, const EncoderConfig& cfg) {
    const auto pooled = encode_channels(pair, cfg);
    const std::size_t cells = pooled.front().size();
    Encoding e;
    e.values.resize(encoding_length(cfg));
    for (std::size_t i = 0; i < cells; ++i) {
        double sum = 0.0;
        double lo = pooled.front()[i];
        double hi = lo;
        for (const auto& ch : pooled) {
            sum += ch[i];
            lo = std::min(lo, ch[i]);
            hi = std::max(hi, ch[i]);
        }
        e.values[i] = sum / static_cast<double>(pooled.size());
        if (cfg.summary == SummaryMode::min_max_mean) {
            e.values[cells + i] = hi;
            e.values[2 * cells + i] = lo;
        }
    }
    return e;
}

}  // namespace hyperpredict
