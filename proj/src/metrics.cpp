#include "hyperpredict/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyperpredict/errors.hpp"

namespace hyperpredict {

namespace {

void require_paired(std::span<const double> a, std::span<const double> b, std::size_t min_n,
                    const char* what) {
    if (a.size() != b.size()) throw ConfigError(std::string(what) + ": length mismatch");
    if (a.size() < min_n) {
        throw ConfigError(std::string(what) + ": needs at least " + std::to_string(min_n) +
                          " values");
    }
}

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double MetricVector::mean_dice() const {
    if (dice.empty()) return 0.0;
    return std::accumulate(dice.begin(), dice.end(), 0.0) / static_cast<double>(dice.size());
}

MetricVector MetricVector::clamped() const {
    MetricVector out = *this;
    for (double& d : out.dice) d = std::clamp(d, 0.0, 1.0);
    out.nfv_percent = std::clamp(nfv_percent, 0.0, 100.0);
    return out;
}

double dice(const LabelGrid& a, const LabelGrid& b, std::uint32_t label) {
    if (a.shape() != b.shape()) throw ConfigError("dice: shape mismatch");
    if (label < 1) throw ConfigError("dice: label must be >= 1");
    std::size_t na = 0;
    std::size_t nb = 0;
    std::size_t both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool in_a = a[i] == label;
        const bool in_b = b[i] == label;
        na += in_a;
        nb += in_b;
        both += in_a && in_b;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<double> dice_all(const LabelGrid& a, const LabelGrid& b, std::uint32_t label_count) {
    if (a.shape() != b.shape()) throw ConfigError("dice_all: shape mismatch");
    std::vector<std::size_t> na(label_count + 1, 0);
    std::vector<std::size_t> nb(label_count + 1, 0);
    std::vector<std::size_t> both(label_count + 1, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::uint32_t la = a[i];
        const std::uint32_t lb = b[i];
        if (la <= label_count) ++na[la];
        if (lb <= label_count) ++nb[lb];
        if (la == lb && la <= label_count) ++both[la];
    }
    std::vector<double> out(label_count);
    for (std::uint32_t l = 1; l <= label_count; ++l) {
        const std::size_t denom = na[l] + nb[l];
        out[l - 1] = denom == 0 ? 1.0 : 2.0 * static_cast<double>(both[l]) / static_cast<double>(denom);
    }
    return out;
}

double mean_absolute_error(std::span<const double> pred, std::span<const double> target) {
    require_paired(pred, target, 1, "mean_absolute_error");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

AgreementSummary bland_altman(std::span<const double> pred, std::span<const double> target) {
    require_paired(pred, target, 2, "bland_altman");
    std::vector<double> d(pred.size());
    std::vector<double> ad(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        d[i] = pred[i] - target[i];
        ad[i] = std::abs(d[i]);
    }
    AgreementSummary s;
    s.bias = mean(d);
    s.sd = sample_sd(d);
    s.loa_lo = s.bias - 1.96 * s.sd;
    s.loa_hi = s.bias + 1.96 * s.sd;
    s.mad = mean(ad);
    s.mad_sd = sample_sd(ad);
    return s;
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (const double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
    if (v.empty()) throw ConfigError("median of empty sequence");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double spearman(std::span<const double> a, std::span<const double> b) {
    require_paired(a, b, 2, "spearman");
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    const double ma = mean(ra);
    const double mb = mean(rb);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace hyperpredict
