#pragma once

// Central finite-difference check of the predictor's analytic gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hyperpredict/predictor.hpp"
#include "hyperpredict/rng.hpp"

namespace gradcheck {

using namespace hyperpredict;

struct Probe {
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;

    [[nodiscard]] double relative_error() const {
        const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        return std::abs(analytic - numeric) / scale;
    }
};

// A random small network with random normalized inputs and targets.
struct Problem {
    Predictor net;
    Batch batch;
    double alpha = 1.0;
};

inline Problem random_problem(std::uint64_t seed) {
    Rng rng(seed);
    EncoderConfig enc;
    enc.pool_nx = static_cast<int>(1 + rng.below(2));
    enc.pool_ny = 1;
    MlpConfig mlp;
    mlp.hidden.clear();
    const auto depth = 1 + rng.below(2);
    for (std::uint64_t d = 0; d < depth; ++d) mlp.hidden.push_back(static_cast<int>(3 + rng.below(4)));
    mlp.negative_slope = 0.01 + 0.2 * rng.uniform();
    mlp.init_seed = rng.next_u64();
    const auto labels = static_cast<std::uint32_t>(1 + rng.below(3));
    Problem p{Predictor::create(enc, {"lambda"}, labels, mlp), {}, rng.uniform(0.1, 2.0)};
    const auto n = static_cast<Eigen::Index>(2 + rng.below(5));
    p.batch.inputs.resize(static_cast<Eigen::Index>(p.net.input_dim()), n);
    p.batch.targets.resize(static_cast<Eigen::Index>(p.net.output_dim()), n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < p.batch.inputs.rows(); ++i) p.batch.inputs(i, j) = rng.normal();
        for (Eigen::Index i = 0; i < p.batch.targets.rows(); ++i) p.batch.targets(i, j) = rng.uniform();
    }
    return p;
}

// Compares `probes` randomly chosen parameters against central differences.
inline std::vector<Probe> check(const Problem& p, int probes, std::uint64_t seed, double h = 1e-6) {
    const std::vector<double> analytic = backward(p.net, p.batch, p.alpha).flatten();
    std::vector<double> theta = p.net.parameters();
    Predictor work = p.net;
    Rng rng(seed);
    std::vector<Probe> out;
    for (int k = 0; k < probes; ++k) {
        const auto i = static_cast<std::size_t>(rng.below(theta.size()));
        std::vector<double> t = theta;
        t[i] = theta[i] + h;
        work.set_parameters(t);
        const double up = batch_loss(work, p.batch, p.alpha).total;
        t[i] = theta[i] - h;
        work.set_parameters(t);
        const double dn = batch_loss(work, p.batch, p.alpha).total;
        out.push_back({i, analytic[i], (up - dn) / (2.0 * h)});
    }
    return out;
}

}  // namespace gradcheck
