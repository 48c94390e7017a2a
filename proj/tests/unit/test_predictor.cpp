#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "gradcheck.hpp"
#include "hyperpredict/predictor.hpp"

using namespace hyperpredict;

namespace {

EncoderConfig one_value_encoder() {
    EncoderConfig e;
    e.pool_nx = e.pool_ny = 1;
    return e;
}

Predictor tiny_net(std::vector<int> hidden, std::uint32_t labels = 1, std::uint64_t seed = 3) {
    MlpConfig m;
    m.hidden = std::move(hidden);
    m.init_seed = seed;
    return Predictor::create(one_value_encoder(), {"lambda"}, labels, m);
}

double leaky(double x, double a) { return x > 0 ? x : a * x; }

struct ToyData {
    std::vector<RegistrationRecord> train, val;
    std::map<std::string, Encoding> enc;
    TrainingData view() const {
        return {train, val, [this](const std::string& id) -> const Encoding& { return enc.at(id); }};
    }
};

// Dice decays with lambda at a pair-specific rate; %nfv falls with lambda.
ToyData toy_data(int pairs, int samples) {
    ToyData d;
    Rng rng(31);
    for (int p = 0; p < pairs; ++p) {
        const std::string id = "p" + std::to_string(p);
        const double e = rng.uniform(-1, 1);
        d.enc[id] = Encoding{{e}};
        for (int s = 0; s < samples; ++s) {
            const double lambda = std::exp(rng.uniform(-6, 0));
            RegistrationRecord r{id, {{"lambda", lambda}}, {{0.8 - 0.05 * e * std::log(lambda)}, 2.0 / (1.0 + 100 * lambda)}, 0};
            (p % 4 == 0 ? d.val : d.train).push_back(r);
        }
    }
    return d;
}

}  // namespace

TEST_CASE("zero weights output the final bias") {
    Predictor p = tiny_net({4, 3}, 2);
    for (auto& l : p.layers()) l.weight.setZero();
    const Eigen::VectorXd b = p.layers().back().bias;
    Eigen::MatrixXd in = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(p.input_dim()), 3);
    const Eigen::MatrixXd out = p.forward_batch(in);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK((out.col(j) - b).norm() == 0.0);
}

TEST_CASE("hand-computed forward pass") {
    Predictor p = tiny_net({1}, 1);
    auto& l = p.layers();
    l[0].weight << 0.5, -1.0;  // one hidden unit over (encoding, log lambda)
    l[0].bias << 0.25;
    l[1].weight << 2.0, -3.0;  // outputs: dice, nfv
    l[1].bias << 0.1, 0.2;
    Eigen::MatrixXd in(2, 2);
    in << 1.0, -2.0,
          0.5, 1.0;
    const double a = p.negative_slope();
    const double h0 = leaky(0.5 * 1.0 - 1.0 * 0.5 + 0.25, a);
    const double h1 = leaky(0.5 * -2.0 - 1.0 * 1.0 + 0.25, a);
    const Eigen::MatrixXd out = p.forward_batch(in);
    CHECK(out(0, 0) == doctest::Approx(2.0 * h0 + 0.1));
    CHECK(out(1, 0) == doctest::Approx(-3.0 * h0 + 0.2));
    CHECK(out(0, 1) == doctest::Approx(2.0 * h1 + 0.1));
    CHECK(out(1, 1) == doctest::Approx(-3.0 * h1 + 0.2));
    CHECK(out == p.forward_batch(in));
}

TEST_CASE("forward, forward_many and forward_batch agree") {
    Predictor p = tiny_net({5, 4}, 3);
    p.set_normalization({0.2}, {1.5}, {-4.0}, {2.0});
    const Encoding e{{0.7}};
    std::vector<HyperparamPoint> hps;
    for (int i = 0; i < 7; ++i) hps.push_back({{"lambda", std::exp(-7.0 + i)}});
    const auto many = p.forward_many(e, hps);
    for (std::size_t i = 0; i < hps.size(); ++i) {
        const MetricVector one = p.forward(e, hps[i]);
        for (std::size_t k = 0; k < one.dice.size(); ++k) CHECK(many[i].dice[k] == doctest::Approx(one.dice[k]).epsilon(1e-13));
        CHECK(many[i].nfv_percent == doctest::Approx(one.nfv_percent).epsilon(1e-13));
    }
    CHECK_THROWS_AS(static_cast<void>(p.forward(Encoding{{1.0, 2.0}}, hps[0])), ConfigError);
}

TEST_CASE("multitask loss") {
    const MetricVector t{{0.5}, 0.1};
    const LossParts zero = multitask_loss(t, t, 1.0);
    CHECK(zero.total == 0.0);
    CHECK(zero.overlap == 0.0);
    CHECK(zero.nfv == 0.0);
    const LossParts l = multitask_loss({{0.7}, 0.2}, t, 1.0);
    CHECK(l.total == doctest::Approx(0.05));
    CHECK(l.overlap == doctest::Approx(0.04));
    CHECK(l.nfv == doctest::Approx(0.01));
    const LossParts a0 = multitask_loss({{0.7, 0.1}, 3.0}, {{0.5, 0.4}, 0.0}, 0.0);
    CHECK(a0.total == a0.overlap);
}

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto problem = gradcheck::random_problem(100 + s);
        for (const auto& probe : gradcheck::check(problem, 10, 200 + s)) {
            CAPTURE(probe.index);
            CHECK(probe.relative_error() < 1e-5);
        }
    }
}

TEST_CASE("gradient of a perfect fit is zero; batch gradient is the per-sample mean") {
    auto problem = gradcheck::random_problem(7);
    problem.batch.targets = problem.net.forward_batch(problem.batch.inputs);
    for (const double g : backward(problem.net, problem.batch, problem.alpha).flatten()) CHECK(g == 0.0);

    const auto q = gradcheck::random_problem(8);
    const auto full = backward(q.net, q.batch, q.alpha).flatten();
    std::vector<double> acc(full.size(), 0.0);
    const auto n = q.batch.inputs.cols();
    for (Eigen::Index j = 0; j < n; ++j) {
        const Batch one{q.batch.inputs.col(j), q.batch.targets.col(j)};
        const auto g = backward(q.net, one, q.alpha).flatten();
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(full[i] == doctest::Approx(acc[i]).epsilon(1e-10).scale(1e-12));
}

TEST_CASE("log-normal sampling") {
    for (const double v : sample_lognormal(-2.0, 0.0, 10, 1)) CHECK(v == doctest::Approx(std::exp(-2.0)));
    const auto draws = sample_lognormal(-1.0, 0.5, 100000, 9);
    double sum = 0.0;
    for (const double v : draws) {
        CHECK(v > 0.0);
        sum += v;
    }
    const double expected = std::exp(-1.0 + 0.125);
    CHECK(std::abs(sum / 100000.0 - expected) / expected < 0.02);
    CHECK(sample_lognormal(0, 1, 5, 4) == sample_lognormal(0, 1, 5, 4));

    const auto multi = sample_hyperparams(HyperparamMode::multi, -3, 1, 4, 2, 5);
    for (const auto& hp : multi) {
        CHECK(hp.get("sx") == 5.0);
        CHECK(hp.contains("be"));
        CHECK(hp.contains("le"));
    }
}

TEST_CASE("training fits a single point") {
    ToyData d = toy_data(1, 1);
    d.train = {d.val.front()};
    d.val.clear();
    TrainConfig tc;
    tc.epochs = 200;
    tc.learning_rate = 1e-3;
    MlpConfig mlp;
    mlp.hidden = {8};
    const auto r = train(d.view(), one_value_encoder(), {"lambda"}, 1, mlp, tc);
    REQUIRE(r.log.size() == 200);
    CHECK(r.log.back().train_loss < r.log.front().train_loss);
}

TEST_CASE("training is deterministic and learning rate zero changes nothing") {
    const ToyData d = toy_data(12, 8);
    TrainConfig tc;
    tc.epochs = 5;
    tc.learning_rate = 1e-3;
    MlpConfig mlp;
    mlp.hidden = {8, 8};
    mlp.init_seed = 5;
    const auto a = train(d.view(), one_value_encoder(), {"lambda"}, 1, mlp, tc);
    const auto b = train(d.view(), one_value_encoder(), {"lambda"}, 1, mlp, tc);
    CHECK(a.predictor == b.predictor);
    CHECK(a.log.size() == 5);
    CHECK(a.best_epoch >= 1);

    tc.learning_rate = 0.0;
    const auto frozen = train(d.view(), one_value_encoder(), {"lambda"}, 1, mlp, tc);
    const auto init = Predictor::create(one_value_encoder(), {"lambda"}, 1, mlp);
    CHECK(frozen.predictor.parameters() == init.parameters());
}

TEST_CASE("training learns a pair-dependent curve") {
    const ToyData d = toy_data(40, 16);
    TrainConfig tc;
    tc.epochs = 150;
    tc.learning_rate = 3e-3;
    const auto r = train(d.view(), one_value_encoder(), {"lambda"}, 1, MlpConfig{}, tc);
    double err = 0.0;
    for (const auto& rec : d.val) {
        err += std::abs(r.predictor.forward(d.enc.at(rec.pair_id), rec.hp).dice[0] - rec.target.dice[0]);
    }
    CHECK(err / static_cast<double>(d.val.size()) < 0.03);
}

TEST_CASE("predictor files round-trip") {
    Predictor p = tiny_net({6, 5}, 2, 11);
    p.set_normalization({0.1}, {2.0}, {-3.0}, {1.5});
    std::stringstream ss;
    p.save(ss);
    const Predictor q = Predictor::load(ss);
    CHECK(q == p);
    CHECK(q.hp_names() == p.hp_names());
    std::stringstream bad("not a predictor");
    CHECK_THROWS(Predictor::load(bad));
}
