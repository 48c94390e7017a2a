#include <doctest.h>

#include <cmath>

#include "hyperpredict/selection.hpp"
#include "oracles.hpp"

using namespace hyperpredict;

namespace {

SweepRow row(double lambda, double d, double nfv) { return {{{"lambda", lambda}}, {{d}, nfv}}; }

Predictor small_predictor() {
    EncoderConfig e;
    e.pool_nx = e.pool_ny = 1;
    MlpConfig m;
    m.hidden = {8};
    m.init_seed = 2;
    return Predictor::create(e, {"lambda"}, 2, m);
}

}  // namespace

TEST_CASE("select_optimal examples") {
    const SweepTable t{row(0.05, 0.80, 0.7), row(0.2, 0.75, 0.4)};
    const Selection s = select_optimal(t, SelectionCriterion{});
    CHECK(s.hp.get("lambda") == 0.2);
    CHECK(s.feasible);

    const SweepTable all_ok{row(0.01, 0.7, 0.0), row(0.1, 0.9, 0.1), row(1.0, 0.8, 0.0)};
    CHECK(select_optimal(all_ok, SelectionCriterion{}).row == 1);

    const SweepTable tie{row(0.01, 0.9, 0.0), row(0.1, 0.9, 0.0)};
    CHECK(select_optimal(tie, SelectionCriterion{}).hp.get("lambda") == 0.1);
}

TEST_CASE("infeasible tables") {
    const SweepTable t{row(0.01, 0.9, 3.0), row(0.1, 0.8, 1.0), row(1.0, 0.7, 1.0)};
    const Selection s = select_optimal(t, SelectionCriterion{});
    CHECK_FALSE(s.feasible);
    CHECK(s.row == 1);
    SelectionCriterion strict;
    strict.policy = InfeasiblePolicy::error;
    CHECK_THROWS_AS(select_optimal(t, strict), InfeasibleSelection);
    CHECK_THROWS_AS(select_optimal({}, SelectionCriterion{}), ConfigError);
}

TEST_CASE("select_optimal matches the brute-force oracle") {
    Rng rng(41);
    for (int k = 0; k < 1000; ++k) {
        const auto L = static_cast<std::uint32_t>(1 + rng.below(4));
        const SweepTable t = oracle::random_table(rng, 1 + rng.below(15), L);
        const SelectionCriterion c = oracle::random_criterion(rng, L);
        REQUIRE(select_optimal(t, c).row == oracle::select(t, c));
    }
}

TEST_CASE("raising the ceiling never lowers the selected objective") {
    Rng rng(42);
    for (int k = 0; k < 300; ++k) {
        const SweepTable t = oracle::random_table(rng, 2 + rng.below(12), 3);
        SelectionCriterion lo;
        lo.nfv_ceiling = oracle::lattice(rng, 8, 1.0);
        SelectionCriterion hi = lo;
        hi.nfv_ceiling += oracle::lattice(rng, 8, 1.0);
        const Selection a = select_optimal(t, lo);
        const Selection b = select_optimal(t, hi);
        if (a.feasible) CHECK(b.objective >= a.objective);
    }
}

TEST_CASE("objectives") {
    const MetricVector m{{0.2, 0.4, 0.9}, 0.0};
    SelectionCriterion c;
    CHECK(c.objective_value(m) == doctest::Approx(0.5));
    c.objective = ObjectiveKind::mean_dice_subset;
    c.labels = {1, 3};
    CHECK(c.objective_value(m) == doctest::Approx(0.55));
    CHECK(SelectionCriterion::single_label_of(2).objective_value(m) == 0.4);

    // Label 2 prefers the weak setting, the mean prefers the strong one.
    const SweepTable t{{{{"lambda", 0.01}}, {{0.5, 0.95}, 0.0}}, {{{"lambda", 1.0}}, {{0.9, 0.7}, 0.0}}};
    CHECK(select_optimal(t, SelectionCriterion{}).hp.get("lambda") == 1.0);
    CHECK(select_optimal(t, SelectionCriterion::single_label_of(2)).hp.get("lambda") == 0.01);
    const auto per_label = select_per_label({t, t}, 2, SelectionCriterion{});
    CHECK(per_label.size() == 2);
    CHECK(per_label[1].hp.get("lambda") == 0.01);

    SelectionCriterion bad;
    bad.objective = ObjectiveKind::single_label;
    bad.labels = {1, 2};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("make_grid") {
    const auto g = make_grid(-2.0, 0.0, 3);
    CHECK(g[0] == doctest::Approx(std::exp(-2.0)));
    CHECK(g[1] == doctest::Approx(std::exp(-1.0)));
    CHECK(g[2] == 1.0);
    const auto h = make_grid(-7.6, -1.6, 50);
    CHECK(h.front() == std::exp(-7.6));
    CHECK(h.back() == std::exp(-1.6));
    for (std::size_t i = 2; i < h.size(); ++i) CHECK(h[i] / h[i - 1] == doctest::Approx(h[1] / h[0]));
    CHECK_THROWS_AS(make_grid(0.0, 1.0, 1), ConfigError);
}

TEST_CASE("sweeps") {
    const Predictor p = small_predictor();
    const Encoding e{{0.3}};
    const auto one = sweep_pair(p, e, grid_points("lambda", {0.1}));
    REQUIRE(one.size() == 1);
    CHECK(one[0].metrics == p.forward(e, {{"lambda", 0.1}}).clamped());
    const auto dup = sweep_pair(p, e, grid_points("lambda", {0.2, 0.2}));
    CHECK(dup[0].metrics == dup[1].metrics);

    EncoderConfig enc;
    enc.pool_nx = enc.pool_ny = 1;
    MlpConfig m;
    m.hidden = {6};
    const Predictor multi = Predictor::create(enc, {"be", "le"}, 2, m);
    const auto t = sweep_2d(multi, e, {0.1, 0.2}, {0.01, 0.02, 0.03}, {{"sx", 5}});
    CHECK(t.size() == 6);
    const auto slice = sweep_pair(multi, e, grid_points("be", {0.1, 0.2}, {{"le", 0.02}, {"sx", 5}}));
    CHECK(t[1].metrics == slice[0].metrics);
    CHECK(t[4].metrics == slice[1].metrics);
}

TEST_CASE("cross-validation selection") {
    const std::vector<HyperparamPoint> one{{{"lambda", 0.1}}};
    const std::vector<RegistrationRecord> recs{{"a", one[0], {{0.7}, 0.0}, 0}};
    CHECK(cross_validation_select(recs, one, SelectionCriterion{}) == one[0]);

    const std::vector<HyperparamPoint> two{{{"lambda", 0.1}}, {{"lambda", 0.3}}};
    const std::vector<RegistrationRecord> r2{{"a", two[0], {{0.70}, 0.0}, 0}, {"a", two[1], {{0.72}, 0.0}, 0}};
    CHECK(cross_validation_select(r2, two, SelectionCriterion{}) == two[1]);

    Rng rng(43);
    for (int k = 0; k < 1000; ++k) {
        const auto L = static_cast<std::uint32_t>(1 + rng.below(3));
        std::vector<HyperparamPoint> cands;
        for (int c = 0; c < 1 + static_cast<int>(rng.below(6)); ++c) {
            HyperparamPoint hp{{"lambda", std::exp(-5.0 + c)}};
            cands.push_back(hp);
        }
        std::vector<RegistrationRecord> rs;
        const int pairs = 1 + static_cast<int>(rng.below(5));
        for (int p = 0; p < pairs; ++p) {
            for (const auto& hp : cands) {
                const int reps = 1 + static_cast<int>(rng.below(2));
                for (int r = 0; r < reps; ++r) rs.push_back({"p" + std::to_string(p), hp, oracle::random_metrics(rng, L), 0});
            }
        }
        const SelectionCriterion c = oracle::random_criterion(rng, L);
        const auto expected = oracle::cross_validation(rs, cands, c);
        if (expected) {
            REQUIRE(cross_validation_select(rs, cands, c) == cands[*expected]);
        } else {
            REQUIRE_THROWS_AS(cross_validation_select(rs, cands, c), InfeasibleSelection);
        }
    }
}
