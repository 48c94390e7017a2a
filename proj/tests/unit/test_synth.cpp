#include <doctest.h>

#include <algorithm>
#include <set>

#include "hyperpredict/metrics.hpp"
#include "hyperpredict/synth.hpp"

using namespace hyperpredict;

TEST_CASE("zero amplitude and zero noise give an identical pair") {
    DatasetConfig c;
    c.amplitude = 0.0;
    c.noise_sd = 0.0;
    const ImagePair p = generate_pair(c, 3);
    CHECK(p.moving == p.fixed);
    CHECK(p.moving_labels == p.fixed_labels);
    for (const double d : dice_all(p.moving_labels, p.fixed_labels, c.label_count)) CHECK(d == 1.0);
}

TEST_CASE("pairs are deterministic per (seed, index)") {
    DatasetConfig c;
    c.seed = 42;
    const ImagePair a = generate_pair(c, 5);
    const ImagePair b = generate_pair(c, 5);
    CHECK(a.fixed == b.fixed);
    CHECK(a.moving == b.moving);
    CHECK(a.fixed_labels == b.fixed_labels);
    CHECK(a.moving_labels == b.moving_labels);
    CHECK_FALSE(generate_pair(c, 6).moving == a.moving);
    c.seed = 43;
    CHECK_FALSE(generate_pair(c, 5).moving == a.moving);
}

TEST_CASE("every label is present, ids are in range, intensities in [0, 1]") {
    for (const std::uint32_t L : {2u, 5u, 8u}) {
        DatasetConfig c;
        c.label_count = L;
        for (int i = 0; i < 5; ++i) {
            const ImagePair p = generate_pair(c, i);
            CHECK_NOTHROW(p.validate(L));
            std::set<std::uint32_t> seen(p.fixed_labels.begin(), p.fixed_labels.end());
            for (std::uint32_t l = 0; l <= L; ++l) CHECK(seen.count(l) == 1);
            for (const double v : p.moving) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}

TEST_CASE("the generating field peaks at the drawn amplitude") {
    DatasetConfig c;
    c.amplitude = 2.0;
    c.amplitude_max = 6.0;
    for (int i = 0; i < 8; ++i) {
        const SyntheticPair sp = generate_pair_with_truth(c, i);
        CHECK(sp.amplitude >= 2.0);
        CHECK(sp.amplitude <= 6.0);
        CHECK(max_displacement(sp.generating_field) == doctest::Approx(sp.amplitude));
    }
}

TEST_CASE("two-label layout has a bulky label and a thin label") {
    DatasetConfig c;
    c.label_count = 2;
    const Anatomy a = generate_anatomy(c, 0);
    const auto n1 = std::count(a.labels.begin(), a.labels.end(), 1u);
    const auto n2 = std::count(a.labels.begin(), a.labels.end(), 2u);
    CHECK(n1 > 200);
    CHECK(n2 > 200);
    // Thin: no label-2 cell has label-2 neighbours on all four sides... mostly.
    int interior = 0;
    for (int y = 1; y < a.labels.ny() - 1; ++y) {
        for (int x = 1; x < a.labels.nx() - 1; ++x) {
            if (a.labels(x, y) == 2 && a.labels(x - 1, y) == 2 && a.labels(x + 1, y) == 2 &&
                a.labels(x, y - 1) == 2 && a.labels(x, y + 1) == 2) {
                ++interior;
            }
        }
    }
    CHECK(interior < n2 / 2);
}

TEST_CASE("dataset splits") {
    DatasetConfig c;
    c.pair_count = 100;
    c.train_fraction = 0.62;
    c.val_fraction = 0.19;
    c.test_fraction = 0.19;
    const DatasetSplit s = split_dataset(c);
    CHECK(s.train.size() == 62);
    CHECK(s.val.size() == 19);
    CHECK(s.test.size() == 19);
    std::set<int> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
    CHECK(all.size() == 100);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 99);

    const DatasetSplit again = split_dataset(c);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);
}

TEST_CASE("dataset config validation") {
    DatasetConfig c;
    c.label_count = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DatasetConfig{};
    c.train_fraction = 0.9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DatasetConfig{};
    c.amplitude_max = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(parse_split("dev"), ConfigError);
}
