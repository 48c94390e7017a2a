#include <doctest.h>

#include <cmath>
#include <vector>

#include "hyperpredict/metrics.hpp"
#include "oracles.hpp"

using namespace hyperpredict;

TEST_CASE("dice on hand-built masks") {
    const Shape s{4, 4};
    LabelGrid a(s, 0u), b(s, 0u);
    CHECK(dice(a, b, 1) == 1.0);  // both empty
    for (int x = 0; x < 4; ++x) a(x, 0) = 1;
    CHECK(dice(a, a, 1) == 1.0);
    for (int x = 0; x < 4; ++x) b(x, 3) = 1;
    CHECK(dice(a, b, 1) == 0.0);
    LabelGrid c(s, 0u);
    c(0, 0) = c(1, 0) = c(0, 1) = c(1, 1) = 1;  // |a|=4, |c|=4, overlap 2
    CHECK(dice(a, c, 1) == doctest::Approx(0.5));
}

TEST_CASE("dice_all") {
    Rng rng(11);
    const Shape s{6, 6};
    const LabelGrid a = oracle::random_labels(rng, s, 3);
    for (const double d : dice_all(a, a, 3)) CHECK(d == 1.0);

    LabelGrid x(s, 0u), y(s, 0u);
    x(0, 0) = 1;
    x(5, 5) = 2;
    y(0, 0) = 2;
    y(5, 5) = 1;
    CHECK(dice_all(x, y, 2) == std::vector<double>{0.0, 0.0});

    for (int k = 0; k < 200; ++k) {
        const auto p = oracle::random_labels(rng, s, 4);
        const auto q = oracle::random_labels(rng, s, 4);
        const auto all = dice_all(p, q, 4);
        for (std::uint32_t l = 1; l <= 4; ++l) {
            CHECK(all[l - 1] == oracle::dice(p, q, l));
            CHECK(dice(p, q, l) == oracle::dice(p, q, l));
        }
    }
}

TEST_CASE("mean absolute error") {
    const std::vector<double> z{0.0, 0.0};
    CHECK(mean_absolute_error(z, z) == 0.0);
    const std::vector<double> p{1.0, 0.0};
    CHECK(mean_absolute_error(p, z) == doctest::Approx(0.5));

    Rng rng(12);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> a(17), b(17);
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal();
            acc += std::abs(a[i] - b[i]);
        }
        CHECK(mean_absolute_error(a, b) == doctest::Approx(acc / 17.0));
    }
    CHECK_THROWS(mean_absolute_error(std::vector<double>{1.0}, z));
}

TEST_CASE("bland-altman summary") {
    const std::vector<double> t{0.0, 2.0};
    const auto same = bland_altman(t, t);
    CHECK(same.bias == 0.0);
    CHECK(same.loa_lo == 0.0);
    CHECK(same.loa_hi == 0.0);

    const std::vector<double> p{1.0, 3.0};
    const auto s = bland_altman(p, t);
    CHECK(s.bias == doctest::Approx(1.0));
    CHECK(s.sd == doctest::Approx(0.0));
    CHECK(s.loa_lo == doctest::Approx(1.0));
    CHECK(s.loa_hi == doctest::Approx(1.0));

    Rng rng(13);
    std::vector<double> a(40), b(40), d(40);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
        d[i] = a[i] - b[i];
    }
    double m = 0.0, mad = 0.0;
    for (const double v : d) {
        m += v;
        mad += std::abs(v);
    }
    m /= 40.0;
    mad /= 40.0;
    double ss = 0.0;
    for (const double v : d) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / 39.0);
    const auto r = bland_altman(a, b);
    CHECK(r.bias == doctest::Approx(m));
    CHECK(r.sd == doctest::Approx(sd));
    CHECK(r.loa_lo == doctest::Approx(m - 1.96 * sd));
    CHECK(r.loa_hi == doctest::Approx(m + 1.96 * sd));
    CHECK(r.mad == doctest::Approx(mad));
}

TEST_CASE("summary statistics") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    const std::vector<double> up{1, 2, 3, 4, 5};
    const std::vector<double> down{10, 8, 6, 4, 2};
    CHECK(spearman(up, down) == doctest::Approx(-1.0));
    CHECK(spearman(up, up) == doctest::Approx(1.0));
    const std::vector<double> sq{1, 4, 9, 16, 25};
    CHECK(spearman(up, sq) == doctest::Approx(1.0));
    CHECK(sample_sd(std::vector<double>{5.0}) == 0.0);
}

TEST_CASE("metric vector helpers") {
    MetricVector m{{0.5, 1.2, -0.1}, 120.0};
    CHECK(m.mean_dice() == doctest::Approx(1.6 / 3.0));
    const auto c = m.clamped();
    CHECK(c.dice == std::vector<double>{0.5, 1.0, 0.0});
    CHECK(c.nfv_percent == 100.0);
}
