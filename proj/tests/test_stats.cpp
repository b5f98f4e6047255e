#include "doctest.h"

#include <stdexcept>

#include "abmtk/stats.hpp"

using namespace abmtk;
using doctest::Approx;

TEST_CASE("wilson interval matches independently computed bounds") {
    // Reference bounds computed separately from the closed form with
    // z = Phi^-1(0.975).
    Interval half = wilson95(50, 100);
    CHECK(half.lo == Approx(0.4038315303659956).epsilon(1e-12));
    CHECK(half.hi == Approx(0.5961684696340044).epsilon(1e-12));
    CHECK(half.contains(0.5));
    CHECK(!half.contains(0.6));

    Interval rare = wilson95(1, 10);
    CHECK(rare.lo == Approx(0.017876213095072896).epsilon(1e-12));
    CHECK(rare.hi == Approx(0.4041500267952385).epsilon(1e-12));
}

TEST_CASE("wilson interval stays inside [0,1] at the extremes") {
    Interval none = wilson95(0, 100);
    CHECK(none.lo == Approx(0.0).epsilon(1e-12));
    CHECK(none.hi == Approx(0.03699349820698568).epsilon(1e-12));
    CHECK(none.contains(0.0));

    Interval all = wilson95(100, 100);
    CHECK(all.lo == Approx(0.9630065017930143).epsilon(1e-12));
    CHECK(all.hi == 1.0);
    CHECK(all.contains(1.0));

    // Tiny samples must still be clamped.
    CHECK(wilson95(0, 1).lo == 0.0);
    CHECK(wilson95(1, 1).hi == 1.0);
}

TEST_CASE("wilson interval rejects impossible inputs") {
    CHECK_THROWS_AS(wilson95(1, 0), std::invalid_argument);
    CHECK_THROWS_AS(wilson95(5, 4), std::invalid_argument);
}

TEST_CASE("pearson recovers a hand-checked correlation") {
    // For x = 1..5 and y below: sxy = 12, sxx = 10, syy = 14.8,
    // r = 12 / sqrt(148). CI endpoints via Fisher z with se = 1/sqrt(2).
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y{1, 2, 3, 4, 6};
    Correlation c = pearson(x, y);
    REQUIRE(c.defined);
    CHECK(c.n == 5);
    CHECK(c.r == Approx(0.9863939238321437).epsilon(1e-12));
    CHECK(c.ci.lo == Approx(0.8025997931660578).epsilon(1e-12));
    CHECK(c.ci.hi == Approx(0.9991434933863064).epsilon(1e-12));
    CHECK(c.ci.excludes_zero());
}

TEST_CASE("pearson handles exact linear dependence") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> up{2, 4, 6, 8, 10};
    std::vector<double> down{10, 8, 6, 4, 2};

    Correlation cu = pearson(x, up);
    REQUIRE(cu.defined);
    CHECK(cu.r == 1.0);
    // atanh(1) is infinite; tanh folds the interval back to the endpoint.
    CHECK(cu.ci.lo == 1.0);
    CHECK(cu.ci.hi == 1.0);

    Correlation cd = pearson(x, down);
    REQUIRE(cd.defined);
    CHECK(cd.r == -1.0);
    CHECK(cd.ci.lo == -1.0);
    CHECK(cd.ci.hi == -1.0);
    CHECK(cd.ci.excludes_zero());

    // Still a point interval at the minimum sample size, where the Fisher
    // standard error is itself infinite.
    Correlation c3 = pearson({1, 2, 3}, {2, 4, 6});
    REQUIRE(c3.defined);
    CHECK(c3.ci.lo == 1.0);
    CHECK(c3.ci.hi == 1.0);

    // Three noisy points, by contrast, pin nothing down at all.
    Correlation loose = pearson({1, 2, 3}, {2, 5, 6});
    REQUIRE(loose.defined);
    CHECK(loose.ci.lo == -1.0);
    CHECK(loose.ci.hi == 1.0);
    CHECK(!loose.ci.excludes_zero());
}

TEST_CASE("pearson is undefined on constant or tiny inputs") {
    std::vector<double> x{1, 2, 3, 4};
    std::vector<double> flat{7, 7, 7, 7};
    CHECK(!pearson(x, flat).defined);
    CHECK(!pearson(flat, x).defined);

    // Fewer than three points: no degrees of freedom for the interval.
    CHECK(!pearson({1, 2}, {1, 2}).defined);
    CHECK(!pearson({}, {}).defined);

    CHECK_THROWS_AS(pearson({1, 2, 3}, {1, 2}), std::invalid_argument);
}

TEST_CASE("interval zero exclusion is a strict test") {
    CHECK(Interval{0.1, 0.5}.excludes_zero());
    CHECK(Interval{-0.5, -0.1}.excludes_zero());
    CHECK(!Interval{-0.1, 0.5}.excludes_zero());
    CHECK(!Interval{0.0, 0.5}.excludes_zero());
}
