#include <doctest.h>

#include <cmath>

#include "blindrestore/schedule.hpp"

using namespace blindrestore;

TEST_SUITE("schedule") {

TEST_CASE("single step product") {
    NoiseSchedule s = make_schedule(1, 0.5, 0.5, 1.0);
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.alpha_bar_at(0) == 1.0);
}

TEST_CASE("two step cumulative product") {
    NoiseSchedule s = make_schedule(2, 0.1, 0.2, 1.0);
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar_at(2) == doctest::Approx(0.72).epsilon(1e-15));
}

TEST_CASE("long schedule against log-domain accumulation") {
    NoiseSchedule s = make_schedule(200, 1e-4, 0.02, 1.0);
    // independent route: sum of logs instead of running product
    double acc = 0.0;
    for (int t = 1; t <= 200; ++t) acc += std::log1p(-s.beta_at(t));
    double ref = std::exp(acc);
    CHECK(std::abs(s.alpha_bar_at(200) - ref) / ref < 1e-12);
}

TEST_CASE("alpha_bar is strictly decreasing and consistent with beta") {
    NoiseSchedule s = make_schedule(200, 1e-4, 0.02, 1.0);
    for (int t = 1; t <= s.T; ++t) {
        CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
        double rebuilt = s.alpha_bar_at(t - 1) * (1.0 - s.beta_at(t));
        CHECK(std::abs(rebuilt - s.alpha_bar_at(t)) <= 1e-12 * s.alpha_bar_at(t));
    }
    CHECK(s.alpha_bar_at(s.T) > 0.0);
    CHECK(s.alpha_bar_at(1) < 1.0);
}

TEST_CASE("bad arguments rejected") {
    CHECK_THROWS(make_schedule(0, 0.1, 0.2, 1.0));
    CHECK_THROWS(make_schedule(10, 0.2, 0.1, 1.0));
    CHECK_THROWS(make_schedule(10, 0.0, 0.2, 1.0));
    CHECK_THROWS(make_schedule(10, 0.1, 1.0, 1.0));
    CHECK_THROWS(make_schedule(10, 0.1, 0.2, 1.5));
    CHECK_THROWS(make_schedule(10, 0.1, 0.2, -0.1));
}

TEST_CASE("ddim sigma values") {
    NoiseSchedule s0 = make_schedule(8, 1e-3, 0.1, 0.0);
    for (int t = 1; t <= 8; ++t) CHECK(ddim_sigma(s0, t) == 0.0);

    NoiseSchedule s1 = make_schedule(2, 0.1, 0.2, 1.0);
    CHECK(ddim_sigma(s1, 1) == 0.0);  // alpha_bar(0) == 1
    double expect = std::sqrt(0.1 * 0.2 / 0.28);
    CHECK(ddim_sigma(s1, 2) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sigma keeps the direction coefficient real") {
    NoiseSchedule s = make_schedule(200, 1e-4, 0.02, 1.0);
    for (int t = 1; t <= s.T; ++t) {
        double sig = ddim_sigma(s, t);
        CHECK(1.0 - s.alpha_bar_at(t - 1) - sig * sig >= -1e-12);
    }
}

TEST_CASE("sigma is monotone in eta") {
    for (double lo = 0.0, hi = 0.25; hi <= 1.0; lo += 0.25, hi += 0.25) {
        NoiseSchedule a = make_schedule(50, 1e-3, 0.05, lo);
        NoiseSchedule b = make_schedule(50, 1e-3, 0.05, hi);
        for (int t = 2; t <= 50; t += 7) CHECK(ddim_sigma(a, t) <= ddim_sigma(b, t));
    }
}

}  // TEST_SUITE
