#include <doctest.h>

#include <cmath>

#include "cornyield/error.hpp"
#include "cornyield/metrics.hpp"
#include "support.hpp"

using namespace cornyield;

TEST_CASE("metrics on a hand example") {
    const std::vector<double> pred{1.0, 2.0, 4.0};
    const std::vector<double> actual{1.0, 3.0, 2.0};
    CHECK(metrics::mae(pred, actual) == doctest::Approx(1.0));
    CHECK(metrics::rmse(pred, actual) == doctest::Approx(std::sqrt(5.0 / 3.0)));
    const auto r = metrics::arse(pred, actual);
    CHECK(r.n == 3);
    CHECK(r.arse == (r.rmse + r.mae) / 2.0);
}

TEST_CASE("perfect prediction scores zero") {
    const std::vector<double> v{0.7, 2.6, 1.1};
    const auto r = metrics::arse(v, v);
    CHECK(r.rmse == 0.0);
    CHECK(r.mae == 0.0);
    CHECK(r.arse == 0.0);
}

TEST_CASE("arse identity and mae bound on random vectors") {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng.index(40);
        const auto p = testing::random_vector(n, rng, -3, 3);
        const auto a = testing::random_vector(n, rng, -3, 3);
        const auto r = metrics::arse(p, a);
        CHECK(r.arse == metrics::arse_of(r.rmse, r.mae));
        CHECK(r.mae <= r.rmse + 1e-15);
    }
}

TEST_CASE("table row arithmetic") {
    const double a = metrics::arse_of(1.43e-3, 1.54e-4);
    CHECK(a == doctest::Approx(7.92e-4).epsilon(5e-4));
}

TEST_CASE("metric errors") {
    const std::vector<double> a{1.0, 2.0};
    const std::vector<double> b{1.0};
    const std::vector<double> empty;
    CHECK_THROWS_AS((void)metrics::rmse(a, b), Error);
    CHECK_THROWS_AS((void)metrics::mae(empty, empty), Error);
    try {
        (void)metrics::arse(a, b);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LengthMismatch);
    }
}
