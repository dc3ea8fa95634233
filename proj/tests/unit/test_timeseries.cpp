#include <doctest.h>

#include <cmath>

#include "cornyield/error.hpp"
#include "cornyield/timeseries.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cornyield;

TEST_CASE("difference and integrate round trip") {
    Rng rng(2);
    for (int d = 0; d <= 3; ++d) {
        const auto x = testing::random_vector(30, rng, -10, 10);
        const std::span<const double> all(x);
        const auto w = ts::difference(all, d);
        CHECK(w.size() == x.size() - static_cast<std::size_t>(d));
        const auto back = ts::integrate(all.subspan(0, d), w);
        REQUIRE(back.size() == w.size());
        for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == doctest::Approx(x[i + d]).epsilon(1e-12));
    }
    const std::vector<double> x{1, 4, 9, 16, 25};
    CHECK(ts::difference(x, 2) == std::vector<double>{2, 2, 2});
    CHECK_THROWS_AS((void)ts::difference(x, 5), Error);
}

TEST_CASE("acf and pacf basics") {
    const auto x = oracle::simulate_ar1(0.7, 0.0, 2000, 4);
    const auto a = ts::acf(x, 3);
    const auto p = ts::pacf(x, 3);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == doctest::Approx(0.7).epsilon(0.1));
    CHECK(a[2] == doctest::Approx(0.49).epsilon(0.15));
    CHECK(p[1] == doctest::Approx(a[1]));
    CHECK(std::abs(p[2]) < 0.08);
}

TEST_CASE("adf separates stationary and random-walk series") {
    const auto stationary = oracle::simulate_ar1(0.3, 1.0, 300, 8);
    CHECK(ts::adf_test(stationary).stationary);
    Rng rng(3);
    std::vector<double> walk{0.0};
    for (int i = 0; i < 300; ++i) walk.push_back(walk.back() + rng.normal());
    const auto r = ts::adf_test(walk);
    CHECK_FALSE(r.stationary);
    CHECK(r.p_value > 0.05);
    const std::vector<double> tiny{1, 2, 3};
    CHECK_THROWS_AS((void)ts::adf_test(tiny), Error);
}

TEST_CASE("mackinnon p-values are monotone and anchored") {
    CHECK(ts::mackinnon_p_value(-2.86) == doctest::Approx(0.05).epsilon(0.05));
    CHECK(ts::mackinnon_p_value(-3.43) == doctest::Approx(0.01).epsilon(0.1));
    double prev = 0.0;
    for (double t = -6; t <= 2; t += 0.25) {
        const double p = ts::mackinnon_p_value(t);
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("constant series forecast stays constant") {
    ts::Series s{std::vector<double>(15, 4.25), "c", false};
    for (const ts::ArimaOrder order : {ts::ArimaOrder{1, 0, 0}, ts::ArimaOrder{0, 1, 0}, ts::ArimaOrder{1, 1, 0}}) {
        const auto m = ts::fit_arima(s, order);
        for (double v : ts::forecast(m, s, 6)) CHECK(std::abs(v - 4.25) < 1e-8);
    }
}

TEST_CASE("AR(1) coefficient recovery") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ts::Series s{oracle::simulate_ar1(0.7, 0.5, 300, 100 + seed), "ar1", false};
        const auto m = ts::fit_arima(s, {1, 0, 0});
        hits += (m.ar[0] >= 0.6 && m.ar[0] <= 0.8) ? 1 : 0;
        CHECK(m.ar_stationary);
    }
    CHECK(hits >= 18);
}

TEST_CASE("ARMA(1,1) fit converges near the generating values") {
    Rng rng(21);
    std::vector<double> x;
    double prev = 0, eprev = 0;
    for (int t = 0; t < 1200; ++t) {
        const double e = rng.normal();
        const double v = 0.5 * prev + e + 0.4 * eprev;
        if (t >= 200) x.push_back(v);
        prev = v;
        eprev = e;
    }
    const auto m = ts::fit_arima({x, "arma", false}, {1, 0, 1});
    CHECK(m.ar[0] == doctest::Approx(0.5).epsilon(0.2));
    CHECK(m.ma[0] == doctest::Approx(0.4).epsilon(0.25));
    CHECK(m.sigma2 == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("log-transformed forecasts are positive and on the original scale") {
    std::vector<double> raw;
    for (int t = 0; t < 12; ++t) raw.push_back(1000.0 * std::pow(1.05, t) * (t % 2 ? 1.01 : 0.99));
    const auto s = ts::Series::logged(raw, "area");
    const auto lv = s.levels();
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(lv[i] == doctest::Approx(raw[i]));
    const auto m = ts::fit_arima(s, {0, 1, 0});
    const auto f = ts::forecast(m, s, 3);
    CHECK(f[0] > raw.back());
    CHECK(f[2] > f[1]);
    const std::vector<double> bad{1, 0, 2};
    CHECK_THROWS_AS((void)ts::Series::logged(bad, "x"), Error);
}

TEST_CASE("order selection and validation") {
    Rng rng(6);
    std::vector<double> walk{10};
    for (int i = 0; i < 60; ++i) walk.push_back(walk.back() + 1 + 0.3 * rng.normal());
    const auto o = ts::select_order({walk, "w", false});
    CHECK(o.d >= 1);
    CHECK(o.p <= ts::kMaxOrder);
    CHECK_THROWS_AS((void)(ts::ArimaOrder{0, 0, 0}.validate()), Error);
    CHECK_THROWS_AS((void)(ts::ArimaOrder{-1, 0, 1}.validate()), Error);
    const std::vector<double> few{1, 2, 3, 4};
    CHECK_THROWS_AS((void)ts::select_order({few, "s", false}), Error);
}

TEST_CASE("series tables extend by the requested steps") {
    const auto dir = testing::temp_dir("series");
    std::string text = "state,year,value\n";
    for (int y = 1994; y <= 2005; ++y) {
        text += "B," + std::to_string(y) + "," + std::to_string(2.0 + 0.1 * (y - 1994) + 0.05 * (y % 3)) + "\n";
        text += "A," + std::to_string(y) + ",3\n";
    }
    csv::write_file(dir / "s.csv", text);
    const auto table = ts::read_long_csv(dir / "s.csv");
    REQUIRE(table.size() == 2);
    CHECK(table.at("A").front().year == 1994);
    std::vector<ts::ExtensionReport> report;
    const auto ext = ts::extend(table, 6, false, &report);
    CHECK(report.size() == 2);
    for (const auto& [state, values] : ext) {
        REQUIRE(values.size() == 18);
        CHECK(values.back().year == 2011);
        CHECK(values.back().forecasted);
        CHECK_FALSE(values[11].forecasted);
        for (const auto& v : values) CHECK(std::isfinite(v.value));
    }
    for (const auto& v : ext.at("A")) CHECK(std::abs(v.value - 3.0) < 1e-8);
    CHECK(ts::long_csv(ext) == ts::long_csv(ts::extend(table, 6, false)));
}
