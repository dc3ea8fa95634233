#include <doctest.h>

#include <cmath>

#include "cornyield/ensembles.hpp"
#include "cornyield/error.hpp"
#include "cornyield/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cornyield;

namespace {

Matrix column_matrix(const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

}  // namespace

TEST_CASE("depth-1 split on four points") {
    const auto x = column_matrix({1, 2, 3, 4});
    const std::vector<double> y{0, 0, 10, 10};
    const auto t = trees::fit_tree(x, y, {1, 2, 1, 0});
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold == 2.5);
    CHECK(t.nodes[t.nodes[0].left].value == 0.0);
    CHECK(t.nodes[t.nodes[0].right].value == 10.0);
    const auto s = oracle::best_stump(x.column(0), y);
    CHECK(s.threshold == t.nodes[0].threshold);
}

TEST_CASE("stumps match exhaustive search on random data") {
    Rng rng(4);
    for (int k = 0; k < 50; ++k) {
        const auto xs = testing::random_vector(20, rng);
        const auto y = testing::random_vector(20, rng, -5, 5);
        const auto t = trees::fit_tree(column_matrix(xs), y, {1, 2, 1, 0});
        const auto s = oracle::best_stump(xs, y);
        REQUIRE(t.nodes.size() == 3);
        CHECK(t.nodes[0].threshold == doctest::Approx(s.threshold));
        CHECK(t.nodes[t.nodes[0].left].value == doctest::Approx(s.left));
        CHECK(t.nodes[t.nodes[0].right].value == doctest::Approx(s.right));
    }
}

TEST_CASE("tree limits") {
    Rng rng(5);
    const auto x = testing::random_matrix(200, 3, rng);
    const auto y = testing::random_vector(200, rng);
    const auto deep = trees::fit_tree(x, y, {30, 2, 1, 0});
    CHECK(deep.leaf_count() == 200);
    for (std::size_t r = 0; r < 200; ++r) CHECK(deep.predict(x.row(r)) == y[r]);
    const auto shallow = trees::fit_tree(x, y, {3, 2, 1, 0});
    CHECK(shallow.depth() <= 3);
    CHECK(shallow.leaf_count() <= 8);
    const auto leafy = trees::fit_tree(x, y, {30, 2, 20, 0});
    for (std::size_t r = 0; r < 200; ++r) CHECK(leafy.leaf_of(x.row(r)) >= 0);
    CHECK(leafy.leaf_count() <= 10);
    const std::vector<double> flat(200, 1.5);
    CHECK(trees::fit_tree(x, flat, {}).nodes.size() == 1);
    CHECK(deep.validate() < 3);
}

TEST_CASE("single-tree forest without bootstrap equals fit_tree") {
    Rng rng(6);
    const auto x = testing::random_matrix(120, 4, rng);
    const auto y = testing::random_vector(120, rng);
    trees::ForestConfig cfg;
    cfg.n_estimators = 1;
    cfg.bootstrap = false;
    cfg.feature_subsample = 1.0;
    const auto f = trees::fit_forest(x, y, cfg, 3);
    const auto t = trees::fit_tree(x, y, {cfg.max_depth, cfg.min_samples_split, cfg.min_samples_leaf, 0});
    CHECK(f.trees.front() == t);
}

TEST_CASE("forest prediction is the mean of its trees") {
    Rng rng(7);
    const auto x = testing::random_matrix(150, 5, rng);
    const auto y = testing::random_vector(150, rng);
    const auto f = trees::fit_forest(x, y, {}, 11);
    REQUIRE(f.trees.size() == 10);
    for (int k = 0; k < 200; ++k) {
        const auto row = testing::random_vector(5, rng, -0.5, 1.5);
        double s = 0;
        for (const auto& t : f.trees) s += t.predict(row);
        CHECK(trees::predict_forest(f, row) == doctest::Approx(s / 10.0).epsilon(1e-14));
    }
    const auto again = trees::fit_forest(x, y, {}, 11);
    CHECK(again.trees == f.trees);
    CHECK_FALSE(trees::fit_forest(x, y, {}, 12).trees == f.trees);
}

TEST_CASE("piecewise constancy under small perturbations") {
    const auto x = column_matrix({1, 2, 3, 4, 5, 6});
    const std::vector<double> y{1, 1, 2, 2, 3, 3};
    const auto t = trees::fit_tree(x, y, {});
    const std::vector<double> a{2.1}, b{2.4};
    CHECK(t.predict(a) == t.predict(b));
}

TEST_CASE("boosting training MAE never increases") {
    Rng rng(8);
    const auto x = testing::random_matrix(300, 4, rng);
    std::vector<double> y(300);
    for (std::size_t r = 0; r < 300; ++r) y[r] = 3 * x(r, 0) + std::sin(6 * x(r, 1)) + 0.1 * rng.normal();
    for (const auto loss : {trees::BoostLoss::mae, trees::BoostLoss::squared}) {
        trees::BoostConfig cfg;
        cfg.n_estimators = 50;
        cfg.max_depth = 3;
        cfg.loss = loss;
        std::vector<double> trace;
        const auto m = trees::fit_boost_traced(x, y, cfg, 1, trace);
        REQUIRE(trace.size() == 51);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
        CHECK(trace.back() < trace.front());
        std::vector<double> pred;
        for (std::size_t r = 0; r < 300; ++r) pred.push_back(trees::predict_boost(m, x.row(r)));
        CHECK(metrics::mae(pred, y) == doctest::Approx(trace.back()).epsilon(1e-12));
    }
}

TEST_CASE("boosting replays as base plus scaled trees") {
    Rng rng(9);
    const auto x = testing::random_matrix(100, 3, rng);
    const auto y = testing::random_vector(100, rng);
    trees::BoostConfig cfg;
    cfg.n_estimators = 20;
    cfg.subsample = 0.5;
    const auto m = trees::fit_boost(x, y, cfg, 2);
    CHECK(m.trees.size() == 20);
    for (std::size_t r = 0; r < 10; ++r) {
        double acc = m.base_prediction;
        for (const auto& t : m.trees) acc += cfg.learning_rate * t.predict(x.row(r));
        CHECK(trees::predict_boost(m, x.row(r)) == acc);
    }
    CHECK(trees::fit_boost(x, y, cfg, 2).trees == m.trees);
}

TEST_CASE("ensemble config validation") {
    trees::ForestConfig f;
    f.feature_subsample = 0;
    CHECK_THROWS_AS((void)f.validate(), Error);
    trees::BoostConfig b;
    b.subsample = 1.5;
    CHECK_THROWS_AS((void)b.validate(), Error);
    b = {};
    b.reg_lambda = -1;
    CHECK_THROWS_AS((void)b.validate(), Error);
}
