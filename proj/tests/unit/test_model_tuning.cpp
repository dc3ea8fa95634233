#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cornyield/error.hpp"
#include "cornyield/tuning_eval.hpp"
#include "fixture.hpp"
#include "support.hpp"

using namespace cornyield;

namespace {

model::MlpSpec tiny_mlp() {
    model::MlpSpec s{nn::MlpArchitecture::dnnr16(), {}};
    s.train.epochs = 5;
    return s;
}

trees::ForestConfig small_forest() {
    trees::ForestConfig f;
    f.n_estimators = 5;
    f.max_depth = 6;
    return f;
}

double x_weight(const Matrix& x, std::size_t r) { return 2 * x(r, 0) - x(r, 1) + 0.5 * x(r, 2); }

struct Linear {
    Matrix x;
    std::vector<double> y;
};

Linear linear_data(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Linear d{testing::random_matrix(n, 3, rng), {}};
    for (std::size_t r = 0; r < n; ++r) d.y.push_back(x_weight(d.x, r));
    return d;
}

}  // namespace

TEST_CASE("synthetic table shape") {
    const auto& d = testing::synthetic_table();
    CHECK(d.n_rows() == 1632);
    const auto layout = testing::synthetic_layout();
    CHECK(layout.width() == 30);
    CHECK(layout.states.size() == 23);
    CHECK(layout.column_names()[7] == "state=Abia");
    const auto x = layout.matrix(d);
    CHECK(x.cols() == 30);
    CHECK(x.rows() == 1632);
}

TEST_CASE("feature layout assembles records") {
    const auto layout = testing::synthetic_layout();
    const auto c = tuning::base_cases()[0];
    const auto row = layout.assemble(c.base, "Enugu");
    CHECK(row.size() == 30);
    CHECK(row[1] == 133.5208333);
    double hot = 0;
    for (std::size_t i = 7; i < 30; ++i) hot += row[i];
    CHECK(hot == 1.0);
    CHECK(row[7 + 11] == 1.0);

    auto missing = c.base;
    missing.erase("silt_pct");
    try {
        (void)layout.assemble(missing, "Enugu");
        FAIL("expected MissingField");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingField);
        CHECK(std::string(e.what()).find("silt_pct") != std::string::npos);
    }
    CHECK_THROWS_AS((void)layout.assemble(c.base, "Atlantis"), Error);
    auto inf = c.base;
    inf["soil_ph"] = INFINITY;
    CHECK_THROWS_AS((void)layout.assemble(inf, "Enugu"), Error);
}

TEST_CASE("fit_model on each family") {
    const auto d = linear_data(300, 1);
    for (const model::ModelSpec& spec :
         {model::ModelSpec{tiny_mlp()}, model::ModelSpec{small_forest()}, model::ModelSpec{trees::BoostConfig{20, 4}}}) {
        const auto m = model::fit_model(spec, d.x, d.y, 3);
        CHECK(m.kind() == model::kind_of(spec));
        CHECK(m.input_width() == 3);
        const auto p = m.predict(d.x);
        CHECK(p.size() == 300);
        CHECK(p[4] == m.predict_one(d.x.row(4)));
        const auto again = model::fit_model(spec, d.x, d.y, 3);
        CHECK(again.predict(d.x) == p);
    }
    CHECK(model::parse_model_kind("boost") == model::ModelKind::boost);
    CHECK_THROWS_AS((void)model::parse_model_kind("svm"), Error);
}

TEST_CASE("grid parameters and cells") {
    model::ModelSpec spec = tiny_mlp();
    tuning::set_param(spec, "hidden_width", std::int64_t{32});
    tuning::set_param(spec, "learning_rate", 0.01);
    tuning::set_param(spec, "optimizer", std::string("sgd"));
    const auto& mlp = std::get<model::MlpSpec>(spec);
    CHECK(mlp.architecture.hidden_width == 32);
    CHECK(mlp.train.learning_rate == 0.01);
    CHECK(mlp.train.optimizer == nn::Optimizer::sgd);
    CHECK_THROWS_AS((void)tuning::set_param(spec, "n_estimators", std::int64_t{3}), Error);
    CHECK_THROWS_AS((void)tuning::set_param(spec, "hidden_width", std::string("wide")), Error);

    tuning::GridSpec g;
    g.params = {{"a", {std::int64_t{1}, std::int64_t{2}}}, {"b", {0.5, 1.5, 2.5}}};
    CHECK(g.combinations() == 6);
    const auto c = g.cell(1);
    CHECK(std::get<std::int64_t>(c[0].second) == 1);
    CHECK(std::get<double>(c[1].second) == 1.5);
    tuning::GridSpec empty;
    CHECK_THROWS_AS((void)empty.validate(), Error);
}

TEST_CASE("grid search picks the better configuration") {
    const auto d = linear_data(200, 2);
    tuning::GridSpec g;
    g.folds = 3;
    g.params = {{"max_depth", {std::int64_t{1}, std::int64_t{8}}}};
    const auto r = tuning::grid_search(model::ModelSpec{small_forest()}, g, d.x, d.y, 4);
    CHECK(r.cells.size() == 2);
    CHECK(r.best_index == 1);
    CHECK(std::get<trees::ForestConfig>(r.best).max_depth == 8);
    CHECK(tuning::grid_csv(r).rfind("cell,max_depth,mean_mae", 0) == 0);

    g.params = {{"max_depth", {std::int64_t{4}}}};
    CHECK(tuning::grid_search(model::ModelSpec{small_forest()}, g, d.x, d.y, 4).best_index == 0);

    g.params = {{"max_depth", {std::int64_t{4}, std::int64_t{4}}}};
    CHECK(tuning::grid_search(model::ModelSpec{small_forest()}, g, d.x, d.y, 4).best_index == 0);
}

TEST_CASE("k-fold indices partition the rows") {
    const auto folds = tuning::kfold_indices(103, 10, 7);
    REQUIRE(folds.size() == 10);
    std::set<std::size_t> all;
    for (const auto& f : folds) {
        CHECK((f.size() == 10 || f.size() == 11));
        all.insert(f.begin(), f.end());
    }
    CHECK(all.size() == 103);
    CHECK(tuning::kfold_indices(103, 10, 7) == folds);
    CHECK_THROWS_AS((void)tuning::kfold_indices(5, 10, 1), Error);
    CHECK_THROWS_AS((void)tuning::kfold_indices(5, 1, 1), Error);
}

TEST_CASE("k-fold and bootstrap evaluation") {
    const auto d = linear_data(120, 3);
    const auto k = tuning::kfold_cv(model::ModelSpec{small_forest()}, d.x, d.y, 4, 1, "rfr");
    CHECK(k.splits.size() == 4);
    std::size_t total = 0;
    for (const auto& m : k.splits) total += m.n;
    CHECK(total == 120);

    const auto b = tuning::bootstrap_eval(model::ModelSpec{small_forest()}, d.x, d.y, 10, 5, "rfr");
    REQUIRE(b.splits.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(b.resample_sizes[i] == 120);
        CHECK(b.splits[i].n > 0);
        CHECK(b.splits[i].n < 120);
        CHECK(b.splits[i].arse == metrics::arse_of(b.splits[i].rmse, b.splits[i].mae));
    }
    CHECK(tuning::eval_csv({b}) == tuning::eval_csv({tuning::bootstrap_eval(model::ModelSpec{small_forest()}, d.x,
                                                                            d.y, 10, 5, "rfr")}));
    CHECK_THROWS_AS((void)tuning::bootstrap_eval(model::ModelSpec{small_forest()}, d.x, d.y, 0, 5), Error);
}

TEST_CASE("perturbation cases") {
    const auto base = tuning::base_cases();
    REQUIRE(base.size() == 2);
    CHECK(base[0].expected == 0.709388681);
    CHECK(base[1].expected == 2.60302342);
    const auto unforeseen = tuning::unforeseen_cases();
    REQUIRE(unforeseen.size() == 4);
    CHECK(unforeseen[0].view().at("avg_precip_mm") == 13.5208333);
    CHECK(unforeseen[3].view().at("silt_pct") == 50.33333333);
    CHECK(unforeseen[3].view().at("soil_ph") == base[1].base.at("soil_ph"));
}

TEST_CASE("single-point evaluation with an oracle predictor") {
    const tuning::Predictor truth = [](const model::Record& r, const std::string& state) {
        return synth::true_yield(r, state);
    };
    auto cases = tuning::base_cases();
    for (auto& c : tuning::unforeseen_cases()) cases.push_back(c);
    const std::map<std::string, double> signs{{"avg_precip_mm", -0.2}, {"silt_pct", 0.16}};
    const auto rows = tuning::single_point_eval(truth, cases, signs);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].kind == "base");
    CHECK(rows[0].residual < 1e-9);
    CHECK(rows[1].residual < 1e-9);
    CHECK_FALSE(rows[0].direction_ok.has_value());
    for (std::size_t i = 2; i < 6; ++i) {
        CHECK(rows[i].kind == "unforeseen");
        REQUIRE(rows[i].direction_ok.has_value());
        CHECK(*rows[i].direction_ok);
        CHECK(rows[i].changed);
    }
    const tuning::Predictor constant = [](const model::Record&, const std::string&) { return 1.0; };
    const auto flat = tuning::single_point_eval(constant, cases, signs);
    CHECK_FALSE(flat[2].changed);
    CHECK_FALSE(*flat[2].direction_ok);
    const auto text = tuning::single_point_csv(rows);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
}

TEST_CASE("ablation reports both variants") {
    const auto d = linear_data(200, 9);
    Rng rng(1);
    Matrix wide(200, 5);
    for (std::size_t r = 0; r < 200; ++r) {
        for (std::size_t c = 0; c < 3; ++c) wide(r, c) = d.x(r, c);
        wide(r, 3) = rng.uniform();
        wide(r, 4) = rng.uniform();
    }
    std::vector<std::size_t> train(150), test(50);
    std::iota(train.begin(), train.end(), 0);
    std::iota(test.begin(), test.end(), 150);
    auto pick = [&](const Matrix& x) {
        return tuning::SplitMatrices{x.select_rows(train), {d.y.begin(), d.y.begin() + 150}, x.select_rows(test),
                                     {d.y.begin() + 150, d.y.end()}};
    };
    const auto r = tuning::ablation_feature_selection(model::ModelSpec{small_forest()}, pick(wide), pick(d.x), 2);
    CHECK(r.with_selection.n == 50);
    CHECK(r.delta.arse == doctest::Approx(r.with_selection.arse - r.without_selection.arse));
}
