#include <doctest.h>

#include <json.hpp>

#include "cli_support.hpp"
#include "cornyield/config.hpp"
#include "cornyield/error.hpp"
#include "cornyield/serving.hpp"
#include "support.hpp"

using namespace cornyield;
namespace fsys = std::filesystem;

namespace {

const fsys::path& workspace() {
    static const fsys::path dir = [] {
        const auto d = testing::temp_dir("cli");
        const auto r = testing::run_cli({"synth", "--out", (d / "data").string()});
        REQUIRE(r.status == 0);
        testing::write_small_config(d, "out");
        return d;
    }();
    return dir;
}

std::string cfg() { return (workspace() / "out.yaml").string(); }

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto c = config::parse(
        "seed: 3\n"
        "data: {dataset: d.csv, schema: s.yaml}\n"
        "split: {ratio: [0.8, 0.1]}\n"
        "models:\n"
        "  dnnr64: {learning_rate: 0.01}\n"
        "  wide: {kind: mlp, hidden_width: 128}\n"
        "grids:\n"
        "  xgbr: {folds: 4, params: {max_depth: [3, 6], loss: [mae, squared]}}\n",
        "/base");
    CHECK(c.seed == 3);
    CHECK(c.dataset == "/base/d.csv");
    CHECK(c.output_dir == "/base/out");
    CHECK(*c.split.train_ratio == 0.8);
    CHECK(std::get<model::MlpSpec>(c.model("dnnr64").spec).train.learning_rate == 0.01);
    CHECK(std::get<model::MlpSpec>(c.model("dnnr64").spec).architecture.hidden_width == 64);
    CHECK(std::get<model::MlpSpec>(c.model("wide").spec).architecture.hidden_width == 128);
    CHECK(std::holds_alternative<trees::BoostConfig>(c.model("xgbr").spec));
    CHECK(std::get<trees::BoostConfig>(c.model("xgbr").spec).n_estimators == 900);
    CHECK(c.grid("xgbr")->grid.combinations() == 4);
    CHECK(c.grid("rfr") == nullptr);
    CHECK(c.evaluate_models.size() == 5);

    CHECK(code_of([] { (void)config::parse("data: {}\n", "."); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { (void)config::parse("seed: 1\nmodels: {svm: {}}\n", "."); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { (void)config::parse("seed: 1\nmodels: {rfr: {bogus: 2}}\n", "."); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { (void)config::parse("seed: [1\n", "."); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { (void)config::load("/nonexistent.yaml"); }) == ErrorCode::IoError);
}

TEST_CASE("usage errors") {
    CHECK(testing::run_cli({}).status == 2);
    CHECK(testing::run_cli({"fly"}).status == 2);
    const auto r = testing::run_cli({"train", "--config", cfg(), "--model", "svm"});
    CHECK(r.status == 2);
    CHECK(r.err.rfind("error: InvalidArgument:", 0) == 0);
    CHECK(testing::run_cli({"--help"}).status == 0);
}

TEST_CASE("select writes the correlation report") {
    const auto r = testing::run_cli({"select", "--config", cfg()});
    REQUIRE(r.status == 0);
    const auto text = testing::slurp(workspace() / "out" / "correlation.csv");
    CHECK(text.rfind("variable,tau,tau_a,rank,selected\ncultivation_area_ha,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 11);
    CHECK(testing::run_cli({"select", "--config", cfg()}).out == r.out);
}

TEST_CASE("preprocess is idempotent and rejects empty tables") {
    REQUIRE(testing::run_cli({"preprocess", "--config", cfg()}).status == 0);
    const auto first = testing::slurp(workspace() / "out" / "preprocessed.csv");
    const auto report = testing::slurp(workspace() / "out" / "preprocess_report.csv");
    CHECK(report.find("states_retained,23\n") != std::string::npos);
    REQUIRE(testing::run_cli({"preprocess", "--config", cfg()}).status == 0);
    CHECK(testing::slurp(workspace() / "out" / "preprocessed.csv") == first);

    const auto dir = workspace() / "empty";
    fsys::create_directories(dir / "data" / "raw");
    for (const char* f : {"schema.yaml", "raw/yield_series.csv", "raw/area_series.csv", "raw/observations_r2.csv",
                          "raw/observations_r3.csv", "raw/observations_r4.csv"})
        fsys::copy_file(workspace() / "data" / f, dir / "data" / f, fsys::copy_options::overwrite_existing);
    const auto header = testing::slurp(workspace() / "data" / "raw" / "observations_r1.csv");
    csv::write_file(dir / "data" / "raw" / "observations_r1.csv", header.substr(0, header.find('\n') + 1));
    const auto r = testing::run_cli({"preprocess", "--config", testing::write_small_config(dir, "out").string()});
    CHECK(r.status != 0);
    CHECK(r.err.rfind("error: EmptyDataset:", 0) == 0);
}

TEST_CASE("train, evaluate, perturb and predict") {
    const auto out = workspace() / "out";
    for (const char* tag : {"rfr", "xgbr", "dnnr16"}) REQUIRE(testing::run_cli({"train", "--config", cfg(), "--model", tag}).status == 0);
    const auto model_text = testing::slurp(out / "models" / "rfr.json");
    REQUIRE(testing::run_cli({"train", "--config", cfg(), "--model", "rfr"}).status == 0);
    CHECK(testing::slurp(out / "models" / "rfr.json") == model_text);
    CHECK(testing::slurp(out / "dnnr16_loss.csv").rfind("epoch,train_mae,val_mae\n1,", 0) == 0);

    REQUIRE(testing::run_cli({"train", "--config", cfg(), "--model", "rfr", "--tune"}).status == 0);
    CHECK(fsys::exists(out / "rfr_grid.csv"));
    const auto tuned = nlohmann::json::parse(testing::slurp(out / "models" / "rfr.json"));
    CHECK(tuned["payload"]["config"]["max_depth"] == 10);

    const auto ev = testing::run_cli({"evaluate", "--config", cfg(), "--model", "xgbr"});
    REQUIRE(ev.status == 0);
    const auto metrics_rows = csv::parse(testing::slurp(out / "metrics_xgbr.csv"));
    REQUIRE(metrics_rows.size() == 2);
    double rmse = 0, mae = 0, arse = 0;
    REQUIRE(csv::parse_double(metrics_rows[1][2], rmse));
    REQUIRE(csv::parse_double(metrics_rows[1][3], mae));
    REQUIRE(csv::parse_double(metrics_rows[1][4], arse));
    CHECK(arse == (rmse + mae) / 2);
    CHECK(csv::parse(testing::slurp(out / "bootstrap_xgbr.csv")).size() == 4);
    CHECK(csv::parse(testing::slurp(out / "ablation_xgbr.csv")).size() == 4);

    const auto missing = testing::run_cli({"evaluate", "--config", cfg(), "--model", "/nonexistent/m.json"});
    CHECK(missing.status == 1);
    CHECK(missing.err.rfind("error: IoError:", 0) == 0);

    REQUIRE(testing::run_cli({"perturb", "--config", cfg(), "--model", "dnnr16"}).status == 0);
    const auto rows = csv::parse(testing::slurp(out / "dnnr16_perturb.csv"));
    REQUIRE(rows.size() == 7);
    for (std::size_t i = 3; i < 7; ++i) CHECK(!rows[i][10].empty());

    const std::string model_file = (out / "models" / "xgbr.json").string();
    const std::string req =
        R"({"state":"Plateau","avg_min_temp_c":16.68546347,"avg_precip_mm":99.125,"avg_wind_ms":2.417177081,)"
        R"("soil_ph":5.566666667,"sand_pct":35.5,"silt_pct":27.33333333,"cultivation_area_ha":1.686767501})";
    const auto p = testing::run_cli({"predict", "--model", model_file, "--json", req});
    REQUIRE(p.status == 0);
    const serving::Service service(serving::load_model(model_file));
    CHECK(p.out == service.handle_predict(req).body + "\n");
    CHECK(testing::run_cli({"predict", "--model", model_file, "--json", req}).out == p.out);

    const auto flags = testing::run_cli({"predict", "--model", model_file, "--state", "Plateau", "--set",
                                         "avg_min_temp_c=16.68546347", "--set", "avg_precip_mm=99.125", "--set",
                                         "avg_wind_ms=2.417177081", "--set", "soil_ph=5.566666667", "--set",
                                         "sand_pct=35.5", "--set", "silt_pct=27.33333333", "--set",
                                         "cultivation_area_ha=1.686767501"});
    CHECK(flags.out == p.out);
    const auto partial = testing::run_cli({"predict", "--model", model_file, "--state", "Plateau"});
    CHECK(partial.status == 1);
    CHECK(partial.err.find("MissingField") != std::string::npos);
    CHECK(partial.err.find("avg_min_temp_c") != std::string::npos);
}

TEST_CASE("seed override changes the model") {
    const auto a = testing::run_cli({"train", "--config", cfg(), "--model", "dnnr16", "--out",
                                     (workspace() / "seed_a").string(), "--seed", "1"});
    const auto b = testing::run_cli({"train", "--config", cfg(), "--model", "dnnr16", "--out",
                                     (workspace() / "seed_b").string(), "--seed", "2"});
    REQUIRE(a.status == 0);
    REQUIRE(b.status == 0);
    CHECK(testing::slurp(workspace() / "seed_a" / "models" / "dnnr16.json") !=
          testing::slurp(workspace() / "seed_b" / "models" / "dnnr16.json"));
}
