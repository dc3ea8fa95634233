#include <doctest.h>

#include <cmath>
#include <thread>

#include "cornyield/error.hpp"
#include "cornyield/serving.hpp"
#include "cornyield/tuning_eval.hpp"
#include "fixture.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace cornyield;
using nlohmann::json;

namespace {

serving::ModelEnvelope envelope_for(const model::ModelSpec& spec, std::string tag) {
    const auto layout = testing::synthetic_layout();
    const auto& d = testing::synthetic_table();
    serving::ModelEnvelope env;
    env.model_tag = std::move(tag);
    env.layout = layout;
    env.model = model::fit_model(spec, layout.matrix(d), d.target(), 42);
    env.training_seed = 42;
    env.test_metrics = serving::TestMetrics{{0.1, 0.05, 0.075, 245}, 0.3};
    return env;
}

const serving::ModelEnvelope& forest_env() {
    static const auto env = [] {
        trees::ForestConfig f;
        f.n_estimators = 4;
        return envelope_for(f, "rfr");
    }();
    return env;
}

json random_request(Rng& rng, const model::FeatureLayout& layout) {
    json j;
    j["state"] = layout.states[rng.index(layout.states.size())];
    for (const auto& f : layout.numeric_features) j[f] = rng.uniform(0.0, 100.0);
    return j;
}

json enugu_request() {
    json j;
    j["state"] = "Enugu";
    const auto cases = tuning::base_cases();
    for (const auto& [k, v] : cases[0].base) j[k] = v;
    return j;
}

}  // namespace

TEST_CASE("round trip reproduces predictions for every model kind") {
    model::MlpSpec mlp{nn::MlpArchitecture::dnnr16(), {}};
    mlp.train.epochs = 3;
    trees::BoostConfig boost;
    boost.n_estimators = 10;
    for (const auto& env : {envelope_for(mlp, "dnnr16"), forest_env(), envelope_for(boost, "xgbr")}) {
        const auto text = serving::serialize(env);
        const auto back = serving::parse(text);
        CHECK(serving::serialize(back) == text);
        CHECK(back.model_tag == env.model_tag);
        CHECK(back.layout == env.layout);
        CHECK(back.test_metrics->max_abs_residual == 0.3);
        Rng rng(1);
        for (int i = 0; i < 100; ++i) {
            const auto req = random_request(rng, env.layout);
            model::Record r;
            for (const auto& f : env.layout.numeric_features) r[f] = req[f].get<double>();
            const auto state = req["state"].get<std::string>();
            CHECK(back.predict(r, state) == env.predict(r, state));
        }
    }
}

TEST_CASE("model file errors") {
    const auto dir = testing::temp_dir("model_files");
    serving::save_model(forest_env(), dir / "m.json");
    CHECK(serving::serialize(serving::load_model(dir / "m.json")) == serving::serialize(forest_env()));

    auto j = serving::to_json(forest_env());
    j["format_version"] = 99;
    try {
        (void)serving::from_json(j);
        FAIL("expected VersionMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::VersionMismatch);
    }
    const auto text = serving::serialize(forest_env());
    try {
        (void)serving::parse(text.substr(0, text.size() / 2));
        FAIL("expected CorruptFile");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CorruptFile);
    }
    auto bad = serving::to_json(forest_env());
    bad["states"].erase(0);
    CHECK_THROWS_AS((void)serving::from_json(bad), Error);
    CHECK_THROWS_AS((void)serving::load_model(dir / "missing.json"), Error);
}

TEST_CASE("predict handler") {
    const serving::Service s(forest_env(), 10.0);
    const auto r = s.handle_predict(enugu_request().dump());
    REQUIRE(r.status == 200);
    const auto j = json::parse(r.body);
    CHECK(j["yield_bags_per_ha"].get<double>() == j["yield_t_per_ha"].get<double>() * 10.0);
    CHECK(j["model_kind"] == "forest");
    CHECK(j["format_version"] == 1);
    CHECK(std::abs(j["yield_t_per_ha"].get<double>() - 0.709388681) < 0.5);
    CHECK(s.handle_predict(enugu_request().dump()).body == r.body);

    auto atlantis = enugu_request();
    atlantis["state"] = "Atlantis";
    const auto e = s.handle_predict(atlantis.dump());
    CHECK(e.status == 400);
    CHECK(json::parse(e.body)["error"] == "UnknownState");

    auto missing = enugu_request();
    missing.erase("silt_pct");
    const auto m = s.handle_predict(missing.dump());
    CHECK(m.status == 400);
    CHECK(json::parse(m.body)["message"].get<std::string>().find("silt_pct") != std::string::npos);

    auto extra = enugu_request();
    extra["rainfall"] = 3;
    CHECK(s.handle_predict(extra.dump()).status == 422);

    auto text = enugu_request();
    text["soil_ph"] = "acidic";
    CHECK(s.handle_predict(text.dump()).status == 400);
    CHECK(s.handle_predict("{not json").status == 400);

    auto far = enugu_request();
    far["avg_precip_mm"] = 5000.0;
    CHECK(s.handle_predict(far.dump()).status == 200);
}

TEST_CASE("what-if handler") {
    const serving::Service s(forest_env());
    json req{{"base", enugu_request()}};
    auto r = s.handle_whatif(req.dump());
    REQUIRE(r.status == 200);
    auto list = json::parse(r.body);
    REQUIRE(list.size() == 1);
    CHECK(list[0].dump() == s.handle_predict(enugu_request().dump()).body);

    req["perturbations"] = json::array({{{"field", "avg_precip_mm"}, {"value", 13.5208333}},
                                        {{"field", "bogus"}, {"value", 1}},
                                        {{"field", "silt_pct"}, {"value", 27.1666667}}});
    r = s.handle_whatif(req.dump());
    REQUIRE(r.status == 200);
    list = json::parse(r.body);
    REQUIRE(list.size() == 4);
    CHECK(list[1]["field"] == "avg_precip_mm");
    CHECK(list[1]["value"] == 13.5208333);
    CHECK(list[2]["status"] == 422);
    CHECK(list[3]["field"] == "silt_pct");
    auto scenario = enugu_request();
    scenario["avg_precip_mm"] = 13.5208333;
    CHECK(list[1]["yield_t_per_ha"] == json::parse(s.handle_predict(scenario.dump()).body)["yield_t_per_ha"]);
    CHECK(s.handle_whatif("{}").status == 400);
}

TEST_CASE("health handler") {
    const serving::Service s(forest_env());
    const auto a = json::parse(s.handle_health().body);
    const auto b = json::parse(s.handle_health().body);
    CHECK(s.handle_health().status == 200);
    CHECK(a["status"] == "ok");
    CHECK(a["model_kind"] == "forest");
    CHECK(a["states"].size() == 23);
    auto sa = a, sb = b;
    sa.erase("uptime_s");
    sb.erase("uptime_s");
    CHECK(sa == sb);
}

TEST_CASE("http server end to end") {
    const serving::Service s(forest_env());
    serving::HttpServer server(s);
    const int port = server.start("127.0.0.1", 0);
    REQUIRE(port > 0);
    httplib::Client client("127.0.0.1", port);
    const auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Content-Type").find("application/json") == 0);

    Rng rng(3);
    std::vector<std::thread> threads;
    std::vector<int> ok(4, 0);
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            httplib::Client c("127.0.0.1", port);
            for (int i = 0; i < 5; ++i) {
                const auto r = c.Post("/predict", enugu_request().dump(), "application/json");
                if (r && r->status == 200 && r->body == s.handle_predict(enugu_request().dump()).body) ++ok[t];
            }
        });
    for (auto& th : threads) th.join();
    for (int v : ok) CHECK(v == 5);

    const auto bad = client.Post("/predict", "{\"state\":\"Atlantis\"}", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    const auto w = client.Post("/whatif", json{{"base", enugu_request()}}.dump(), "application/json");
    REQUIRE(w);
    CHECK(w->status == 200);
    const auto nf = client.Get("/nowhere");
    REQUIRE(nf);
    CHECK(nf->status == 404);
    server.stop();
}
