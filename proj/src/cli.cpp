#include "cornyield/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "cornyield/csv.hpp"
#include "cornyield/error.hpp"
#include "cornyield/metrics.hpp"
#include "cornyield/serving.hpp"
#include "cornyield/synthetic.hpp"
#include "cornyield/timeseries.hpp"
#include "cornyield/tuning_eval.hpp"

namespace cornyield::cli {

namespace fsys = std::filesystem;

std::map<std::string, double> correlation_signs(const fs::CorrelationReport& r) {
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < r.names.size(); ++i) out[r.names[i]] = r.coefficients[i];
    return out;
}

Prepared prepare(const config::PipelineConfig& cfg) {
    if (cfg.dataset.empty() || cfg.schema.empty()) fail(ErrorCode::ConfigError, "config needs data.dataset and data.schema");
    const auto schema = data::load_schema(cfg.schema);
    Prepared p;
    auto raw = data::load_csv(cfg.dataset, schema);
    if (raw.n_rows() == 0) fail(ErrorCode::EmptyDataset, cfg.dataset.string() + " has no rows");
    auto cleaned = data::clean(raw);
    spdlog::info("loaded {} rows, {} after cleaning", raw.n_rows(), cleaned.n_rows());

    if (const auto* state = schema.find(cfg.state_column); state && state->kind == data::VariableKind::categorical) {
        auto categories = state->categories;
        if (categories.empty()) {
            const auto& values = cleaned.label(cfg.state_column).values;
            categories.assign(std::set<std::string>(values.begin(), values.end()).begin(),
                              std::set<std::string>(values.begin(), values.end()).end());
        }
        cleaned = data::one_hot(cleaned, cfg.state_column, categories);
    }
    p.dataset = std::move(cleaned);
    p.correlation = fs::correlation_report(p.dataset);
    p.all_numeric = p.correlation.names;

    std::vector<std::string> chosen = cfg.features;
    if (chosen.empty()) chosen = fs::select_features(p.correlation, cfg.threshold);
    for (const auto& f : chosen)
        if (std::find(p.all_numeric.begin(), p.all_numeric.end(), f) == p.all_numeric.end())
            fail(ErrorCode::ConfigError, "selected feature '" + f + "' is not a numeric column");
    for (const auto& name : p.all_numeric)
        if (std::find(chosen.begin(), chosen.end(), name) != chosen.end()) p.selected.push_back(name);

    data::SplitSpec spec;
    const std::size_t n = p.dataset.n_rows();
    if (cfg.split.train) {
        spec = {*cfg.split.train, *cfg.split.val, *cfg.split.test, cfg.seed};
    } else {
        spec = data::SplitSpec::from_ratio(n, cfg.split.train_ratio.value_or(0.7), cfg.split.val_ratio.value_or(0.15),
                                           cfg.seed);
    }
    p.split = data::split(p.dataset, spec);
    p.layout = model::FeatureLayout::from_dataset(p.dataset, p.selected, cfg.state_column);
    p.full_layout = model::FeatureLayout::from_dataset(p.dataset, p.all_numeric, cfg.state_column);
    return p;
}

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string model;
    bool tune = false;
    std::string input;
    std::string json;
    std::string state;
    std::vector<std::string> sets;
    std::string host;
    int port = -1;
};

config::PipelineConfig load_config(const Options& o) {
    if (o.config_path.empty()) fail(ErrorCode::ConfigError, "--config is required");
    auto cfg = config::load(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out.empty()) cfg.output_dir = o.out;
    return cfg;
}

void write(const fsys::path& path, std::string_view text) {
    csv::write_file(path, text);
    spdlog::info("wrote {}", path.string());
}

fsys::path model_path(const config::PipelineConfig& cfg, std::string_view tag) {
    return cfg.output_dir / "models" / (std::string(tag) + ".json");
}

/// A --model value is a file path, or a tag whose trained file lives under the output directory.
fsys::path resolve_model(const Options& o, const config::PipelineConfig* cfg) {
    if (o.model.empty()) fail(ErrorCode::InvalidArgument, "--model is required");
    if (fsys::exists(o.model) || !cfg) return o.model;
    const auto candidate = model_path(*cfg, o.model);
    return fsys::exists(candidate) ? candidate : fsys::path(o.model);
}

std::string metrics_row_csv(const std::vector<std::pair<std::string, metrics::MetricsReport>>& rows,
                            const std::vector<std::string>& kinds) {
    csv::Writer w({"model", "kind", "rmse", "mae", "arse", "n"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& [tag, m] = rows[i];
        w.add({tag, kinds[i], csv::format_double(m.rmse), csv::format_double(m.mae), csv::format_double(m.arse),
               std::to_string(m.n)});
    }
    return w.str();
}

// ---------------------------------------------------------------------------

int cmd_synth(const Options& o, std::ostream& out) {
    synth::SynthOptions opt;
    if (o.seed) opt.seed = *o.seed;
    const fsys::path dir = o.out.empty() ? fsys::path("data/synthetic") : fsys::path(o.out);
    write(dir / "dataset.csv", synth::dataset_csv(opt));
    data::save_schema(synth::canonical_schema(), dir / "schema.yaml");
    const auto raw = synth::write_raw(dir / "raw", opt);
    out << "wrote " << (dir / "dataset.csv").string() << ", schema.yaml and " << raw.tables.size() + 2
        << " raw files\n";
    return 0;
}

int cmd_preprocess(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o);
    if (!cfg.preprocess) fail(ErrorCode::ConfigError, "config has no 'preprocess' block");
    const auto& pc = *cfg.preprocess;
    if (pc.tables.empty()) fail(ErrorCode::ConfigError, "preprocess.tables is empty");
    const auto schema = data::load_schema(cfg.schema);

    std::vector<data::Dataset> tables;
    for (const auto& t : pc.tables) {
        tables.push_back(data::load_csv(t, schema));
        if (tables.back().n_rows() == 0) fail(ErrorCode::EmptyDataset, t.string() + " has no rows");
    }
    auto merged = data::aggregate_mean(tables, pc.key);

    std::vector<ts::ExtensionReport> yield_report, area_report;
    const auto yields = ts::extend(ts::read_long_csv(pc.yield_series), pc.forecast_steps, false, &yield_report);
    const auto areas = ts::extend(ts::read_long_csv(pc.area_series), pc.forecast_steps, true, &area_report);
    const auto dir = cfg.output_dir / "preprocess";
    write(dir / "yield_series_extended.csv", ts::long_csv(yields));
    write(dir / "area_series_extended.csv", ts::long_csv(areas));
    {
        csv::Writer w({"series", "state", "p", "d", "q", "adf_p_value", "fallback"});
        auto add = [&](const char* series, const std::vector<ts::ExtensionReport>& reps) {
            for (const auto& r : reps)
                w.add({series, r.label, std::to_string(r.order.p), std::to_string(r.order.d), std::to_string(r.order.q),
                       csv::format_double(r.adf_p_value), r.fallback ? "true" : "false"});
        };
        add("yield", yield_report);
        add("area", area_report);
        write(dir / "arima_orders.csv", w.str());
    }

    // Attach state-year statistics to every record.
    const auto& states = merged.label(pc.state_column).values;
    const auto& years = merged.label(pc.year_column).values;
    const auto yield_col = merged.column_index(pc.yield_column);
    const auto area_col = merged.column_index(pc.area_column);
    auto lookup = [](const ts::SeriesTable& t, const std::string& state, const std::string& year_text) {
        int year = 0;
        const auto [ptr, ec] = std::from_chars(year_text.data(), year_text.data() + year_text.size(), year);
        if (ec != std::errc() || ptr != year_text.data() + year_text.size()) return data::kMissing;
        const auto it = t.find(state);
        if (it == t.end()) return data::kMissing;
        for (const auto& v : it->second)
            if (v.year == year) return v.value;
        return data::kMissing;
    };
    std::size_t without_statistics = 0;
    for (std::size_t r = 0; r < merged.n_rows(); ++r) {
        merged.values(r, yield_col) = lookup(yields, states[r], years[r]);
        merged.values(r, area_col) = lookup(areas, states[r], years[r]);
        if (std::isnan(merged.values(r, yield_col)) || std::isnan(merged.values(r, area_col))) ++without_statistics;
    }

    auto column_max = [&](std::size_t c) {
        double m = 0.0;
        for (std::size_t r = 0; r < merged.n_rows(); ++r)
            if (std::isfinite(merged.values(r, c))) m = std::max(m, merged.values(r, c));
        return m;
    };
    data::SmallholderScaleConfig scale;
    scale.expected_max_yield = pc.expected_max_yield;
    scale.expected_max_hectares = pc.expected_max_hectares;
    scale.original_yield = pc.original_yield.value_or(column_max(yield_col));
    scale.original_hectares = pc.original_hectares.value_or(column_max(area_col));
    for (std::size_t r = 0; r < merged.n_rows(); ++r) {
        auto& y = merged.values(r, yield_col);
        auto& h = merged.values(r, area_col);
        if (!std::isnan(y)) y = data::scale_to_smallholder(y, scale, data::ScaleTarget::yield);
        if (!std::isnan(h)) h = data::scale_to_smallholder(h, scale, data::ScaleTarget::hectare);
    }

    std::size_t incomplete = 0;
    for (std::size_t r = 0; r < merged.n_rows(); ++r) {
        const auto row = merged.values.row(r);
        bool missing = std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); });
        for (const auto& l : merged.labels) missing = missing || l.values[r].empty();
        incomplete += missing ? 1 : 0;
    }
    const auto cleaned = data::clean(merged);
    const auto& kept = cleaned.label(pc.state_column).values;
    const std::set<std::string> retained(kept.begin(), kept.end());

    write(cfg.output_dir / "preprocessed.csv", data::to_csv(cleaned));
    csv::Writer report({"metric", "value"});
    report.add({"tables", std::to_string(tables.size())});
    report.add({"rows_aggregated", std::to_string(merged.n_rows())});
    report.add({"rows_without_statistics", std::to_string(without_statistics)});
    report.add({"rows_dropped_missing", std::to_string(incomplete)});
    report.add({"rows_dropped_duplicate", std::to_string(merged.n_rows() - incomplete - cleaned.n_rows())});
    report.add({"rows_out", std::to_string(cleaned.n_rows())});
    report.add({"states_retained", std::to_string(retained.size())});
    report.add({"original_yield", csv::format_double(scale.original_yield)});
    report.add({"original_hectares", csv::format_double(scale.original_hectares)});
    write(cfg.output_dir / "preprocess_report.csv", report.str());
    out << "preprocessed " << merged.n_rows() << " records into " << cleaned.n_rows() << " rows over "
        << retained.size() << " states\n";
    return 0;
}

int cmd_select(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o);
    const auto p = prepare(cfg);
    const double threshold = cfg.features.empty() ? cfg.threshold : 0.0;
    auto text = fs::report_csv(p.correlation, threshold);
    if (!cfg.features.empty()) {
        // An explicit list decides the selected column.
        csv::Writer w({"variable", "tau", "tau_a", "rank", "selected"});
        for (std::size_t r = 0; r < p.correlation.ranking.size(); ++r) {
            const auto i = p.correlation.ranking[r];
            const bool sel = std::find(p.selected.begin(), p.selected.end(), p.correlation.names[i]) != p.selected.end();
            w.add({p.correlation.names[i], csv::format_double(p.correlation.coefficients[i]),
                   csv::format_double(p.correlation.coefficients_tau_a[i]), std::to_string(r + 1), sel ? "true" : "false"});
        }
        text = w.str();
    }
    write(cfg.output_dir / "correlation.csv", text);
    out << "selected " << p.selected.size() << " of " << p.all_numeric.size() << " variables:";
    for (const auto& s : p.selected) out << ' ' << s;
    out << '\n';
    return 0;
}

struct SplitXY {
    Matrix x;
    std::vector<double> y;
};

SplitXY xy(const model::FeatureLayout& layout, const data::Dataset& d) { return {layout.matrix(d), d.target()}; }

int cmd_train(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o);
    if (o.model.empty()) fail(ErrorCode::InvalidArgument, "--model <tag> is required");
    const auto& named = cfg.model(o.model);
    const auto p = prepare(cfg);
    const auto train = xy(p.layout, p.split.train);
    const auto val = xy(p.layout, p.split.val);
    const auto test = xy(p.layout, p.split.test);

    model::ModelSpec spec = named.spec;
    if (o.tune) {
        const auto* g = cfg.grid(named.tag);
        if (!g) fail(ErrorCode::ConfigError, "no grid configured for '" + named.tag + "'");
        const auto result = tuning::grid_search(spec, g->grid, train.x, train.y, cfg.seed);
        write(cfg.output_dir / (named.tag + "_grid.csv"), tuning::grid_csv(result));
        spec = result.best;
    }

    const auto trained = model::fit_model(spec, train.x, train.y, cfg.seed, &val.x, val.y);
    serving::ModelEnvelope env;
    env.model_tag = named.tag;
    env.layout = p.layout;
    env.model = trained;
    env.created_at = cfg.created_at;
    env.training_seed = cfg.seed;

    const auto pred = trained.predict(test.x);
    serving::TestMetrics tm;
    tm.report = metrics::arse(pred, test.y);
    for (std::size_t i = 0; i < pred.size(); ++i) tm.max_abs_residual = std::max(tm.max_abs_residual, std::abs(pred[i] - test.y[i]));
    env.test_metrics = tm;
    serving::save_model(env, model_path(cfg, named.tag));

    if (!trained.history.empty()) write(cfg.output_dir / (named.tag + "_loss.csv"), nn::loss_history_csv(trained.history));
    csv::Writer report({"split", "rmse", "mae", "arse", "n"});
    auto add = [&](const char* name, const metrics::MetricsReport& m) {
        report.add({name, csv::format_double(m.rmse), csv::format_double(m.mae), csv::format_double(m.arse),
                    std::to_string(m.n)});
    };
    add("train", metrics::arse(trained.predict(train.x), train.y));
    if (!val.y.empty()) add("val", metrics::arse(trained.predict(val.x), val.y));
    add("test", tm.report);
    write(cfg.output_dir / (named.tag + "_train_report.csv"), report.str());
    out << named.tag << ": test rmse " << csv::format_double(tm.report.rmse) << " mae "
        << csv::format_double(tm.report.mae) << " arse " << csv::format_double(tm.report.arse) << '\n';
    return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o);
    const auto p = prepare(cfg);
    std::vector<fsys::path> files;
    if (!o.model.empty()) {
        files.push_back(resolve_model(o, &cfg));
    } else {
        for (const auto& tag : cfg.evaluate_models) files.push_back(model_path(cfg, tag));
    }
    std::vector<std::pair<std::string, metrics::MetricsReport>> table;
    std::vector<std::string> kinds;
    std::vector<tuning::EvalRun> runs;
    csv::Writer ablation({"model", "variant", "rmse", "mae", "arse", "n"});
    const auto train = xy(p.layout, p.split.train);
    for (const auto& file : files) {
        const auto env = serving::load_model(file);
        if (!(env.layout == p.layout))
            fail(ErrorCode::SchemaMismatch, file.string() + " was trained on a different feature layout");
        const auto test = xy(env.layout, p.split.test);
        table.emplace_back(env.model_tag, metrics::arse(env.model.predict(test.x), test.y));
        kinds.emplace_back(model::to_string(env.model.kind()));

        const auto& named = cfg.model(env.model_tag);
        if (cfg.bootstrap_replicates > 0)
            runs.push_back(tuning::bootstrap_eval(named.spec, train.x, train.y, cfg.bootstrap_replicates, cfg.seed,
                                                  env.model_tag));
        if (cfg.ablation) {
            const auto full_train = xy(p.full_layout, p.split.train);
            const auto full_test = xy(p.full_layout, p.split.test);
            const tuning::SplitMatrices full{full_train.x, full_train.y, full_test.x, full_test.y};
            const tuning::SplitMatrices sel{train.x, train.y, test.x, test.y};
            const auto r = tuning::ablation_feature_selection(named.spec, full, sel, cfg.seed);
            auto add = [&](const char* variant, const metrics::MetricsReport& m) {
                ablation.add({env.model_tag, variant, csv::format_double(m.rmse), csv::format_double(m.mae),
                              csv::format_double(m.arse), std::to_string(m.n)});
            };
            add("with_fs", r.with_selection);
            add("without_fs", r.without_selection);
            add("delta", r.delta);
        }
        out << env.model_tag << ": rmse " << csv::format_double(table.back().second.rmse) << " mae "
            << csv::format_double(table.back().second.mae) << " arse " << csv::format_double(table.back().second.arse)
            << '\n';
    }
    const std::string suffix = o.model.empty() ? "" : "_" + table.front().first;
    write(cfg.output_dir / ("metrics" + suffix + ".csv"), metrics_row_csv(table, kinds));
    if (!runs.empty()) write(cfg.output_dir / ("bootstrap" + suffix + ".csv"), tuning::eval_csv(runs));
    if (cfg.ablation) write(cfg.output_dir / ("ablation" + suffix + ".csv"), ablation.str());
    return 0;
}

int cmd_perturb(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o);
    const auto p = prepare(cfg);
    const auto env = serving::load_model(resolve_model(o, &cfg));
    std::vector<tuning::PerturbationCase> cases = tuning::base_cases();
    for (auto& c : tuning::unforeseen_cases()) cases.push_back(std::move(c));
    const tuning::Predictor predictor = [&env](const model::Record& r, const std::string& state) {
        return env.predict(r, state);
    };
    const auto rows = tuning::single_point_eval(predictor, cases, correlation_signs(p.correlation));
    write(cfg.output_dir / (env.model_tag + "_perturb.csv"), tuning::single_point_csv(rows));
    for (const auto& r : rows) {
        out << r.label << ' ' << r.kind;
        if (!r.field.empty()) out << ' ' << r.field << '=' << csv::format_double(r.value);
        out << ": predicted " << csv::format_double(r.predicted) << " residual " << csv::format_double(r.residual);
        if (r.direction_ok) out << " direction " << (*r.direction_ok ? "ok" : "opposite");
        out << '\n';
    }
    return 0;
}

double bags_factor(const Options& o) {
    if (o.config_path.empty()) return serving::kDefaultBagsPerTonne;
    return load_config(o).bags_per_tonne;
}

std::string request_body(const Options& o) {
    if (!o.json.empty()) return o.json;
    if (!o.input.empty()) return csv::read_file(o.input);
    nlohmann::json req = nlohmann::json::object();
    if (!o.state.empty()) req["state"] = o.state;
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(ErrorCode::InvalidArgument, "--set expects name=value, got '" + s + "'");
        double v = 0.0;
        if (!csv::parse_double(std::string_view(s).substr(eq + 1), v))
            fail(ErrorCode::NonFiniteValue, "value of '" + s.substr(0, eq) + "' is not a number");
        req[s.substr(0, eq)] = v;
    }
    return req.dump();
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
    const serving::Service service(serving::load_model(resolve_model(o, nullptr)), bags_factor(o));
    const auto r = service.handle_predict(request_body(o));
    if (r.status != 200) {
        const auto j = nlohmann::json::parse(r.body);
        err << "error: " << j.at("error").get<std::string>() << ": " << j.at("message").get<std::string>() << '\n';
        return 1;
    }
    out << r.body << '\n';
    return 0;
}

int cmd_serve(const Options& o, std::ostream& out) {
    std::string host = "127.0.0.1";
    int port = 8080;
    double bags = serving::kDefaultBagsPerTonne;
    if (!o.config_path.empty()) {
        const auto cfg = load_config(o);
        host = cfg.host;
        port = cfg.port;
        bags = cfg.bags_per_tonne;
    }
    if (!o.host.empty()) host = o.host;
    if (o.port >= 0) port = o.port;
    const serving::Service service(serving::load_model(resolve_model(o, nullptr)), bags);
    serving::HttpServer server(service);
    out << "serving " << service.envelope().model_tag << " on http://" << host << ':' << port << '\n';
    out.flush();
    server.run(host, port);
    return 0;
}

void configure_logging() {
    static bool done = false;
    if (done) return;
    done = true;
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("CORNYIELD_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    configure_logging();
    CLI::App app("Corn yield modelling toolkit", "cornyield");
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", o.config_path, "Pipeline config file");
        if (needs_config) opt->required();
        sub->add_option("--seed", o.seed, "Override the config seed");
        sub->add_option("--out", o.out, "Output directory");
    };
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset and raw preprocessing inputs");
    synth->add_option("--seed", o.seed, "Generator seed");
    synth->add_option("--out", o.out, "Output directory");
    auto* preprocess = app.add_subcommand("preprocess", "Aggregate, extend, merge, scale and clean raw tables");
    common(preprocess, true);
    auto* select = app.add_subcommand("select", "Kendall correlation report and feature selection");
    common(select, true);
    auto* train = app.add_subcommand("train", "Train one model and save it");
    common(train, true);
    train->add_option("--model", o.model, "Model tag (dnnr16, dnnr64, rfr, xgbr)")->required();
    train->add_flag("--tune", o.tune, "Grid-search hyperparameters first");
    auto* evaluate = app.add_subcommand("evaluate", "Test metrics, bootstrap and ablation tables");
    common(evaluate, true);
    evaluate->add_option("--model", o.model, "Model file or tag (default: every configured model)");
    auto* perturb = app.add_subcommand("perturb", "Single-point and unforeseen-case predictions");
    common(perturb, true);
    perturb->add_option("--model", o.model, "Model file or tag")->required();
    auto* predict = app.add_subcommand("predict", "Predict one record");
    predict->add_option("--config", o.config_path, "Pipeline config (for the bags factor)");
    predict->add_option("--model", o.model, "Model file")->required();
    predict->add_option("--input", o.input, "Request JSON file");
    predict->add_option("--json", o.json, "Request JSON text");
    predict->add_option("--state", o.state, "State name");
    predict->add_option("--set", o.sets, "Field value as name=value");
    auto* serve = app.add_subcommand("serve", "HTTP prediction service");
    serve->add_option("--config", o.config_path, "Pipeline config");
    serve->add_option("--model", o.model, "Model file")->required();
    serve->add_option("--host", o.host, "Bind address");
    serve->add_option("--port", o.port, "Port");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: Usage: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*synth) return cmd_synth(o, out);
        if (*preprocess) return cmd_preprocess(o, out);
        if (*select) return cmd_select(o, out);
        if (*train) return cmd_train(o, out);
        if (*evaluate) return cmd_evaluate(o, out);
        if (*perturb) return cmd_perturb(o, out);
        if (*predict) return cmd_predict(o, out, err);
        if (*serve) return cmd_serve(o, out);
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: " << to_string(e.code()) << ": " << msg << '\n';
        return e.code() == ErrorCode::InvalidArgument ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: Internal: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace cornyield::cli
