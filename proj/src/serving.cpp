#include "cornyield/serving.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "cornyield/csv.hpp"
#include "cornyield/error.hpp"

namespace cornyield::serving {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Envelope

namespace {

json tree_to_json(const trees::Tree& t, int i = 0) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return json{{"value", n.value}};
    return json{{"feature", n.feature},
                {"threshold", n.threshold},
                {"left", tree_to_json(t, n.left)},
                {"right", tree_to_json(t, n.right)}};
}

int tree_from_json(const json& j, trees::Tree& t) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (j.contains("value") && !j.contains("feature")) {
        t.nodes[id].value = j.at("value").get<double>();
        return id;
    }
    const int feature = j.at("feature").get<int>();
    if (feature < 0) fail(ErrorCode::CorruptFile, "negative split feature");
    t.nodes[id].feature = feature;
    t.nodes[id].threshold = j.at("threshold").get<double>();
    const int left = tree_from_json(j.at("left"), t);
    const int right = tree_from_json(j.at("right"), t);
    t.nodes[id].left = left;
    t.nodes[id].right = right;
    return id;
}

json trees_to_json(const std::vector<trees::Tree>& ts) {
    json a = json::array();
    for (const auto& t : ts) a.push_back(tree_to_json(t));
    return a;
}

std::vector<trees::Tree> trees_from_json(const json& a, std::size_t width) {
    std::vector<trees::Tree> out;
    for (const auto& j : a) {
        trees::Tree t;
        tree_from_json(j, t);
        if (t.validate() >= static_cast<int>(width)) fail(ErrorCode::CorruptFile, "tree splits on a missing feature");
        out.push_back(std::move(t));
    }
    return out;
}

json mlp_to_json(const nn::MlpModel& m) {
    const auto& a = m.architecture;
    json layers = json::array();
    for (const auto& l : m.layers) {
        json w = json::array();
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) row.push_back(l.weights(r, c));
            w.push_back(std::move(row));
        }
        json b = json::array();
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) b.push_back(l.bias(r));
        layers.push_back({{"weights", std::move(w)}, {"bias", std::move(b)}});
    }
    return {{"architecture",
             {{"input_width", a.input_width},
              {"hidden_depth", a.hidden_depth},
              {"hidden_width", a.hidden_width},
              {"activation", "relu"},
              {"output_width", a.output_width}}},
            {"layers", std::move(layers)}};
}

nn::MlpModel mlp_from_json(const json& j) {
    nn::MlpModel m;
    const auto& a = j.at("architecture");
    m.architecture.input_width = a.at("input_width").get<int>();
    m.architecture.hidden_depth = a.at("hidden_depth").get<int>();
    m.architecture.hidden_width = a.at("hidden_width").get<int>();
    m.architecture.output_width = a.at("output_width").get<int>();
    if (a.at("activation").get<std::string>() != "relu") fail(ErrorCode::CorruptFile, "unsupported activation");
    for (const auto& l : j.at("layers")) {
        const auto& w = l.at("weights");
        const auto& b = l.at("bias");
        nn::Layer layer;
        const auto rows = static_cast<Eigen::Index>(w.size());
        const auto cols = rows > 0 ? static_cast<Eigen::Index>(w.at(0).size()) : 0;
        layer.weights.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (static_cast<Eigen::Index>(w.at(r).size()) != cols) fail(ErrorCode::CorruptFile, "ragged weight matrix");
            for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w.at(r).at(c).get<double>();
        }
        layer.bias.resize(static_cast<Eigen::Index>(b.size()));
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = b.at(r).get<double>();
        m.layers.push_back(std::move(layer));
    }
    if (static_cast<int>(m.layers.size()) != m.architecture.hidden_depth + 1)
        fail(ErrorCode::CorruptFile, "layer count does not match the architecture");
    try {
        m.check();
    } catch (const Error& e) {
        fail(ErrorCode::CorruptFile, e.what());
    }
    return m;
}

json forest_config_json(const trees::ForestConfig& c) {
    return {{"n_estimators", c.n_estimators},         {"max_depth", c.max_depth},
            {"min_samples_split", c.min_samples_split}, {"min_samples_leaf", c.min_samples_leaf},
            {"bootstrap", c.bootstrap},               {"feature_subsample", c.feature_subsample}};
}

json boost_config_json(const trees::BoostConfig& c) {
    return {{"n_estimators", c.n_estimators},
            {"max_depth", c.max_depth},
            {"learning_rate", c.learning_rate},
            {"min_samples_split_fraction", c.min_samples_split_fraction},
            {"subsample", c.subsample},
            {"reg_lambda", c.reg_lambda},
            {"reg_alpha", c.reg_alpha},
            {"loss", c.loss == trees::BoostLoss::mae ? "mae" : "squared"}};
}

json payload_json(const model::TrainedModel& m) {
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, nn::MlpModel>) {
                return mlp_to_json(x);
            } else if constexpr (std::is_same_v<T, trees::ForestModel>) {
                return {{"config", forest_config_json(x.config)},
                        {"seed", x.seed},
                        {"n_features", x.n_features},
                        {"trees", trees_to_json(x.trees)}};
            } else {
                return {{"config", boost_config_json(x.config)},
                        {"seed", x.seed},
                        {"n_features", x.n_features},
                        {"base_prediction", x.base_prediction},
                        {"trees", trees_to_json(x.trees)}};
            }
        },
        m.model);
}

json metrics_json(const TestMetrics& t) {
    return {{"rmse", t.report.rmse},
            {"mae", t.report.mae},
            {"arse", t.report.arse},
            {"n", t.report.n},
            {"max_abs_residual", t.max_abs_residual}};
}

}  // namespace

void ModelEnvelope::check() const {
    const std::size_t width = layout.width();
    if (model.norm.width() != width)
        fail(ErrorCode::CorruptFile, "normalizer width " + std::to_string(model.norm.width()) +
                                         " does not match " + std::to_string(width) + " declared inputs");
    const std::size_t model_width = std::visit(
        [](const auto& x) -> std::size_t {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, nn::MlpModel>) return static_cast<std::size_t>(x.architecture.input_width);
            else return x.n_features;
        },
        model.model);
    if (model_width != width) fail(ErrorCode::CorruptFile, "model input width does not match declared inputs");
    if (!std::is_sorted(layout.states.begin(), layout.states.end()))
        fail(ErrorCode::CorruptFile, "state list must be sorted");
}

double ModelEnvelope::predict(const model::Record& record, std::string_view state) const {
    return model.predict_one(layout.assemble(record, state));
}

nlohmann::json to_json(const ModelEnvelope& env) {
    json j;
    j["format_version"] = env.format_version;
    j["model_kind"] = std::string(model::to_string(env.model.kind()));
    j["model_tag"] = env.model_tag;
    j["feature_names"] = env.layout.numeric_features;
    j["state_column"] = env.layout.state_column;
    j["states"] = env.layout.states;
    j["normalization"] = {{"min", env.model.norm.min}, {"max", env.model.norm.max}};
    j["created_at"] = env.created_at;
    j["training_seed"] = env.training_seed;
    j["test_metrics"] = env.test_metrics ? metrics_json(*env.test_metrics) : json(nullptr);
    j["payload"] = payload_json(env.model);
    return j;
}

ModelEnvelope from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("format_version")) fail(ErrorCode::CorruptFile, "not a model document");
    if (!j.at("format_version").is_number_integer()) fail(ErrorCode::CorruptFile, "format_version is not an integer");
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion)
        fail(ErrorCode::VersionMismatch, "model format_version " + std::to_string(version) + " is not supported (expected " +
                                             std::to_string(kFormatVersion) + ")");
    try {
        ModelEnvelope env;
        env.format_version = version;
        env.model_tag = j.at("model_tag").get<std::string>();
        env.layout.numeric_features = j.at("feature_names").get<std::vector<std::string>>();
        env.layout.state_column = j.value("state_column", std::string("state"));
        env.layout.states = j.at("states").get<std::vector<std::string>>();
        env.model.norm.min = j.at("normalization").at("min").get<std::vector<double>>();
        env.model.norm.max = j.at("normalization").at("max").get<std::vector<double>>();
        if (env.model.norm.min.size() != env.model.norm.max.size())
            fail(ErrorCode::CorruptFile, "normalization min/max lengths differ");
        env.created_at = j.at("created_at").get<std::string>();
        env.training_seed = j.at("training_seed").get<std::uint64_t>();
        if (const auto& t = j.at("test_metrics"); !t.is_null()) {
            TestMetrics m;
            m.report.rmse = t.at("rmse").get<double>();
            m.report.mae = t.at("mae").get<double>();
            m.report.arse = t.at("arse").get<double>();
            m.report.n = t.at("n").get<std::size_t>();
            m.max_abs_residual = t.at("max_abs_residual").get<double>();
            env.test_metrics = m;
        }
        const auto kind = model::parse_model_kind(j.at("model_kind").get<std::string>());
        const auto& p = j.at("payload");
        const std::size_t width = env.layout.width();
        switch (kind) {
            case model::ModelKind::mlp: env.model.model = mlp_from_json(p); break;
            case model::ModelKind::forest: {
                trees::ForestModel f;
                const auto& c = p.at("config");
                f.config.n_estimators = c.at("n_estimators").get<int>();
                f.config.max_depth = c.at("max_depth").get<int>();
                f.config.min_samples_split = c.at("min_samples_split").get<int>();
                f.config.min_samples_leaf = c.at("min_samples_leaf").get<int>();
                f.config.bootstrap = c.at("bootstrap").get<bool>();
                f.config.feature_subsample = c.at("feature_subsample").get<double>();
                f.seed = p.at("seed").get<std::uint64_t>();
                f.n_features = p.at("n_features").get<std::size_t>();
                f.trees = trees_from_json(p.at("trees"), width);
                if (f.trees.empty()) fail(ErrorCode::CorruptFile, "forest has no trees");
                env.model.model = std::move(f);
                break;
            }
            case model::ModelKind::boost: {
                trees::BoostModel b;
                const auto& c = p.at("config");
                b.config.n_estimators = c.at("n_estimators").get<int>();
                b.config.max_depth = c.at("max_depth").get<int>();
                b.config.learning_rate = c.at("learning_rate").get<double>();
                b.config.min_samples_split_fraction = c.at("min_samples_split_fraction").get<double>();
                b.config.subsample = c.at("subsample").get<double>();
                b.config.reg_lambda = c.at("reg_lambda").get<double>();
                b.config.reg_alpha = c.at("reg_alpha").get<double>();
                b.config.loss = c.at("loss").get<std::string>() == "squared" ? trees::BoostLoss::squared
                                                                             : trees::BoostLoss::mae;
                b.seed = p.at("seed").get<std::uint64_t>();
                b.n_features = p.at("n_features").get<std::size_t>();
                b.base_prediction = p.at("base_prediction").get<double>();
                b.trees = trees_from_json(p.at("trees"), width);
                env.model.model = std::move(b);
                break;
            }
        }
        env.check();
        return env;
    } catch (const json::exception& e) {
        fail(ErrorCode::CorruptFile, std::string("malformed model document: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptFile || e.code() == ErrorCode::VersionMismatch) throw;
        fail(ErrorCode::CorruptFile, e.what());
    }
}

std::string serialize(const ModelEnvelope& env) { return to_json(env).dump() + "\n"; }

ModelEnvelope parse(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::CorruptFile, std::string("model file is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

void save_model(const ModelEnvelope& env, const std::filesystem::path& path) {
    env.check();
    csv::write_file(path, serialize(env));
}

ModelEnvelope load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::IoError, "no such model file " + path.string());
    try {
        return parse(csv::read_file(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Request handling

int status_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::UnknownField: return 422;
        case ErrorCode::UnknownState:
        case ErrorCode::MissingField:
        case ErrorCode::NonFiniteValue:
        case ErrorCode::InvalidArgument:
        case ErrorCode::TypeError: return 400;
        default: return 500;
    }
}

namespace {

json error_json(ErrorCode code, std::string_view message) {
    return {{"error", std::string(to_string(code))}, {"message", std::string(message)}};
}

HttpResult error_result(const Error& e) { return {status_for(e.code()), error_json(e.code(), e.what()).dump()}; }

json parse_body(std::string_view body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::InvalidArgument, std::string("request body is not valid JSON: ") + e.what());
    }
}

double number_field(const json& value, const std::string& name) {
    if (!value.is_number()) fail(ErrorCode::NonFiniteValue, "field '" + name + "' must be a finite number");
    const double v = value.get<double>();
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "field '" + name + "' must be a finite number");
    return v;
}

}  // namespace

Service::Service(ModelEnvelope envelope, double bags_per_tonne)
    : envelope_(std::move(envelope)), bags_per_tonne_(bags_per_tonne), started_(std::chrono::steady_clock::now()) {
    envelope_.check();
    if (!(bags_per_tonne_ > 0.0) || !std::isfinite(bags_per_tonne_))
        fail(ErrorCode::InvalidArgument, "bags_per_tonne must be positive");
}

nlohmann::json Service::respond(const nlohmann::json& request) const {
    if (!request.is_object()) fail(ErrorCode::InvalidArgument, "request must be a JSON object");
    const auto& layout = envelope_.layout;
    for (const auto& [key, value] : request.items()) {
        if (key == layout.state_column) continue;
        if (std::find(layout.numeric_features.begin(), layout.numeric_features.end(), key) ==
            layout.numeric_features.end())
            fail(ErrorCode::UnknownField, "unknown field '" + key + "'");
    }
    if (!request.contains(layout.state_column))
        fail(ErrorCode::MissingField, "missing field '" + layout.state_column + "'");
    const auto& state = request.at(layout.state_column);
    if (!state.is_string()) fail(ErrorCode::UnknownState, "field '" + layout.state_column + "' must be a state name");
    model::Record record;
    for (const auto& name : layout.numeric_features) {
        if (!request.contains(name)) fail(ErrorCode::MissingField, "missing field '" + name + "'");
        record[name] = number_field(request.at(name), name);
    }
    const double tonnes = envelope_.predict(record, state.get<std::string>());
    json out;
    out["yield_t_per_ha"] = tonnes;
    out["yield_bags_per_ha"] = tonnes * bags_per_tonne_;
    out["model_kind"] = std::string(model::to_string(envelope_.model.kind()));
    out["format_version"] = envelope_.format_version;
    return out;
}

HttpResult Service::handle_predict(std::string_view body) const {
    try {
        return {200, respond(parse_body(body)).dump()};
    } catch (const Error& e) {
        return error_result(e);
    }
}

HttpResult Service::handle_whatif(std::string_view body) const {
    try {
        const json req = parse_body(body);
        if (!req.is_object() || !req.contains("base")) fail(ErrorCode::MissingField, "missing field 'base'");
        for (const auto& [key, value] : req.items())
            if (key != "base" && key != "perturbations") fail(ErrorCode::UnknownField, "unknown field '" + key + "'");
        const json& base = req.at("base");
        json out = json::array();
        out.push_back(respond(base));
        if (req.contains("perturbations")) {
            const auto& list = req.at("perturbations");
            if (!list.is_array()) fail(ErrorCode::InvalidArgument, "'perturbations' must be a list");
            for (const auto& p : list) {
                try {
                    if (!p.is_object() || !p.contains("field") || !p.at("field").is_string())
                        fail(ErrorCode::MissingField, "perturbation needs a 'field' name");
                    if (!p.contains("value")) fail(ErrorCode::MissingField, "perturbation needs a 'value'");
                    const auto field = p.at("field").get<std::string>();
                    const auto& names = envelope_.layout.numeric_features;
                    if (std::find(names.begin(), names.end(), field) == names.end())
                        fail(ErrorCode::UnknownField, "cannot perturb unknown field '" + field + "'");
                    json scenario = base;
                    scenario[field] = number_field(p.at("value"), field);
                    json r = respond(scenario);
                    r["field"] = field;
                    r["value"] = scenario[field];
                    out.push_back(std::move(r));
                } catch (const Error& e) {
                    json err = error_json(e.code(), e.what());
                    err["status"] = status_for(e.code());
                    if (p.is_object() && p.contains("field")) err["field"] = p.at("field");
                    out.push_back(std::move(err));
                }
            }
        }
        return {200, out.dump()};
    } catch (const Error& e) {
        return error_result(e);
    }
}

HttpResult Service::handle_health() const {
    const auto& layout = envelope_.layout;
    json ranges = json::object();
    for (std::size_t i = 0; i < layout.numeric_features.size(); ++i)
        ranges[layout.numeric_features[i]] = {{"min", envelope_.model.norm.min[i]}, {"max", envelope_.model.norm.max[i]}};
    const auto uptime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    json out{{"status", "ok"},
             {"model_kind", std::string(model::to_string(envelope_.model.kind()))},
             {"model_tag", envelope_.model_tag},
             {"format_version", envelope_.format_version},
             {"feature_names", layout.numeric_features},
             {"states", layout.states},
             {"feature_ranges", std::move(ranges)},
             {"bags_per_tonne", bags_per_tonne_},
             {"uptime_s", uptime}};
    return {200, out.dump()};
}

// ---------------------------------------------------------------------------
// HTTP

struct HttpServer::Impl {
    const Service& service;
    httplib::Server server;
    std::thread worker;

    explicit Impl(const Service& s) : service(s) {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type"}});
        auto reply = [](httplib::Response& res, const HttpResult& r) {
            res.status = r.status;
            res.set_content(r.body, "application/json; charset=utf-8");
        };
        server.Post("/predict", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.handle_predict(req.body));
        });
        server.Post("/whatif", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.handle_whatif(req.body));
        });
        server.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) {
            reply(res, service.handle_health());
        });
        server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
            spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
        });
    }
};

HttpServer::HttpServer(const Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) fail(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpServer::run(const std::string& host, int port) {
    if (!impl_->server.bind_to_port(host, port)) fail(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
    spdlog::info("serving on {}:{}", host, port);
    impl_->server.listen_after_bind();
}

void HttpServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace cornyield::serving
