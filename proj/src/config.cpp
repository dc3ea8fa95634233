#include "cornyield/config.hpp"

#include <algorithm>
#include <charconv>

#include <yaml-cpp/yaml.h>

#include "cornyield/csv.hpp"
#include "cornyield/error.hpp"

namespace cornyield::config {

namespace {

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorCode::ConfigError, msg); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

tuning::GridValue scalar_value(const YAML::Node& node, const std::string& where) {
    if (!node.IsScalar()) config_error(where + " must be a scalar");
    const std::string s = node.Scalar();
    if (s == "true") return true;
    if (s == "false") return false;
    std::int64_t i = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (ec == std::errc() && ptr == s.data() + s.size()) return i;
    double d = 0.0;
    if (csv::parse_double(s, d)) return d;
    return s;
}

template <typename T>
T get(const YAML::Node& node, const std::string& where) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        config_error("invalid value for " + where);
    }
}

}  // namespace

model::ModelSpec default_spec(std::string_view tag) {
    if (tag == "dnnr16") return model::MlpSpec{nn::MlpArchitecture::dnnr16(), {}};
    if (tag == "dnnr64") return model::MlpSpec{nn::MlpArchitecture::dnnr64(), {}};
    if (tag == "rfr") return trees::ForestConfig{};
    if (tag == "xgbr") return trees::BoostConfig{};
    config_error("model '" + std::string(tag) + "' needs an explicit kind (mlp, forest or boost)");
}

const NamedModel& PipelineConfig::model(std::string_view tag) const {
    for (const auto& m : models)
        if (m.tag == tag) return m;
    fail(ErrorCode::InvalidArgument, "unknown model tag '" + std::string(tag) + "'");
}

const NamedGrid* PipelineConfig::grid(std::string_view tag) const noexcept {
    for (const auto& g : grids)
        if (g.tag == tag) return &g;
    return nullptr;
}

PipelineConfig parse(std::string_view yaml, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml));
    } catch (const YAML::Exception& e) {
        config_error(std::string("config is not valid YAML: ") + e.what());
    }
    if (!root.IsMap()) config_error("config must be a mapping");

    PipelineConfig c;
    if (!root["seed"]) config_error("config must set 'seed'");
    c.seed = get<std::uint64_t>(root["seed"], "seed");
    if (root["created_at"]) c.created_at = get<std::string>(root["created_at"], "created_at");
    c.output_dir = resolve(base_dir, root["output_dir"] ? get<std::string>(root["output_dir"], "output_dir") : "out");

    if (const auto d = root["data"]) {
        if (d["dataset"]) c.dataset = resolve(base_dir, get<std::string>(d["dataset"], "data.dataset"));
        if (d["schema"]) c.schema = resolve(base_dir, get<std::string>(d["schema"], "data.schema"));
        if (d["state_column"]) c.state_column = get<std::string>(d["state_column"], "data.state_column");
    }

    if (const auto s = root["split"]) {
        if (const auto counts = s["counts"]) {
            const auto v = get<std::vector<std::size_t>>(counts, "split.counts");
            if (v.size() != 3) config_error("split.counts needs three values");
            c.split.train = v[0];
            c.split.val = v[1];
            c.split.test = v[2];
        } else if (const auto ratio = s["ratio"]) {
            const auto v = get<std::vector<double>>(ratio, "split.ratio");
            if (v.size() != 2) config_error("split.ratio needs train and validation shares");
            c.split.train_ratio = v[0];
            c.split.val_ratio = v[1];
        } else {
            config_error("split needs 'counts' or 'ratio'");
        }
    }

    if (const auto f = root["feature_selection"]) {
        if (f["threshold"]) c.threshold = get<double>(f["threshold"], "feature_selection.threshold");
        if (f["features"]) c.features = get<std::vector<std::string>>(f["features"], "feature_selection.features");
    }

    if (const auto models = root["models"]) {
        if (!models.IsMap()) config_error("models must be a mapping of tag to settings");
        for (const auto& entry : models) {
            NamedModel m;
            m.tag = entry.first.as<std::string>();
            const auto& body = entry.second;
            if (body["kind"]) {
                switch (model::parse_model_kind(get<std::string>(body["kind"], m.tag + ".kind"))) {
                    case model::ModelKind::mlp: m.spec = model::MlpSpec{}; break;
                    case model::ModelKind::forest: m.spec = trees::ForestConfig{}; break;
                    case model::ModelKind::boost: m.spec = trees::BoostConfig{}; break;
                }
            } else {
                m.spec = default_spec(m.tag);
            }
            if (body.IsMap())
                for (const auto& kv : body) {
                    const auto name = kv.first.as<std::string>();
                    if (name == "kind") continue;
                    try {
                        tuning::set_param(m.spec, name, scalar_value(kv.second, "models." + m.tag + "." + name));
                    } catch (const Error& e) {
                        config_error("models." + m.tag + ": " + e.what());
                    }
                }
            c.models.push_back(std::move(m));
        }
    }
    for (const char* tag : {"dnnr16", "dnnr64", "rfr", "xgbr"}) {
        const bool present = std::any_of(c.models.begin(), c.models.end(), [&](const NamedModel& m) { return m.tag == tag; });
        if (!present) c.models.push_back({tag, default_spec(tag)});
    }

    if (const auto grids = root["grids"]) {
        for (const auto& entry : grids) {
            NamedGrid g;
            g.tag = entry.first.as<std::string>();
            const auto& body = entry.second;
            if (body["folds"]) g.grid.folds = get<int>(body["folds"], "grids." + g.tag + ".folds");
            const auto params = body["params"];
            if (!params || !params.IsMap()) config_error("grids." + g.tag + " needs a 'params' mapping");
            for (const auto& kv : params) {
                const auto name = kv.first.as<std::string>();
                if (!kv.second.IsSequence()) config_error("grids." + g.tag + "." + name + " must be a list");
                std::vector<tuning::GridValue> values;
                for (const auto& v : kv.second) values.push_back(scalar_value(v, "grids." + g.tag + "." + name));
                g.grid.params.emplace_back(name, std::move(values));
            }
            try {
                g.grid.validate();
            } catch (const Error& e) {
                config_error("grids." + g.tag + ": " + e.what());
            }
            c.grids.push_back(std::move(g));
        }
    }

    if (const auto e = root["evaluate"]) {
        if (e["bootstrap_replicates"]) c.bootstrap_replicates = get<int>(e["bootstrap_replicates"], "evaluate.bootstrap_replicates");
        if (e["kfold"]) c.kfold = get<int>(e["kfold"], "evaluate.kfold");
        if (e["ablation"]) c.ablation = get<bool>(e["ablation"], "evaluate.ablation");
        if (e["models"]) c.evaluate_models = get<std::vector<std::string>>(e["models"], "evaluate.models");
    }

    if (const auto p = root["preprocess"]) {
        PreprocessConfig pc;
        for (const auto& t : get<std::vector<std::string>>(p["tables"], "preprocess.tables"))
            pc.tables.push_back(resolve(base_dir, t));
        if (p["key"]) pc.key = get<std::string>(p["key"], "preprocess.key");
        pc.yield_series = resolve(base_dir, get<std::string>(p["yield_series"], "preprocess.yield_series"));
        pc.area_series = resolve(base_dir, get<std::string>(p["area_series"], "preprocess.area_series"));
        if (p["forecast_steps"]) pc.forecast_steps = get<int>(p["forecast_steps"], "preprocess.forecast_steps");
        const auto sh = p["smallholder"];
        if (!sh) config_error("preprocess needs a 'smallholder' block");
        pc.expected_max_yield = get<double>(sh["expected_max_yield"], "smallholder.expected_max_yield");
        pc.expected_max_hectares = get<double>(sh["expected_max_hectares"], "smallholder.expected_max_hectares");
        auto optional_value = [&](const char* key) -> std::optional<double> {
            const auto n = sh[key];
            if (!n || (n.IsScalar() && n.Scalar() == "auto")) return std::nullopt;
            return get<double>(n, std::string("smallholder.") + key);
        };
        pc.original_yield = optional_value("original_yield");
        pc.original_hectares = optional_value("original_hectares");
        pc.state_column = c.state_column;
        c.preprocess = std::move(pc);
    }

    if (const auto s = root["serving"]) {
        if (s["bags_per_tonne"]) c.bags_per_tonne = get<double>(s["bags_per_tonne"], "serving.bags_per_tonne");
        if (s["host"]) c.host = get<std::string>(s["host"], "serving.host");
        if (s["port"]) c.port = get<int>(s["port"], "serving.port");
    }
    if (c.evaluate_models.empty())
        for (const auto& m : c.models) c.evaluate_models.push_back(m.tag);
    return c;
}

PipelineConfig load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::IoError, "no such config file " + path.string());
    auto c = parse(csv::read_file(path), path.parent_path());
    c.source = path;
    return c;
}

}  // namespace cornyield::config
