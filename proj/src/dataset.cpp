#include "cornyield/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <yaml-cpp/yaml.h>

#include "cornyield/csv.hpp"
#include "cornyield/rng.hpp"

namespace cornyield::data {

std::string_view to_string(VariableKind kind) noexcept {
    switch (kind) {
        case VariableKind::numeric: return "numeric";
        case VariableKind::categorical: return "categorical";
        case VariableKind::target: return "target";
        case VariableKind::id: return "id";
    }
    return "numeric";
}

VariableKind parse_variable_kind(std::string_view text) {
    if (text == "numeric") return VariableKind::numeric;
    if (text == "categorical") return VariableKind::categorical;
    if (text == "target") return VariableKind::target;
    if (text == "id") return VariableKind::id;
    fail(ErrorCode::SchemaMismatch, "unknown variable kind '" + std::string(text) + "'");
}

VariableSchema::VariableSchema(std::vector<Variable> variables) : variables_(std::move(variables)) {
    std::set<std::string> seen;
    std::size_t targets = 0;
    for (const auto& v : variables_) {
        if (v.name.empty()) fail(ErrorCode::SchemaMismatch, "empty variable name");
        if (!seen.insert(v.name).second)
            fail(ErrorCode::SchemaMismatch, "duplicate variable name '" + v.name + "'");
        if (v.kind == VariableKind::target) ++targets;
        if (v.kind == VariableKind::categorical && !v.categories.empty()) {
            if (!std::is_sorted(v.categories.begin(), v.categories.end()) ||
                std::adjacent_find(v.categories.begin(), v.categories.end()) != v.categories.end())
                fail(ErrorCode::SchemaMismatch,
                     "categories of '" + v.name + "' must be unique and lexicographically sorted");
        }
    }
    if (targets != 1)
        fail(ErrorCode::SchemaMismatch, "schema must declare exactly one target column");
}

const Variable& VariableSchema::target() const {
    for (const auto& v : variables_)
        if (v.kind == VariableKind::target) return v;
    fail(ErrorCode::SchemaMismatch, "schema has no target");
}

const Variable* VariableSchema::find(std::string_view name) const noexcept {
    for (const auto& v : variables_)
        if (v.name == name) return &v;
    return nullptr;
}

std::vector<std::string> VariableSchema::names_of(VariableKind kind) const {
    std::vector<std::string> out;
    for (const auto& v : variables_)
        if (v.kind == kind) out.push_back(v.name);
    return out;
}

VariableSchema load_schema(const std::filesystem::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        fail(ErrorCode::SchemaMismatch, "cannot read schema " + path.string() + ": " + e.what());
    }
    const auto columns = root["columns"];
    if (!columns || !columns.IsSequence())
        fail(ErrorCode::SchemaMismatch, "schema " + path.string() + " needs a 'columns' list");
    std::vector<Variable> vars;
    for (const auto& node : columns) {
        Variable v;
        v.name = node["name"].as<std::string>("");
        v.kind = parse_variable_kind(node["kind"].as<std::string>("numeric"));
        v.unit = node["unit"].as<std::string>("");
        if (const auto cats = node["categories"]) v.categories = cats.as<std::vector<std::string>>();
        vars.push_back(std::move(v));
    }
    return VariableSchema(std::move(vars));
}

void save_schema(const VariableSchema& schema, const std::filesystem::path& path) {
    YAML::Emitter out;
    out << YAML::BeginMap << YAML::Key << "columns" << YAML::Value << YAML::BeginSeq;
    for (const auto& v : schema.variables()) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << v.name;
        out << YAML::Key << "kind" << YAML::Value << std::string(to_string(v.kind));
        if (!v.unit.empty()) out << YAML::Key << "unit" << YAML::Value << v.unit;
        if (!v.categories.empty())
            out << YAML::Key << "categories" << YAML::Value << YAML::Flow << v.categories;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
    csv::write_file(path, std::string(out.c_str()) + "\n");
}

// ---------------------------------------------------------------------------
// Dataset accessors

std::size_t Dataset::n_features() const noexcept {
    const auto* t = schema.variables().empty() ? nullptr : &schema.target();
    std::size_t n = columns.size();
    if (t && std::find(columns.begin(), columns.end(), t->name) != columns.end()) --n;
    return n;
}

std::size_t Dataset::column_index(std::string_view name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) fail(ErrorCode::SchemaMismatch, "no column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

bool Dataset::has_column(std::string_view name) const noexcept {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::vector<double> Dataset::column(std::string_view name) const {
    return values.column(column_index(name));
}

std::vector<double> Dataset::target() const { return column(schema.target().name); }

const LabelColumn& Dataset::label(std::string_view name) const {
    for (const auto& l : labels)
        if (l.name == name) return l;
    fail(ErrorCode::SchemaMismatch, "no label column '" + std::string(name) + "'");
}

const OneHotBlock* Dataset::block(std::string_view source) const noexcept {
    for (const auto& b : blocks)
        if (b.source == source) return &b;
    return nullptr;
}

Dataset Dataset::select_rows(std::span<const std::size_t> indices) const {
    Dataset out;
    out.schema = schema;
    out.columns = columns;
    out.blocks = blocks;
    out.values = values.select_rows(indices);
    for (const auto& l : labels) {
        LabelColumn lc{l.name, {}};
        lc.values.reserve(indices.size());
        for (auto i : indices) lc.values.push_back(l.values[i]);
        out.labels.push_back(std::move(lc));
    }
    out.row_ids.reserve(indices.size());
    for (auto i : indices) out.row_ids.push_back(row_ids[i]);
    return out;
}

namespace {

bool same_bits(double a, double b) {
    if (std::isnan(a) && std::isnan(b)) return true;
    return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

bool operator==(const Dataset& a, const Dataset& b) {
    if (!(a.schema == b.schema && a.columns == b.columns && a.labels == b.labels &&
          a.blocks == b.blocks && a.row_ids == b.row_ids))
        return false;
    if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) return false;
    const auto& da = a.values.data();
    const auto& db = b.values.data();
    for (std::size_t i = 0; i < da.size(); ++i)
        if (!same_bits(da[i], db[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// CSV

Dataset parse_csv(std::string_view text, const VariableSchema& schema) {
    const auto rows = csv::parse(text);
    if (rows.empty()) fail(ErrorCode::MalformedCsv, "missing header row");
    const auto& header = rows.front();

    const auto& vars = schema.variables();
    if (header.size() != vars.size())
        fail(ErrorCode::MalformedCsv, "header has " + std::to_string(header.size()) +
                                          " columns, schema declares " + std::to_string(vars.size()));
    // Header columns may appear in any order but must match the schema names exactly.
    std::vector<std::size_t> source_of(vars.size());
    for (std::size_t j = 0; j < vars.size(); ++j) {
        const auto it = std::find(header.begin(), header.end(), vars[j].name);
        if (it == header.end())
            fail(ErrorCode::MalformedCsv, "header is missing column '" + vars[j].name + "'");
        source_of[j] = static_cast<std::size_t>(it - header.begin());
    }

    Dataset d;
    d.schema = schema;
    std::vector<std::size_t> numeric_vars;
    std::vector<std::size_t> label_vars;
    std::size_t id_var = vars.size();
    for (std::size_t j = 0; j < vars.size(); ++j) {
        switch (vars[j].kind) {
            case VariableKind::numeric:
            case VariableKind::target:
                numeric_vars.push_back(j);
                d.columns.push_back(vars[j].name);
                break;
            case VariableKind::categorical:
                label_vars.push_back(j);
                d.labels.push_back({vars[j].name, {}});
                break;
            case VariableKind::id:
                if (id_var == vars.size()) id_var = j;
                break;
        }
    }
    d.values = Matrix(0, numeric_vars.size());

    std::vector<double> buffer(numeric_vars.size());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            fail(ErrorCode::MalformedCsv, "row " + std::to_string(r + 1) + " has " +
                                              std::to_string(row.size()) + " cells, expected " +
                                              std::to_string(header.size()));
        for (std::size_t k = 0; k < numeric_vars.size(); ++k) {
            const auto& cell = row[source_of[numeric_vars[k]]];
            std::string_view trimmed = cell;
            while (!trimmed.empty() && trimmed.front() == ' ') trimmed.remove_prefix(1);
            while (!trimmed.empty() && trimmed.back() == ' ') trimmed.remove_suffix(1);
            if (trimmed.empty() || trimmed == "NA" || trimmed == "NaN" || trimmed == "nan") {
                buffer[k] = kMissing;
            } else if (!csv::parse_double(trimmed, buffer[k])) {
                fail(ErrorCode::TypeError, "row " + std::to_string(r + 1) + ", column '" +
                                               vars[numeric_vars[k]].name + "': '" + cell +
                                               "' is not numeric");
            }
        }
        d.values.append_row(buffer);
        for (std::size_t k = 0; k < label_vars.size(); ++k)
            d.labels[k].values.push_back(row[source_of[label_vars[k]]]);
        d.row_ids.push_back(id_var < vars.size() ? row[source_of[id_var]] : std::to_string(r));
    }
    return d;
}

Dataset load_csv(const std::filesystem::path& path, const VariableSchema& schema) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::IoError, "no such file " + path.string());
    try {
        return parse_csv(csv::read_file(path), schema);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::string to_csv(const Dataset& d) {
    csv::Row header;
    const auto ids = d.schema.names_of(VariableKind::id);
    if (!ids.empty()) header.push_back(ids.front());
    for (const auto& c : d.columns) header.push_back(c);
    for (const auto& l : d.labels) header.push_back(l.name);
    csv::Writer w(header);
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        csv::Row row;
        if (!ids.empty()) row.push_back(d.row_ids[r]);
        for (double v : d.values.row(r)) row.push_back(csv::format_double(v));
        for (const auto& l : d.labels) row.push_back(l.values[r]);
        w.add(row);
    }
    return w.str();
}

void write_csv(const Dataset& d, const std::filesystem::path& path) {
    csv::write_file(path, to_csv(d));
}

// ---------------------------------------------------------------------------
// Cleaning and aggregation

Dataset clean(const Dataset& d) {
    std::vector<std::size_t> keep;
    std::unordered_set<std::string> seen;
    std::string key;
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        const auto row = d.values.row(r);
        bool missing = std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); });
        for (const auto& l : d.labels) missing = missing || l.values[r].empty();
        if (missing) continue;

        key.assign(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(double));
        for (const auto& l : d.labels) {
            key += '\x1f';
            key += l.values[r];
        }
        if (seen.insert(key).second) keep.push_back(r);
    }
    if (keep.empty()) fail(ErrorCode::EmptyDataset, "cleaning removed every row");
    return d.select_rows(keep);
}

Dataset aggregate_mean(std::span<const Dataset> tables, std::string_view key) {
    if (tables.empty()) fail(ErrorCode::EmptyInput, "no tables to aggregate");
    const auto& first = tables.front();
    for (const auto& t : tables)
        if (!(t.schema == first.schema) || t.columns != first.columns)
            fail(ErrorCode::SchemaMismatch, "tables do not share one schema");

    const Variable* key_var = first.schema.find(key);
    if (!key_var) fail(ErrorCode::SchemaMismatch, "no key column '" + std::string(key) + "'");

    auto keys_of = [&](const Dataset& t) -> std::vector<std::string> {
        if (key_var->kind == VariableKind::id) return t.row_ids;
        if (key_var->kind == VariableKind::categorical) return t.label(key).values;
        fail(ErrorCode::SchemaMismatch, "aggregation key must be an id or categorical column");
    };

    const auto order = keys_of(first);
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t r = 0; r < order.size(); ++r)
        if (!position.emplace(order[r], r).second)
            fail(ErrorCode::SchemaMismatch, "duplicate key '" + order[r] + "'");

    Matrix sums(first.n_rows(), first.values.cols(), 0.0);
    for (const auto& t : tables) {
        const auto keys = keys_of(t);
        if (keys.size() != order.size())
            fail(ErrorCode::SchemaMismatch, "tables do not cover the same keys");
        std::vector<bool> hit(order.size(), false);
        for (std::size_t r = 0; r < keys.size(); ++r) {
            const auto it = position.find(keys[r]);
            if (it == position.end() || hit[it->second])
                fail(ErrorCode::SchemaMismatch, "key '" + keys[r] + "' does not align across tables");
            hit[it->second] = true;
            auto dst = sums.row(it->second);
            const auto src = t.values.row(r);
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
    }
    Dataset out = first;
    const double n = static_cast<double>(tables.size());
    for (std::size_t r = 0; r < out.n_rows(); ++r) {
        auto dst = out.values.row(r);
        const auto src = sums.row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = src[c] / n;
    }
    return out;
}

void SmallholderScaleConfig::validate() const {
    if (original_yield == 0.0 || original_hectares == 0.0)
        fail(ErrorCode::DivisionByZero, "original per-state yield and hectares must be nonzero");
    if (!(expected_max_yield > 0.0 && expected_max_hectares > 0.0 && original_yield > 0.0 &&
          original_hectares > 0.0))
        fail(ErrorCode::InvalidArgument, "smallholder scaling values must be strictly positive");
}

double scale_to_smallholder(double value, const SmallholderScaleConfig& cfg, ScaleTarget which) {
    cfg.validate();
    if (which == ScaleTarget::yield) return (value / cfg.original_yield) * cfg.expected_max_yield;
    return (value / cfg.original_hectares) * cfg.expected_max_hectares;
}

Dataset one_hot(const Dataset& d, std::string_view column, const std::vector<std::string>& categories) {
    if (categories.empty()) fail(ErrorCode::InvalidArgument, "one_hot needs at least one category");
    if (!std::is_sorted(categories.begin(), categories.end()) ||
        std::adjacent_find(categories.begin(), categories.end()) != categories.end())
        fail(ErrorCode::InvalidArgument, "categories must be unique and lexicographically sorted");

    const auto label_it = std::find_if(d.labels.begin(), d.labels.end(),
                                       [&](const LabelColumn& l) { return l.name == column; });
    if (label_it == d.labels.end())
        fail(ErrorCode::SchemaMismatch, "no categorical column '" + std::string(column) + "'");

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < categories.size(); ++k) index.emplace(categories[k], k);

    Dataset out;
    out.schema = d.schema;
    out.row_ids = d.row_ids;
    out.columns = d.columns;
    out.blocks = d.blocks;
    const std::size_t first = d.columns.size();
    for (const auto& c : categories) out.columns.push_back(std::string(column) + "=" + c);
    out.blocks.push_back({std::string(column), categories, first});
    for (const auto& l : d.labels)
        if (l.name != column) out.labels.push_back(l);

    out.values = Matrix(d.n_rows(), out.columns.size(), 0.0);
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        const auto src = d.values.row(r);
        auto dst = out.values.row(r);
        std::copy(src.begin(), src.end(), dst.begin());
        const auto& value = label_it->values[r];
        const auto hit = index.find(value);
        if (hit == index.end())
            fail(ErrorCode::UnknownCategory, "row " + std::to_string(r) + ": category '" + value +
                                                 "' is not in the list for '" + std::string(column) + "'");
        dst[first + hit->second] = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splits and normalization

SplitSpec SplitSpec::from_ratio(std::size_t total, double train_fraction, double val_fraction,
                                std::uint64_t seed) {
    if (!(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction <= 1.0))
        fail(ErrorCode::InvalidArgument, "split fractions must be positive and sum to at most 1");
    SplitSpec s;
    s.train_count = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));
    s.val_count = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(total)));
    s.train_count = std::min(s.train_count, total);
    s.val_count = std::min(s.val_count, total - s.train_count);
    s.test_count = total - s.train_count - s.val_count;
    s.seed = seed;
    return s;
}

std::vector<std::size_t> split_permutation(std::size_t rows, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x5b1d));
    return rng.permutation(rows);
}

SplitResult split(const Dataset& d, const SplitSpec& spec) {
    if (spec.train_count + spec.val_count + spec.test_count != d.n_rows())
        fail(ErrorCode::CountMismatch, "split counts " + std::to_string(spec.train_count) + "+" +
                                           std::to_string(spec.val_count) + "+" +
                                           std::to_string(spec.test_count) + " do not sum to " +
                                           std::to_string(d.n_rows()) + " rows");
    const auto perm = split_permutation(d.n_rows(), spec.seed);
    const std::span<const std::size_t> all(perm);
    return {d.select_rows(all.subspan(0, spec.train_count)),
            d.select_rows(all.subspan(spec.train_count, spec.val_count)),
            d.select_rows(all.subspan(spec.train_count + spec.val_count, spec.test_count))};
}

MinMaxParams fit_minmax(const Matrix& train) {
    if (train.empty()) fail(ErrorCode::EmptyInput, "cannot fit min-max on zero rows");
    MinMaxParams p;
    p.min.assign(train.cols(), 0.0);
    p.max.assign(train.cols(), 0.0);
    for (std::size_t c = 0; c < train.cols(); ++c) {
        double lo = train(0, c);
        double hi = lo;
        for (std::size_t r = 1; r < train.rows(); ++r) {
            lo = std::min(lo, train(r, c));
            hi = std::max(hi, train(r, c));
        }
        p.min[c] = lo;
        p.max[c] = hi;
    }
    return p;
}

void apply_minmax_inplace(const MinMaxParams& params, std::span<double> row) {
    if (row.size() != params.width())
        fail(ErrorCode::ShapeMismatch, "row width " + std::to_string(row.size()) +
                                           " does not match normalizer width " +
                                           std::to_string(params.width()));
    for (std::size_t c = 0; c < row.size(); ++c) {
        const double range = params.max[c] - params.min[c];
        row[c] = range > 0.0 ? (row[c] - params.min[c]) / range : 0.0;
    }
}

Matrix apply_minmax(const MinMaxParams& params, const Matrix& rows) {
    Matrix out = rows;
    for (std::size_t r = 0; r < out.rows(); ++r) apply_minmax_inplace(params, out.row(r));
    return out;
}

Matrix invert_minmax(const MinMaxParams& params, const Matrix& rows) {
    if (rows.cols() != params.width() && !rows.empty())
        fail(ErrorCode::ShapeMismatch, "matrix width does not match normalizer width");
    Matrix out = rows;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            const double range = params.max[c] - params.min[c];
            row[c] = range > 0.0 ? row[c] * range + params.min[c] : params.min[c];
        }
    }
    return out;
}

}  // namespace cornyield::data
