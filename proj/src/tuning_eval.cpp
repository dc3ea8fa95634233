#include "cornyield/tuning_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cornyield/csv.hpp"
#include "cornyield/error.hpp"
#include "cornyield/rng.hpp"

namespace cornyield::tuning {

std::string to_string(const GridValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
            else if constexpr (std::is_same_v<T, double>) return csv::format_double(x);
            else if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
            else return x;
        },
        v);
}

namespace {

[[noreturn]] void bad_value(std::string_view name, const GridValue& v, std::string_view wanted) {
    fail(ErrorCode::InvalidArgument,
         "parameter '" + std::string(name) + "' needs " + std::string(wanted) + ", got '" + to_string(v) + "'");
}

int as_int(std::string_view name, const GridValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<int>(*i);
    if (const auto* d = std::get_if<double>(&v); d && std::floor(*d) == *d) return static_cast<int>(*d);
    bad_value(name, v, "an integer");
}

double as_double(std::string_view name, const GridValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    bad_value(name, v, "a number");
}

bool as_bool(std::string_view name, const GridValue& v) {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    bad_value(name, v, "a boolean");
}

std::string as_string(std::string_view name, const GridValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    bad_value(name, v, "a string");
}

[[noreturn]] void unknown_param(std::string_view name, std::string_view family) {
    fail(ErrorCode::InvalidArgument, "unknown " + std::string(family) + " parameter '" + std::string(name) + "'");
}

}  // namespace

void set_param(model::ModelSpec& spec, std::string_view name, const GridValue& value) {
    std::visit(
        [&](auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, model::MlpSpec>) {
                if (name == "hidden_depth") s.architecture.hidden_depth = as_int(name, value);
                else if (name == "hidden_width") s.architecture.hidden_width = as_int(name, value);
                else if (name == "epochs") s.train.epochs = as_int(name, value);
                else if (name == "batch_size") s.train.batch_size = as_int(name, value);
                else if (name == "learning_rate") s.train.learning_rate = as_double(name, value);
                else if (name == "optimizer") {
                    const auto o = as_string(name, value);
                    if (o == "adam") s.train.optimizer = nn::Optimizer::adam;
                    else if (o == "sgd") s.train.optimizer = nn::Optimizer::sgd;
                    else bad_value(name, value, "adam or sgd");
                } else unknown_param(name, "mlp");
            } else if constexpr (std::is_same_v<T, trees::ForestConfig>) {
                if (name == "n_estimators") s.n_estimators = as_int(name, value);
                else if (name == "max_depth") s.max_depth = as_int(name, value);
                else if (name == "min_samples_split") s.min_samples_split = as_int(name, value);
                else if (name == "min_samples_leaf") s.min_samples_leaf = as_int(name, value);
                else if (name == "bootstrap") s.bootstrap = as_bool(name, value);
                else if (name == "feature_subsample") s.feature_subsample = as_double(name, value);
                else unknown_param(name, "forest");
            } else {
                if (name == "n_estimators") s.n_estimators = as_int(name, value);
                else if (name == "max_depth") s.max_depth = as_int(name, value);
                else if (name == "learning_rate") s.learning_rate = as_double(name, value);
                else if (name == "min_samples_split_fraction") s.min_samples_split_fraction = as_double(name, value);
                else if (name == "subsample") s.subsample = as_double(name, value);
                else if (name == "reg_lambda") s.reg_lambda = as_double(name, value);
                else if (name == "reg_alpha") s.reg_alpha = as_double(name, value);
                else if (name == "loss") {
                    const auto l = as_string(name, value);
                    if (l == "mae") s.loss = trees::BoostLoss::mae;
                    else if (l == "squared") s.loss = trees::BoostLoss::squared;
                    else bad_value(name, value, "mae or squared");
                } else unknown_param(name, "boost");
            }
        },
        spec);
}

void GridSpec::validate() const {
    if (params.empty()) fail(ErrorCode::InvalidArgument, "grid has no parameters");
    for (const auto& [name, values] : params)
        if (values.empty()) fail(ErrorCode::InvalidArgument, "grid parameter '" + name + "' has no values");
    if (folds < 2) fail(ErrorCode::InvalidArgument, "grid search needs at least 2 folds");
}

std::size_t GridSpec::combinations() const noexcept {
    std::size_t n = 1;
    for (const auto& p : params) n *= p.second.size();
    return params.empty() ? 0 : n;
}

std::vector<std::pair<std::string, GridValue>> GridSpec::cell(std::size_t index) const {
    std::vector<std::pair<std::string, GridValue>> out(params.size());
    for (std::size_t k = params.size(); k-- > 0;) {
        const auto& values = params[k].second;
        out[k] = {params[k].first, values[index % values.size()]};
        index /= values.size();
    }
    return out;
}

GridResult grid_search(const model::ModelSpec& base, const GridSpec& grid, const Matrix& x, std::span<const double> y,
                       std::uint64_t seed) {
    grid.validate();
    GridResult result;
    result.best = base;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < grid.combinations(); ++i) {
        GridCell cell;
        cell.params = grid.cell(i);
        model::ModelSpec spec = base;
        try {
            for (const auto& [name, value] : cell.params) set_param(spec, name, value);
            const auto run = kfold_cv(spec, x, y, grid.folds, seed);
            double s = 0.0;
            for (const auto& m : run.splits) s += m.mae;
            cell.mean_mae = s / static_cast<double>(run.splits.size());
            if (!std::isfinite(cell.mean_mae)) fail(ErrorCode::NonFiniteLoss, "cross-validated MAE is not finite");
        } catch (const Error& e) {
            cell.failed = true;
            cell.error = std::string(cornyield::to_string(e.code())) + ": " + e.what();
            cell.mean_mae = std::numeric_limits<double>::quiet_NaN();
        }
        if (!cell.failed && cell.mean_mae < best) {
            best = cell.mean_mae;
            result.best = spec;
            result.best_index = i;
            found = true;
        }
        result.cells.push_back(std::move(cell));
    }
    if (!found) fail(ErrorCode::InvalidArgument, "every grid cell failed: " + result.cells.front().error);
    return result;
}

std::string grid_csv(const GridResult& r) {
    csv::Row header{"cell"};
    if (!r.cells.empty())
        for (const auto& p : r.cells.front().params) header.push_back(p.first);
    for (const char* h : {"mean_mae", "failed", "best", "error"}) header.emplace_back(h);
    csv::Writer w(header);
    for (std::size_t i = 0; i < r.cells.size(); ++i) {
        const auto& c = r.cells[i];
        csv::Row row{std::to_string(i)};
        for (const auto& p : c.params) row.push_back(to_string(p.second));
        row.push_back(csv::format_double(c.mean_mae));
        row.emplace_back(c.failed ? "true" : "false");
        row.emplace_back(i == r.best_index ? "true" : "false");
        row.push_back(c.error);
        w.add(row);
    }
    return w.str();
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t rows, int k, std::uint64_t seed) {
    if (k < 2) fail(ErrorCode::TooFewRows, "k-fold needs k >= 2");
    if (static_cast<std::size_t>(k) > rows)
        fail(ErrorCode::TooFewRows, std::to_string(k) + " folds need at least as many rows, got " + std::to_string(rows));
    Rng rng(derive_seed(seed, 0xf01d));
    const auto perm = rng.permutation(rows);
    const auto kk = static_cast<std::size_t>(k);
    std::vector<std::vector<std::size_t>> folds(kk);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < kk; ++f) {
        const std::size_t size = rows / kk + (f < rows % kk ? 1 : 0);
        folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                        perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

namespace {

std::vector<double> gather(std::span<const double> y, std::span<const std::size_t> idx) {
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[idx[i]];
    return out;
}

void check_xy(const Matrix& x, std::span<const double> y) {
    if (x.rows() != y.size()) fail(ErrorCode::LengthMismatch, "rows and targets differ");
    if (x.rows() == 0) fail(ErrorCode::TooFewRows, "no rows to evaluate");
}

}  // namespace

EvalRun kfold_cv(const model::ModelSpec& spec, const Matrix& x, std::span<const double> y, int k, std::uint64_t seed,
                 std::string tag) {
    check_xy(x, y);
    const auto folds = kfold_indices(x.rows(), k, seed);
    EvalRun run;
    run.tag = std::move(tag);
    run.mode = EvalMode::kfold;
    run.seed = seed;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> train;
        for (std::size_t g = 0; g < folds.size(); ++g)
            if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
        const auto m = model::fit_model(spec, x.select_rows(train), gather(y, train), derive_seed(seed, f));
        const auto pred = m.predict(x.select_rows(folds[f]));
        run.splits.push_back(metrics::arse(pred, gather(y, folds[f])));
    }
    return run;
}

EvalRun bootstrap_eval(const model::ModelSpec& spec, const Matrix& x, std::span<const double> y, int replicates,
                       std::uint64_t seed, std::string tag) {
    check_xy(x, y);
    if (replicates < 1) fail(ErrorCode::InvalidArgument, "bootstrap needs at least one replicate");
    const std::size_t n = x.rows();
    EvalRun run;
    run.tag = std::move(tag);
    run.mode = EvalMode::bootstrap;
    run.seed = seed;
    for (int r = 0; r < replicates; ++r) {
        std::vector<std::size_t> drawn(n);
        std::vector<std::size_t> oob;
        std::uint64_t stream = 0;
        for (int attempt = 0; attempt < kBootstrapRetries && oob.empty(); ++attempt) {
            stream = derive_seed(seed, static_cast<std::uint64_t>(r) * kBootstrapRetries + attempt);
            Rng rng(stream);
            std::vector<char> hit(n, 0);
            for (auto& d : drawn) {
                d = rng.index(n);
                hit[d] = 1;
            }
            oob.clear();
            for (std::size_t i = 0; i < n; ++i)
                if (!hit[i]) oob.push_back(i);
        }
        if (oob.empty())
            fail(ErrorCode::DegenerateResample, "replicate " + std::to_string(r) + " has no out-of-bag rows after " +
                                                    std::to_string(kBootstrapRetries) + " draws");
        const auto m = model::fit_model(spec, x.select_rows(drawn), gather(y, drawn), derive_seed(stream, 1));
        run.splits.push_back(metrics::arse(m.predict(x.select_rows(oob)), gather(y, oob)));
        run.resample_sizes.push_back(drawn.size());
    }
    return run;
}

std::string eval_csv(const std::vector<EvalRun>& runs) {
    csv::Writer w({"model", "mode", "split", "rmse", "mae", "arse", "n"});
    for (const auto& run : runs)
        for (std::size_t i = 0; i < run.splits.size(); ++i) {
            const auto& m = run.splits[i];
            w.add({run.tag, run.mode == EvalMode::kfold ? "kfold" : "bootstrap", std::to_string(i),
                   csv::format_double(m.rmse), csv::format_double(m.mae), csv::format_double(m.arse),
                   std::to_string(m.n)});
        }
    return w.str();
}

model::Record PerturbationCase::view() const {
    model::Record r = base;
    for (const auto& [name, value] : perturbed) {
        const auto it = r.find(name);
        if (it == r.end()) fail(ErrorCode::MissingField, "perturbed field '" + name + "' is not in the record");
        it->second = value;
    }
    return r;
}

std::vector<PerturbationCase> base_cases() {
    PerturbationCase enugu;
    enugu.label = "Enugu";
    enugu.base = {{"avg_min_temp_c", 21.69208848}, {"avg_precip_mm", 133.5208333}, {"avg_wind_ms", 1.498848967},
                  {"soil_ph", 5.466666667},        {"sand_pct", 59.83333333},      {"silt_pct", 10.1666667},
                  {"cultivation_area_ha", 0.545488917}};
    enugu.expected = 0.709388681;

    PerturbationCase plateau;
    plateau.label = "Plateau";
    plateau.base = {{"avg_min_temp_c", 16.68546347}, {"avg_precip_mm", 99.125},   {"avg_wind_ms", 2.417177081},
                    {"soil_ph", 5.566666667},        {"sand_pct", 35.5},          {"silt_pct", 27.33333333},
                    {"cultivation_area_ha", 1.686767501}};
    plateau.expected = 2.60302342;
    return {enugu, plateau};
}

std::vector<PerturbationCase> unforeseen_cases() {
    const auto bases = base_cases();
    const auto& enugu = bases[0];
    const auto& plateau = bases[1];
    auto with = [](PerturbationCase c, std::string field, double value) {
        c.perturbed = {{std::move(field), value}};
        return c;
    };
    return {with(enugu, "avg_precip_mm", 13.5208333), with(enugu, "silt_pct", 27.1666667),
            with(plateau, "avg_precip_mm", 9.125), with(plateau, "silt_pct", 50.33333333)};
}

namespace {

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

}  // namespace

std::vector<SinglePointRow> single_point_eval(const Predictor& predict, std::span<const PerturbationCase> cases,
                                              const std::map<std::string, double>& signs) {
    std::vector<SinglePointRow> out;
    for (const auto& c : cases) {
        SinglePointRow row;
        row.label = c.label;
        row.expected = c.expected;
        row.base_prediction = predict(c.base, c.label);
        row.predicted = predict(c.view(), c.label);
        row.residual = std::abs(row.predicted - row.expected);
        row.delta = row.predicted - row.base_prediction;
        row.changed = row.delta != 0.0;
        if (c.perturbed.empty()) {
            row.kind = "base";
        } else {
            row.kind = "unforeseen";
            row.field = c.perturbed.front().first;
            row.value = c.perturbed.front().second;
            const auto it = signs.find(row.field);
            if (it != signs.end()) {
                const int wanted = sign_of(it->second) * sign_of(row.value - c.base.at(row.field));
                row.direction_ok = wanted != 0 && sign_of(row.delta) == wanted;
            }
        }
        out.push_back(std::move(row));
    }
    return out;
}

std::string single_point_csv(std::span<const SinglePointRow> rows) {
    csv::Writer w({"label", "kind", "field", "value", "predicted", "expected", "residual", "base_prediction", "delta",
                   "changed", "direction_ok"});
    for (const auto& r : rows)
        w.add({r.label, r.kind, r.field, r.field.empty() ? "" : csv::format_double(r.value),
               csv::format_double(r.predicted), csv::format_double(r.expected), csv::format_double(r.residual),
               csv::format_double(r.base_prediction), csv::format_double(r.delta), r.changed ? "true" : "false",
               r.direction_ok ? (*r.direction_ok ? "true" : "false") : ""});
    return w.str();
}

AblationResult ablation_feature_selection(const model::ModelSpec& spec, const SplitMatrices& full,
                                          const SplitMatrices& selected, std::uint64_t seed) {
    auto score = [&](const SplitMatrices& s) {
        const auto m = model::fit_model(spec, s.train_x, s.train_y, seed);
        return metrics::arse(m.predict(s.test_x), s.test_y);
    };
    AblationResult r;
    r.with_selection = score(selected);
    r.without_selection = score(full);
    r.delta.rmse = r.with_selection.rmse - r.without_selection.rmse;
    r.delta.mae = r.with_selection.mae - r.without_selection.mae;
    r.delta.arse = r.with_selection.arse - r.without_selection.arse;
    r.delta.n = r.with_selection.n;
    return r;
}

}  // namespace cornyield::tuning
