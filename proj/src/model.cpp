#include "cornyield/model.hpp"

#include <algorithm>
#include <cmath>

#include "cornyield/error.hpp"

namespace cornyield::model {

std::vector<std::string> FeatureLayout::column_names() const {
    std::vector<std::string> out = numeric_features;
    for (const auto& s : states) out.push_back(state_column + "=" + s);
    return out;
}

std::vector<double> FeatureLayout::assemble(const Record& record, std::string_view state) const {
    std::vector<double> row;
    row.reserve(width());
    for (const auto& name : numeric_features) {
        const auto it = record.find(name);
        if (it == record.end()) fail(ErrorCode::MissingField, "missing field '" + name + "'");
        if (!std::isfinite(it->second)) fail(ErrorCode::NonFiniteValue, "field '" + name + "' is not finite");
        row.push_back(it->second);
    }
    const auto it = std::lower_bound(states.begin(), states.end(), state);
    if (it == states.end() || *it != state) fail(ErrorCode::UnknownState, "unknown state '" + std::string(state) + "'");
    const auto hot = static_cast<std::size_t>(it - states.begin());
    for (std::size_t k = 0; k < states.size(); ++k) row.push_back(k == hot ? 1.0 : 0.0);
    return row;
}

Matrix FeatureLayout::matrix(const data::Dataset& d) const {
    std::vector<std::size_t> cols;
    for (const auto& name : numeric_features) cols.push_back(d.column_index(name));
    if (!states.empty()) {
        const auto* block = d.block(state_column);
        if (!block) fail(ErrorCode::SchemaMismatch, "dataset has no one-hot block for '" + state_column + "'");
        if (block->categories != states) fail(ErrorCode::SchemaMismatch, "dataset state categories differ from layout");
        for (std::size_t k = 0; k < states.size(); ++k) cols.push_back(block->first_column + k);
    }
    return d.values.select_cols(cols);
}

FeatureLayout FeatureLayout::from_dataset(const data::Dataset& d, std::vector<std::string> features,
                                          std::string state_column) {
    FeatureLayout layout;
    layout.numeric_features = std::move(features);
    layout.state_column = std::move(state_column);
    if (const auto* block = d.block(layout.state_column)) layout.states = block->categories;
    for (const auto& f : layout.numeric_features)
        if (!d.has_column(f)) fail(ErrorCode::SchemaMismatch, "dataset has no column '" + f + "'");
    return layout;
}

std::string_view to_string(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::mlp: return "mlp";
        case ModelKind::forest: return "forest";
        case ModelKind::boost: return "boost";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "mlp") return ModelKind::mlp;
    if (text == "forest") return ModelKind::forest;
    if (text == "boost") return ModelKind::boost;
    fail(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(text) + "'");
}

ModelKind kind_of(const ModelSpec& spec) noexcept { return static_cast<ModelKind>(spec.index()); }

ModelKind TrainedModel::kind() const noexcept { return static_cast<ModelKind>(model.index()); }

double TrainedModel::predict_one(std::span<const double> raw_row) const {
    std::vector<double> row(raw_row.begin(), raw_row.end());
    data::apply_minmax_inplace(norm, row);
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, nn::MlpModel>) return nn::forward(m, row);
            else if constexpr (std::is_same_v<T, trees::ForestModel>) return trees::predict_forest(m, row);
            else return trees::predict_boost(m, row);
        },
        model);
}

std::vector<double> TrainedModel::predict(const Matrix& raw_rows) const {
    std::vector<double> out(raw_rows.rows());
    for (std::size_t r = 0; r < raw_rows.rows(); ++r) out[r] = predict_one(raw_rows.row(r));
    return out;
}

TrainedModel fit_model(const ModelSpec& spec, const Matrix& x, std::span<const double> y, std::uint64_t seed,
                       const Matrix* val_x, std::span<const double> val_y) {
    if (x.rows() == 0) fail(ErrorCode::EmptyInput, "no training rows");
    TrainedModel out;
    out.norm = data::fit_minmax(x);
    const Matrix xn = data::apply_minmax(out.norm, x);
    Matrix vn;
    if (val_x && val_x->rows() > 0) vn = data::apply_minmax(out.norm, *val_x);
    const Matrix* vptr = val_x && val_x->rows() > 0 ? &vn : nullptr;

    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MlpSpec>) {
                auto arch = s.architecture;
                arch.input_width = static_cast<int>(x.cols());
                auto cfg = s.train;
                cfg.seed = seed;
                auto result = nn::train(arch, cfg, xn, y, vptr, vptr ? val_y : std::span<const double>{});
                out.model = std::move(result.model);
                out.history = std::move(result.history);
            } else if constexpr (std::is_same_v<T, trees::ForestConfig>) {
                out.model = trees::fit_forest(xn, y, s, seed);
            } else {
                out.model = trees::fit_boost(xn, y, s, seed);
            }
        },
        spec);
    return out;
}

}  // namespace cornyield::model
