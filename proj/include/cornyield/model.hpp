#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cornyield/dataset.hpp"
#include "cornyield/dnnr.hpp"
#include "cornyield/ensembles.hpp"

namespace cornyield::model {

/// Named numeric inputs of one observation.
using Record = std::map<std::string, double, std::less<>>;

/// Column order of the model input: the numeric features, then one
/// indicator per state.
struct FeatureLayout {
    std::vector<std::string> numeric_features;
    std::string state_column = "state";
    std::vector<std::string> states;

    [[nodiscard]] std::size_t width() const noexcept { return numeric_features.size() + states.size(); }
    [[nodiscard]] std::vector<std::string> column_names() const;

    /// Raw (unnormalized) input row. Throws MissingField / UnknownState / NonFiniteValue.
    [[nodiscard]] std::vector<double> assemble(const Record& record, std::string_view state) const;

    /// Raw input matrix from a dataset carrying the numeric columns and the
    /// state one-hot block.
    [[nodiscard]] Matrix matrix(const data::Dataset& d) const;

    /// Layout over `features` plus the dataset's state block.
    [[nodiscard]] static FeatureLayout from_dataset(const data::Dataset& d, std::vector<std::string> features,
                                                    std::string state_column = "state");

    friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

struct MlpSpec {
    nn::MlpArchitecture architecture;
    nn::TrainConfig train;
};

using ModelSpec = std::variant<MlpSpec, trees::ForestConfig, trees::BoostConfig>;

enum class ModelKind { mlp, forest, boost };

[[nodiscard]] std::string_view to_string(ModelKind kind) noexcept;
[[nodiscard]] ModelKind parse_model_kind(std::string_view text);
[[nodiscard]] ModelKind kind_of(const ModelSpec& spec) noexcept;

/// A fitted regressor together with the normalization applied to its inputs.
struct TrainedModel {
    data::MinMaxParams norm;
    std::variant<nn::MlpModel, trees::ForestModel, trees::BoostModel> model;
    std::vector<nn::EpochLoss> history;

    [[nodiscard]] ModelKind kind() const noexcept;
    [[nodiscard]] std::size_t input_width() const noexcept { return norm.width(); }

    /// Predicts from a raw row; normalization happens here.
    [[nodiscard]] double predict_one(std::span<const double> raw_row) const;
    [[nodiscard]] std::vector<double> predict(const Matrix& raw_rows) const;
};

/// Fits normalization on `x` and trains the model. The MLP's input width is
/// taken from `x`. `seed` overrides any seed inside `spec`.
[[nodiscard]] TrainedModel fit_model(const ModelSpec& spec, const Matrix& x, std::span<const double> y,
                                     std::uint64_t seed, const Matrix* val_x = nullptr,
                                     std::span<const double> val_y = {});

}  // namespace cornyield::model
