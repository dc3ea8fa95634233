#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cornyield/metrics.hpp"
#include "cornyield/model.hpp"

namespace cornyield::tuning {

using GridValue = std::variant<std::int64_t, double, bool, std::string>;

[[nodiscard]] std::string to_string(const GridValue& v);

/// Sets one named hyperparameter on a spec. Throws InvalidArgument for names
/// the model family does not have or values of the wrong type.
void set_param(model::ModelSpec& spec, std::string_view name, const GridValue& value);

struct GridSpec {
    std::vector<std::pair<std::string, std::vector<GridValue>>> params;
    int folds = 10;

    void validate() const;
    [[nodiscard]] std::size_t combinations() const noexcept;
    /// Combination `index`, the last parameter varying fastest.
    [[nodiscard]] std::vector<std::pair<std::string, GridValue>> cell(std::size_t index) const;
};

struct GridCell {
    std::vector<std::pair<std::string, GridValue>> params;
    double mean_mae = 0.0;
    bool failed = false;
    std::string error;
};

struct GridResult {
    model::ModelSpec best;
    std::size_t best_index = 0;
    std::vector<GridCell> cells;
};

[[nodiscard]] GridResult grid_search(const model::ModelSpec& base, const GridSpec& grid, const Matrix& x,
                                     std::span<const double> y, std::uint64_t seed);
[[nodiscard]] std::string grid_csv(const GridResult& r);

enum class EvalMode { kfold, bootstrap };

struct EvalRun {
    std::string tag;
    EvalMode mode = EvalMode::kfold;
    std::uint64_t seed = 0;
    std::vector<metrics::MetricsReport> splits;
    /// Rows each bootstrap replicate trained on.
    std::vector<std::size_t> resample_sizes;
};

/// Shuffled, contiguous folds whose sizes differ by at most one.
[[nodiscard]] std::vector<std::vector<std::size_t>> kfold_indices(std::size_t rows, int k, std::uint64_t seed);

[[nodiscard]] EvalRun kfold_cv(const model::ModelSpec& spec, const Matrix& x, std::span<const double> y, int k,
                               std::uint64_t seed, std::string tag = {});

inline constexpr int kBootstrapRetries = 5;

/// Trains on a with-replacement resample of the rows and scores out-of-bag.
[[nodiscard]] EvalRun bootstrap_eval(const model::ModelSpec& spec, const Matrix& x, std::span<const double> y,
                                     int replicates, std::uint64_t seed, std::string tag = {});

[[nodiscard]] std::string eval_csv(const std::vector<EvalRun>& runs);

struct PerturbationCase {
    std::string label;  // state
    model::Record base;
    std::vector<std::pair<std::string, double>> perturbed;
    double expected = 0.0;

    /// The base record with the perturbations applied.
    [[nodiscard]] model::Record view() const;
};

/// The Enugu and Plateau records with their reported yields.
[[nodiscard]] std::vector<PerturbationCase> base_cases();
/// Four single-field shifts of the base records.
[[nodiscard]] std::vector<PerturbationCase> unforeseen_cases();

using Predictor = std::function<double(const model::Record&, const std::string& state)>;

struct SinglePointRow {
    std::string label;
    std::string kind;  // "base" or "unforeseen"
    std::string field;
    double value = 0.0;
    double predicted = 0.0;
    double expected = 0.0;
    double residual = 0.0;
    double base_prediction = 0.0;
    double delta = 0.0;  // predicted - base_prediction
    bool changed = false;
    /// Whether the change moved the prediction the way the correlation sign says.
    std::optional<bool> direction_ok;
};

/// `signs` maps a field to the sign of its correlation with yield.
[[nodiscard]] std::vector<SinglePointRow> single_point_eval(const Predictor& predict,
                                                            std::span<const PerturbationCase> cases,
                                                            const std::map<std::string, double>& signs = {});
[[nodiscard]] std::string single_point_csv(std::span<const SinglePointRow> rows);

struct AblationResult {
    metrics::MetricsReport with_selection;
    metrics::MetricsReport without_selection;
    metrics::MetricsReport delta;  // with - without
};

struct SplitMatrices {
    Matrix train_x;
    std::vector<double> train_y;
    Matrix test_x;
    std::vector<double> test_y;
};

/// Trains once per feature set with the same seed and scores each on its test rows.
[[nodiscard]] AblationResult ablation_feature_selection(const model::ModelSpec& spec, const SplitMatrices& full,
                                                        const SplitMatrices& selected, std::uint64_t seed);

}  // namespace cornyield::tuning
