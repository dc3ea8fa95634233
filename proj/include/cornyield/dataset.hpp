#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cornyield/matrix.hpp"

namespace cornyield::data {

/// Missing numeric cells are stored as quiet NaN; missing labels as "".
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

enum class VariableKind { numeric, categorical, target, id };

[[nodiscard]] std::string_view to_string(VariableKind kind) noexcept;
[[nodiscard]] VariableKind parse_variable_kind(std::string_view text);

struct Variable {
    std::string name;
    VariableKind kind = VariableKind::numeric;
    std::string unit;
    /// Frozen category order for categorical variables (lexicographic).
    std::vector<std::string> categories;

    friend bool operator==(const Variable&, const Variable&) = default;
};

/// Ordered column declarations. Exactly one target, unique non-empty names.
class VariableSchema {
public:
    VariableSchema() = default;
    explicit VariableSchema(std::vector<Variable> variables);

    [[nodiscard]] const std::vector<Variable>& variables() const noexcept { return variables_; }
    [[nodiscard]] const Variable& target() const;
    [[nodiscard]] const Variable* find(std::string_view name) const noexcept;
    [[nodiscard]] std::vector<std::string> names_of(VariableKind kind) const;

    friend bool operator==(const VariableSchema&, const VariableSchema&) = default;

private:
    std::vector<Variable> variables_;
};

/// Reads the YAML schema file (a `columns:` list of name/kind/unit/categories).
[[nodiscard]] VariableSchema load_schema(const std::filesystem::path& path);
void save_schema(const VariableSchema& schema, const std::filesystem::path& path);

struct LabelColumn {
    std::string name;
    std::vector<std::string> values;

    friend bool operator==(const LabelColumn&, const LabelColumn&) = default;
};

struct OneHotBlock {
    std::string source;
    std::vector<std::string> categories;
    std::size_t first_column = 0;

    friend bool operator==(const OneHotBlock&, const OneHotBlock&) = default;
};

/// Column-typed table. Numeric, target and one-hot columns live in `values`;
/// categorical columns that are not yet encoded live in `labels`.
struct Dataset {
    VariableSchema schema;
    std::vector<std::string> columns;
    Matrix values;
    std::vector<LabelColumn> labels;
    std::vector<OneHotBlock> blocks;
    std::vector<std::string> row_ids;

    [[nodiscard]] std::size_t n_rows() const noexcept { return values.rows(); }
    /// Model input width: every matrix column except the target.
    [[nodiscard]] std::size_t n_features() const noexcept;
    [[nodiscard]] std::size_t column_index(std::string_view name) const;
    [[nodiscard]] bool has_column(std::string_view name) const noexcept;
    [[nodiscard]] std::vector<double> column(std::string_view name) const;
    [[nodiscard]] std::vector<double> target() const;
    [[nodiscard]] const LabelColumn& label(std::string_view name) const;
    [[nodiscard]] const OneHotBlock* block(std::string_view source) const noexcept;
    [[nodiscard]] Dataset select_rows(std::span<const std::size_t> indices) const;

    friend bool operator==(const Dataset&, const Dataset&);
};

[[nodiscard]] Dataset load_csv(const std::filesystem::path& path, const VariableSchema& schema);
[[nodiscard]] Dataset parse_csv(std::string_view text, const VariableSchema& schema);

/// Writes columns in matrix order followed by label columns; NaN as empty cell.
void write_csv(const Dataset& d, const std::filesystem::path& path);
[[nodiscard]] std::string to_csv(const Dataset& d);

/// Drops rows with missing cells, then exact duplicates (ignoring row ids).
[[nodiscard]] Dataset clean(const Dataset& d);

/// Per-key mean of every numeric column across tables sharing one schema.
[[nodiscard]] Dataset aggregate_mean(std::span<const Dataset> tables, std::string_view key);

struct SmallholderScaleConfig {
    double expected_max_yield = 0.0;     // E_y, t/ha
    double expected_max_hectares = 0.0;  // E_h, ha
    double original_yield = 0.0;         // O_t
    double original_hectares = 0.0;      // O_h

    void validate() const;
};

enum class ScaleTarget { yield, hectare };

[[nodiscard]] double scale_to_smallholder(double value, const SmallholderScaleConfig& cfg,
                                          ScaleTarget which);

/// Replaces a label column by one binary column per category, named "column=category".
[[nodiscard]] Dataset one_hot(const Dataset& d, std::string_view column,
                              const std::vector<std::string>& categories);

struct SplitSpec {
    std::size_t train_count = 0;
    std::size_t val_count = 0;
    std::size_t test_count = 0;
    std::uint64_t seed = 0;

    /// Rounds train and validation shares; the test set takes the remainder.
    [[nodiscard]] static SplitSpec from_ratio(std::size_t total, double train_fraction,
                                              double val_fraction, std::uint64_t seed);
};

struct SplitResult {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Permutation of row indices used by `split`; exposed for audit.
[[nodiscard]] std::vector<std::size_t> split_permutation(std::size_t rows, std::uint64_t seed);
[[nodiscard]] SplitResult split(const Dataset& d, const SplitSpec& spec);

struct MinMaxParams {
    std::vector<double> min;
    std::vector<double> max;

    [[nodiscard]] std::size_t width() const noexcept { return min.size(); }
    friend bool operator==(const MinMaxParams&, const MinMaxParams&) = default;
};

[[nodiscard]] MinMaxParams fit_minmax(const Matrix& train);
[[nodiscard]] Matrix apply_minmax(const MinMaxParams& params, const Matrix& rows);
[[nodiscard]] Matrix invert_minmax(const MinMaxParams& params, const Matrix& rows);
void apply_minmax_inplace(const MinMaxParams& params, std::span<double> row);

}  // namespace cornyield::data
