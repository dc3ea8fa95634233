#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cornyield/dataset.hpp"
#include "cornyield/model.hpp"
#include "cornyield/tuning_eval.hpp"

namespace cornyield::config {

struct NamedModel {
    std::string tag;
    model::ModelSpec spec;
};

struct NamedGrid {
    std::string tag;
    tuning::GridSpec grid;
};

struct SplitConfig {
    std::optional<std::size_t> train, val, test;    // explicit counts
    std::optional<double> train_ratio, val_ratio;   // or shares
};

/// Per-record state yields and hectares come from these series.
struct PreprocessConfig {
    std::vector<std::filesystem::path> tables;
    std::string key = "district";
    std::filesystem::path yield_series;
    std::filesystem::path area_series;
    int forecast_steps = 6;
    double expected_max_yield = 0.0;
    double expected_max_hectares = 0.0;
    /// Unset means the largest value in the merged column.
    std::optional<double> original_yield;
    std::optional<double> original_hectares;
    std::string yield_column = "yield_t_ha";
    std::string area_column = "cultivation_area_ha";
    std::string state_column = "state";
    std::string year_column = "year";
};

struct PipelineConfig {
    std::filesystem::path source;  // the config file itself
    std::uint64_t seed = 0;
    std::string created_at = "1970-01-01T00:00:00Z";
    std::filesystem::path output_dir;
    std::filesystem::path dataset;
    std::filesystem::path schema;
    std::string state_column = "state";
    SplitConfig split;
    double threshold = 0.07;
    std::vector<std::string> features;  // explicit selection overrides the threshold
    std::vector<NamedModel> models;
    std::vector<NamedGrid> grids;
    int bootstrap_replicates = 10;
    int kfold = 10;
    bool ablation = true;
    std::vector<std::string> evaluate_models;
    std::optional<PreprocessConfig> preprocess;
    double bags_per_tonne = 10.0;
    std::string host = "127.0.0.1";
    int port = 8080;

    [[nodiscard]] const NamedModel& model(std::string_view tag) const;
    [[nodiscard]] const NamedGrid* grid(std::string_view tag) const noexcept;
};

/// Paths inside the file are relative to the file's directory. A missing
/// seed is a ConfigError.
[[nodiscard]] PipelineConfig load(const std::filesystem::path& path);
[[nodiscard]] PipelineConfig parse(std::string_view yaml, const std::filesystem::path& base_dir);

/// Default specification for a model tag (dnnr16, dnnr64, rfr, xgbr).
[[nodiscard]] model::ModelSpec default_spec(std::string_view tag);

}  // namespace cornyield::config
