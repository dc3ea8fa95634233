#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cornyield/dataset.hpp"
#include "cornyield/model.hpp"

namespace cornyield::synth {

/// The 23 states, lexicographic.
[[nodiscard]] const std::vector<std::string>& states();

/// district, weather, soil, area, state, year and yield columns.
[[nodiscard]] data::VariableSchema canonical_schema();

struct SynthOptions {
    std::uint64_t seed = 7;
    std::size_t unique_rows = 1632;
    std::size_t duplicate_rows = 120;
    std::size_t incomplete_rows = 75;
    double noise_sd = 0.02;
};

/// Noise-free yield of a record for a state.
[[nodiscard]] double true_yield(const model::Record& r, const std::string& state);

/// Model-ready table with duplicates and incomplete rows mixed in.
[[nodiscard]] std::string dataset_csv(const SynthOptions& opt);

struct RawFiles {
    std::vector<std::filesystem::path> tables;
    std::filesystem::path yield_series;
    std::filesystem::path area_series;
};

/// Inputs for the preprocessing step: per-resolution observation tables and
/// state-level yield and area histories that stop before the observation years.
RawFiles write_raw(const std::filesystem::path& dir, const SynthOptions& opt);

}  // namespace cornyield::synth
