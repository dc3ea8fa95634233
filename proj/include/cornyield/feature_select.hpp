#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cornyield/dataset.hpp"

namespace cornyield::fs {

/// Pair counts behind Kendall's rank correlation.
///
/// `tau` is the tie-adjusted tau-b; `tau_a` is (C - D) * 2 / (n (n - 1)).
/// Without ties the two coincide.
struct KendallResult {
    double tau = 0.0;
    double tau_a = 0.0;
    std::size_t n = 0;
    std::int64_t concordant = 0;
    std::int64_t discordant = 0;
    std::int64_t ties_x = 0;   // pairs tied in x (including joint ties)
    std::int64_t ties_y = 0;   // pairs tied in y (including joint ties)
    std::int64_t ties_xy = 0;  // pairs tied in both
};

/// O(n log n) merge-count (Knight's algorithm).
[[nodiscard]] KendallResult kendall_tau(std::span<const double> x, std::span<const double> y);

struct CorrelationReport {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> coefficients_tau_a;
    /// Indices into `names`, by |tau| descending, ties by name.
    std::vector<std::size_t> ranking;
};

/// Kendall tau-b of every numeric explanatory column against the target.
/// Categorical columns (and their one-hot blocks) are excluded.
[[nodiscard]] CorrelationReport correlation_report(const data::Dataset& d);

/// Default |tau| cut-off.
inline constexpr double kDefaultThreshold = 0.07;

[[nodiscard]] std::vector<std::string> select_features(const CorrelationReport& report,
                                                       double threshold = kDefaultThreshold);

/// CSV columns: variable, tau, tau_a, rank, selected.
[[nodiscard]] std::string report_csv(const CorrelationReport& report, double threshold);

}  // namespace cornyield::fs
