#pragma once

#include <cstddef>
#include <span>

namespace cornyield::metrics {

/// Errors in target units (t/ha). `arse` is always (rmse + mae) / 2.
struct MetricsReport {
    double rmse = 0.0;
    double mae = 0.0;
    double arse = 0.0;
    std::size_t n = 0;
};

[[nodiscard]] double rmse(std::span<const double> pred, std::span<const double> actual);
[[nodiscard]] double mae(std::span<const double> pred, std::span<const double> actual);

/// Average of absolute root squared error: the mean of RMSE and MAE.
[[nodiscard]] constexpr double arse_of(double rmse_value, double mae_value) noexcept {
    return (rmse_value + mae_value) / 2.0;
}

[[nodiscard]] MetricsReport arse(std::span<const double> pred, std::span<const double> actual);

}  // namespace cornyield::metrics
