#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cornyield::ts {

/// Yearly, time-ordered observations. When `log_transformed` is set, `values`
/// hold log(x) and forecasts are exponentiated back to the original scale.
struct Series {
    std::vector<double> values;
    std::string label;
    bool log_transformed = false;

    /// Takes strictly positive raw values and stores their logarithms.
    [[nodiscard]] static Series logged(std::span<const double> raw, std::string label);
    /// Values on the original scale.
    [[nodiscard]] std::vector<double> levels() const;
};

struct ArimaOrder {
    int p = 0;  // autoregressive lags
    int d = 0;  // differencing passes
    int q = 0;  // moving-average lags

    void validate() const;
    friend bool operator==(const ArimaOrder&, const ArimaOrder&) = default;
};

struct ArimaOptions {
    bool include_constant = true;
    int max_iterations = 1000;
    double gradient_tolerance = 1e-10;
    double function_tolerance = 1e-14;
};

struct ArimaModel {
    ArimaOrder order;
    double alpha = 0.0;
    std::vector<double> ar;  // beta_1 .. beta_p
    std::vector<double> ma;  // phi_1 .. phi_q
    /// Residuals of the differenced series from t = p onward.
    std::vector<double> residuals;
    double sigma2 = 0.0;
    bool include_constant = true;
    /// True when every root of the AR polynomial lies outside the unit circle.
    /// Reported, not enforced.
    bool ar_stationary = true;
    int iterations = 0;
};

struct AdfResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int lags_used = 0;
    bool stationary = false;  // p_value < 0.05
};

inline constexpr double kAdfSignificance = 0.05;

/// MacKinnon (2010) response-surface p-value, constant-only regression, one variable.
[[nodiscard]] double mackinnon_p_value(double statistic);

/// Regresses dy_t on a constant, y_{t-1} and `max_lag` lagged differences.
[[nodiscard]] AdfResult adf_test(std::span<const double> values, int max_lag = 1);
[[nodiscard]] AdfResult adf_test(const Series& s, int max_lag = 1);

[[nodiscard]] std::vector<double> difference(std::span<const double> values, int d);
[[nodiscard]] Series difference(const Series& s, int d);

/// Inverse of `difference`: given the d levels preceding `diffs`, rebuilds
/// the levels that follow them.
[[nodiscard]] std::vector<double> integrate(std::span<const double> levels_tail,
                                            std::span<const double> diffs);

/// Sample autocorrelation, acf[0] = 1.
[[nodiscard]] std::vector<double> acf(std::span<const double> values, int max_lag);
/// Partial autocorrelation via Durbin-Levinson, pacf[0] = 1.
[[nodiscard]] std::vector<double> pacf(std::span<const double> values, int max_lag);

/// Conditional sum-of-squares fit of the differenced series.
[[nodiscard]] ArimaModel fit_arima(const Series& s, ArimaOrder order, const ArimaOptions& options = {});

/// Recursive h-step forecast with future innovations set to zero.
[[nodiscard]] std::vector<double> forecast(const ArimaModel& m, const Series& s, int h);

inline constexpr int kMaxOrder = 5;

[[nodiscard]] ArimaOrder select_order(const Series& s);

// ---------------------------------------------------------------------------
// Long-format (state, year, value) series files.

struct YearValue {
    int year = 0;
    double value = 0.0;
    bool forecasted = false;
};

using SeriesTable = std::map<std::string, std::vector<YearValue>>;

[[nodiscard]] SeriesTable read_long_csv(const std::filesystem::path& path);
[[nodiscard]] std::string long_csv(const SeriesTable& table);

struct ExtensionReport {
    std::string label;
    ArimaOrder order;
    double adf_p_value = 1.0;
    bool fallback = false;
};

/// Appends `steps` forecasted years to every series of the table.
[[nodiscard]] SeriesTable extend(const SeriesTable& table, int steps, bool log_transform,
                                 std::vector<ExtensionReport>* report = nullptr);

}  // namespace cornyield::ts
