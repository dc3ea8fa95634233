#include "cornyield/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "cornyield/csv.hpp"
#include "cornyield/error.hpp"

namespace cornyield::ts {

Series Series::logged(std::span<const double> raw, std::string label) {
    Series s;
    s.label = std::move(label);
    s.log_transformed = true;
    s.values.reserve(raw.size());
    for (double v : raw) {
        if (!(v > 0.0) || !std::isfinite(v))
            fail(ErrorCode::InvalidArgument, "log transform needs strictly positive values");
        s.values.push_back(std::log(v));
    }
    return s;
}

std::vector<double> Series::levels() const {
    if (!log_transformed) return values;
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](double v) { return std::exp(v); });
    return out;
}

void ArimaOrder::validate() const {
    if (p < 0 || d < 0 || q < 0) fail(ErrorCode::InvalidArgument, "ARIMA orders must be non-negative");
    if (p + q < 1 && d < 1) fail(ErrorCode::InvalidArgument, "ARIMA(0,0,0) models nothing");
}

// ---------------------------------------------------------------------------
// ADF

double mackinnon_p_value(double statistic) {
    // Constant-only regression, N = 1.
    constexpr double tau_max = 2.74;
    constexpr double tau_min = -18.83;
    constexpr double tau_star = -1.61;
    constexpr double small_p[] = {2.1659, 1.4412, 0.038269};
    constexpr double large_p[] = {1.7339, 0.93202, -0.12745, -0.010368};
    if (std::isnan(statistic)) return 1.0;
    if (statistic > tau_max) return 1.0;
    if (statistic < tau_min) return 0.0;
    double z = 0.0;
    if (statistic <= tau_star) {
        z = small_p[0] + statistic * (small_p[1] + statistic * small_p[2]);
    } else {
        z = large_p[0] + statistic * (large_p[1] + statistic * (large_p[2] + statistic * large_p[3]));
    }
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

AdfResult adf_test(std::span<const double> y, int max_lag) {
    if (max_lag < 0) fail(ErrorCode::InvalidArgument, "max_lag must be non-negative");
    const int n = static_cast<int>(y.size());
    const int lags = max_lag;
    const int k = 2 + lags;
    const int m = n - 1 - lags;
    if (n <= max_lag + 2 || m <= k)
        fail(ErrorCode::SeriesTooShort, "ADF test with " + std::to_string(lags) + " lag(s) needs more than " +
                                            std::to_string(std::max(max_lag + 2, 2 * lags + 3)) +
                                            " observations, got " + std::to_string(n));
    AdfResult r;
    r.lags_used = lags;

    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*lo == *hi) {
        // A constant series is trivially stationary.
        r.statistic = -std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        r.stationary = true;
        return r;
    }

    Eigen::MatrixXd x(m, k);
    Eigen::VectorXd target(m);
    for (int row = 0; row < m; ++row) {
        const int t = row + 1 + lags;
        target(row) = y[t] - y[t - 1];
        x(row, 0) = 1.0;
        x(row, 1) = y[t - 1];
        for (int i = 1; i <= lags; ++i) x(row, 1 + i) = y[t - i] - y[t - i - 1];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < k) {
        r.statistic = std::numeric_limits<double>::quiet_NaN();
        r.p_value = 1.0;
        r.stationary = false;
        return r;
    }
    const Eigen::VectorXd beta = qr.solve(target);
    const Eigen::VectorXd resid = target - x * beta;
    const double s2 = resid.squaredNorm() / static_cast<double>(m - k);
    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
    const double se = std::sqrt(s2 * xtx_inv(1, 1));
    if (se == 0.0) {
        r.statistic = beta(1) < 0.0 ? -std::numeric_limits<double>::infinity()
                                    : std::numeric_limits<double>::quiet_NaN();
    } else {
        r.statistic = beta(1) / se;
    }
    r.p_value = mackinnon_p_value(r.statistic);
    r.stationary = r.p_value < kAdfSignificance;
    return r;
}

AdfResult adf_test(const Series& s, int max_lag) { return adf_test(std::span<const double>(s.values), max_lag); }

// ---------------------------------------------------------------------------
// Differencing

std::vector<double> difference(std::span<const double> values, int d) {
    if (d < 0) fail(ErrorCode::InvalidArgument, "differencing order must be non-negative");
    if (static_cast<std::size_t>(d) >= values.size() && d > 0)
        fail(ErrorCode::SeriesTooShort, "cannot difference " + std::to_string(values.size()) +
                                            " values " + std::to_string(d) + " time(s)");
    std::vector<double> out(values.begin(), values.end());
    for (int pass = 0; pass < d; ++pass) {
        for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
        out.pop_back();
    }
    return out;
}

Series difference(const Series& s, int d) {
    Series out;
    out.values = difference(std::span<const double>(s.values), d);
    out.label = s.label;
    out.log_transformed = s.log_transformed;
    return out;
}

std::vector<double> integrate(std::span<const double> levels_tail, std::span<const double> diffs) {
    const std::size_t d = levels_tail.size();
    // last[k] holds the final value of the k-times differenced tail.
    std::vector<double> last(d);
    std::vector<double> current(levels_tail.begin(), levels_tail.end());
    for (std::size_t k = 0; k < d; ++k) {
        last[k] = current.back();
        for (std::size_t i = 0; i + 1 < current.size(); ++i) current[i] = current[i + 1] - current[i];
        current.pop_back();
    }
    std::vector<double> out(diffs.begin(), diffs.end());
    for (std::size_t k = d; k-- > 0;) {
        double running = last[k];
        for (double& v : out) {
            running += v;
            v = running;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Correlograms

std::vector<double> acf(std::span<const double> values, int max_lag) {
    const int n = static_cast<int>(values.size());
    if (max_lag < 0) fail(ErrorCode::InvalidArgument, "max_lag must be non-negative");
    if (max_lag >= n) fail(ErrorCode::SeriesTooShort, "acf lag must be smaller than the series length");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double c0 = 0.0;
    for (double v : values) c0 += (v - mean) * (v - mean);
    std::vector<double> out(static_cast<std::size_t>(max_lag) + 1, 0.0);
    out[0] = 1.0;
    if (c0 == 0.0) return out;
    for (int k = 1; k <= max_lag; ++k) {
        double ck = 0.0;
        for (int t = k; t < n; ++t) ck += (values[t] - mean) * (values[t - k] - mean);
        out[k] = ck / c0;
    }
    return out;
}

namespace {

// Durbin-Levinson: returns AR coefficients of order `order` and fills the
// partial autocorrelations along the way.
std::vector<double> durbin_levinson(std::span<const double> r, int order, std::vector<double>* partial) {
    std::vector<double> phi(order, 0.0);
    std::vector<double> prev(order, 0.0);
    double v = r[0];
    if (partial) partial->assign(static_cast<std::size_t>(order) + 1, 0.0);
    if (partial) (*partial)[0] = 1.0;
    for (int k = 1; k <= order; ++k) {
        if (v <= 0.0) break;
        double num = r[k];
        for (int j = 1; j < k; ++j) num -= prev[j - 1] * r[k - j];
        const double kappa = num / v;
        phi[k - 1] = kappa;
        for (int j = 1; j < k; ++j) phi[j - 1] = prev[j - 1] - kappa * prev[k - j - 1];
        v *= (1.0 - kappa * kappa);
        prev = phi;
        if (partial) (*partial)[k] = kappa;
    }
    return phi;
}

}  // namespace

std::vector<double> pacf(std::span<const double> values, int max_lag) {
    const auto r = acf(values, max_lag);
    std::vector<double> out;
    durbin_levinson(r, max_lag, &out);
    return out;
}

// ---------------------------------------------------------------------------
// CSS estimation

namespace {

struct CssProblem {
    std::span<const double> w;
    int p;
    int q;
    bool constant;

    [[nodiscard]] int dim() const { return (constant ? 1 : 0) + p + q; }

    void unpack(const Eigen::VectorXd& theta, double& alpha, std::vector<double>& ar,
                std::vector<double>& ma) const {
        int idx = 0;
        alpha = constant ? theta(idx++) : 0.0;
        ar.assign(p, 0.0);
        ma.assign(q, 0.0);
        for (int i = 0; i < p; ++i) ar[i] = theta(idx++);
        for (int j = 0; j < q; ++j) ma[j] = theta(idx++);
    }

    // Full-length innovations (zero before t = p).
    [[nodiscard]] std::vector<double> residuals(double alpha, const std::vector<double>& ar,
                                                const std::vector<double>& ma) const {
        const int n = static_cast<int>(w.size());
        std::vector<double> e(n, 0.0);
        for (int t = p; t < n; ++t) {
            double v = w[t] - alpha;
            for (int i = 1; i <= p; ++i) v -= ar[i - 1] * w[t - i];
            for (int j = 1; j <= q && t - j >= 0; ++j) v -= ma[j - 1] * e[t - j];
            e[t] = v;
        }
        return e;
    }

    double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
        double alpha = 0.0;
        std::vector<double> ar, ma;
        unpack(theta, alpha, ar, ma);
        const int n = static_cast<int>(w.size());
        const int k = dim();
        std::vector<double> e(n, 0.0);
        // de[t * k + j] = d e_t / d theta_j
        std::vector<double> de(static_cast<std::size_t>(n) * k, 0.0);
        double f = 0.0;
        if (grad) grad->setZero(k);
        for (int t = p; t < n; ++t) {
            double v = w[t] - alpha;
            for (int i = 1; i <= p; ++i) v -= ar[i - 1] * w[t - i];
            for (int j = 1; j <= q && t - j >= 0; ++j) v -= ma[j - 1] * e[t - j];
            e[t] = v;
            f += v * v;
            if (!grad) continue;
            double* g = &de[static_cast<std::size_t>(t) * k];
            int idx = 0;
            if (constant) g[idx++] = -1.0;
            for (int i = 1; i <= p; ++i) g[idx++] = -w[t - i];
            for (int j = 1; j <= q; ++j) g[idx++] = t - j >= 0 ? -e[t - j] : 0.0;
            for (int j = 1; j <= q && t - j >= 0; ++j) {
                const double* gp = &de[static_cast<std::size_t>(t - j) * k];
                for (int c = 0; c < k; ++c) g[c] -= ma[j - 1] * gp[c];
            }
            for (int c = 0; c < k; ++c) (*grad)(c) += 2.0 * v * g[c];
        }
        return f;
    }
};

struct BfgsResult {
    Eigen::VectorXd theta;
    int iterations = 0;
    bool converged = false;
};

BfgsResult bfgs(const CssProblem& prob, Eigen::VectorXd theta, const ArimaOptions& opt) {
    const int k = prob.dim();
    Eigen::VectorXd g(k);
    double f = prob.value_and_gradient(theta, &g);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(k, k);
    BfgsResult out;
    bool first = true;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        out.iterations = iter;
        if (g.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance * std::max(1.0, f)) {
            out.converged = true;
            break;
        }
        Eigen::VectorXd dir = -h * g;
        if (dir.dot(g) >= 0.0) {
            h.setIdentity();
            dir = -g;
        }
        if (first) {
            // Keep the first trial step at unit length in parameter space.
            const double norm = dir.norm();
            if (norm > 1.0) dir /= norm;
            first = false;
        }
        double step = 1.0;
        Eigen::VectorXd next;
        Eigen::VectorXd g_next(k);
        double f_next = 0.0;
        bool accepted = false;
        const double slope = dir.dot(g);
        for (int trial = 0; trial < 60; ++trial) {
            next = theta + step * dir;
            f_next = prob.value_and_gradient(next, &g_next);
            if (std::isfinite(f_next) && f_next <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No descent is representable from here.
            out.converged = true;
            break;
        }
        const Eigen::VectorXd s = next - theta;
        const Eigen::VectorXd yv = g_next - g;
        const double sy = s.dot(yv);
        const double f_prev = f;
        theta = next;
        f = f_next;
        g = g_next;
        if (sy > 1e-300) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);
            h = (id - rho * s * yv.transpose()) * h * (id - rho * yv * s.transpose()) +
                rho * s * s.transpose();
        }
        if (f_prev - f <= opt.function_tolerance * std::max(1.0, std::abs(f))) {
            out.converged = true;
            out.iterations = iter + 1;
            break;
        }
    }
    out.theta = theta;
    return out;
}

bool ar_polynomial_stationary(const std::vector<double>& ar) {
    const int p = static_cast<int>(ar.size());
    if (p == 0) return true;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) companion(0, i) = ar[i];
    for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
    const Eigen::VectorXcd roots = companion.eigenvalues();
    for (int i = 0; i < p; ++i)
        if (std::abs(roots(i)) >= 1.0) return false;
    return true;
}

}  // namespace

ArimaModel fit_arima(const Series& s, ArimaOrder order, const ArimaOptions& options) {
    order.validate();
    if (s.values.size() < 3) fail(ErrorCode::SeriesTooShort, "fitting needs at least 3 observations");
    for (double v : s.values)
        if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "series contains non-finite values");

    const auto w = difference(std::span<const double>(s.values), order.d);
    const int n = static_cast<int>(w.size());
    if (n < order.p + order.q + 2)
        fail(ErrorCode::SeriesTooShort, "ARIMA(" + std::to_string(order.p) + "," + std::to_string(order.d) + "," +
                                            std::to_string(order.q) + ") needs " +
                                            std::to_string(order.p + order.q + 2) +
                                            " values after differencing, got " + std::to_string(n));

    const CssProblem prob{w, order.p, order.q, options.include_constant};
    const int k = prob.dim();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(k);
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / n;
    const auto [lo, hi] = std::minmax_element(w.begin(), w.end());

    ArimaModel m;
    m.order = order;
    m.include_constant = options.include_constant;

    if (*lo == *hi && options.include_constant) {
        // Constant differenced series: the constant alone is an exact fit.
        theta(0) = w.front();
    } else if (order.q == 0) {
        // Pure AR: the CSS objective is linear least squares, solved exactly.
        const int rows = n - order.p;
        Eigen::MatrixXd x(rows, k);
        Eigen::VectorXd target(rows);
        for (int r = 0; r < rows; ++r) {
            const int t = r + order.p;
            int c = 0;
            if (options.include_constant) x(r, c++) = 1.0;
            for (int i = 1; i <= order.p; ++i) x(r, c++) = w[t - i];
            target(r) = w[t];
        }
        theta = x.completeOrthogonalDecomposition().solve(target);
    } else {
        // Yule-Walker start for the AR part, MA at zero.
        const int p = order.p;
        int idx = 0;
        std::vector<double> yw;
        if (p > 0) {
            const auto r = acf(w, std::min(p, n - 1));
            yw = durbin_levinson(r, static_cast<int>(r.size()) - 1, nullptr);
            yw.resize(p, 0.0);
        }
        const double ar_sum = std::accumulate(yw.begin(), yw.end(), 0.0);
        if (options.include_constant) theta(idx++) = mean * (1.0 - ar_sum);
        for (int i = 0; i < p; ++i) theta(idx++) = yw[i];
        const auto res = bfgs(prob, theta, options);
        if (!res.converged)
            fail(ErrorCode::NonConvergence, "CSS optimizer did not converge in " +
                                                std::to_string(options.max_iterations) + " iterations");
        theta = res.theta;
        m.iterations = res.iterations;
    }

    prob.unpack(theta, m.alpha, m.ar, m.ma);
    const auto e = prob.residuals(m.alpha, m.ar, m.ma);
    m.residuals.assign(e.begin() + order.p, e.end());
    double sse = 0.0;
    for (double v : m.residuals) sse += v * v;
    m.sigma2 = sse / static_cast<double>(m.residuals.size());
    m.ar_stationary = ar_polynomial_stationary(m.ar);
    return m;
}

std::vector<double> forecast(const ArimaModel& m, const Series& s, int h) {
    if (h < 1) fail(ErrorCode::InvalidArgument, "forecast horizon must be at least 1");
    const int p = m.order.p;
    const int q = m.order.q;
    const int d = m.order.d;
    auto w = difference(std::span<const double>(s.values), d);
    const int n = static_cast<int>(w.size());
    if (n < p) fail(ErrorCode::SeriesTooShort, "series shorter than the AR order");

    const CssProblem prob{w, p, q, m.include_constant};
    auto e = prob.residuals(m.alpha, m.ar, m.ma);
    w.reserve(static_cast<std::size_t>(n + h));
    e.resize(static_cast<std::size_t>(n + h), 0.0);
    for (int step = 0; step < h; ++step) {
        const int t = n + step;
        double v = m.alpha;
        for (int i = 1; i <= p; ++i) v += m.ar[i - 1] * w[t - i];
        for (int j = 1; j <= q && t - j >= 0; ++j) v += m.ma[j - 1] * e[t - j];
        w.push_back(v);
    }
    std::vector<double> ahead(w.begin() + n, w.end());
    if (d > 0) {
        const std::span<const double> all(s.values);
        ahead = integrate(all.subspan(all.size() - d), ahead);
    }
    if (s.log_transformed)
        for (double& v : ahead) v = std::exp(v);
    return ahead;
}

ArimaOrder select_order(const Series& s) {
    if (s.values.size() < 8) fail(ErrorCode::SeriesTooShort, "order selection needs at least 8 observations");
    ArimaOrder order;
    order.d = 2;
    for (int d = 0; d <= 2; ++d) {
        const auto w = difference(std::span<const double>(s.values), d);
        if (adf_test(w, 1).stationary) {
            order.d = d;
            break;
        }
    }
    const auto w = difference(std::span<const double>(s.values), order.d);
    const int n = static_cast<int>(w.size());
    const int max_lag = std::min(kMaxOrder, n - 2);
    const double band = 1.96 / std::sqrt(static_cast<double>(n));
    if (max_lag >= 1) {
        const auto a = acf(w, max_lag);
        const auto pa = pacf(w, max_lag);
        for (int k = 1; k <= max_lag; ++k) {
            if (std::abs(pa[k]) > band) order.p = k;
            if (std::abs(a[k]) > band) order.q = k;
        }
    }
    while (order.p + order.q + 2 > n) {
        if (order.p >= order.q && order.p > 0) --order.p;
        else --order.q;
    }
    if (order.p + order.q == 0 && order.d == 0) order.p = 1;
    return order;
}

// ---------------------------------------------------------------------------
// Long-format files

SeriesTable read_long_csv(const std::filesystem::path& path) {
    const auto rows = csv::parse(csv::read_file(path));
    if (rows.empty()) fail(ErrorCode::MalformedCsv, path.string() + ": missing header");
    const auto& header = rows.front();
    auto find = [&](std::string_view name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            fail(ErrorCode::MalformedCsv, path.string() + ": header lacks '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto state_col = find("state");
    const auto year_col = find("year");
    const auto value_col = find("value");
    SeriesTable table;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            fail(ErrorCode::MalformedCsv, path.string() + ": ragged row " + std::to_string(r + 1));
        double year = 0.0;
        double value = 0.0;
        if (!csv::parse_double(row[year_col], year) || !csv::parse_double(row[value_col], value))
            fail(ErrorCode::TypeError, path.string() + ": row " + std::to_string(r + 1) + " is not numeric");
        table[row[state_col]].push_back({static_cast<int>(year), value, false});
    }
    for (auto& [state, values] : table)
        std::stable_sort(values.begin(), values.end(),
                         [](const YearValue& a, const YearValue& b) { return a.year < b.year; });
    return table;
}

std::string long_csv(const SeriesTable& table) {
    csv::Writer w({"state", "year", "value", "forecasted"});
    for (const auto& [state, values] : table)
        for (const auto& v : values)
            w.add({state, std::to_string(v.year), csv::format_double(v.value), v.forecasted ? "true" : "false"});
    return w.str();
}

SeriesTable extend(const SeriesTable& table, int steps, bool log_transform,
                   std::vector<ExtensionReport>* report) {
    SeriesTable out;
    for (const auto& [state, values] : table) {
        std::vector<double> raw;
        for (const auto& v : values) raw.push_back(v.value);
        const Series s = log_transform ? Series::logged(raw, state) : Series{raw, state, false};

        ExtensionReport rep;
        rep.label = state;
        std::vector<double> ahead;
        try {
            rep.order = select_order(s);
            rep.adf_p_value = adf_test(difference(s, rep.order.d), 1).p_value;
            ahead = forecast(fit_arima(s, rep.order), s, steps);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonConvergence && e.code() != ErrorCode::SeriesTooShort) throw;
            // Persistence forecast when no ARIMA fit is available.
            rep.fallback = true;
            ahead.assign(static_cast<std::size_t>(steps), raw.back());
        }
        auto& dst = out[state] = values;
        const int last_year = values.back().year;
        for (int k = 0; k < steps; ++k) dst.push_back({last_year + k + 1, ahead[k], true});
        if (report) report->push_back(rep);
    }
    return out;
}

}  // namespace cornyield::ts
