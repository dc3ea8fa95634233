#include "cornyield/feature_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cornyield/csv.hpp"

namespace cornyield::fs {

namespace {

std::int64_t pairs(std::int64_t k) { return k * (k - 1) / 2; }

// Counts inversions of `v` while merge-sorting it in place.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo,
                         std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = merge_count(v, scratch, lo, mid) + merge_count(v, scratch, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<std::int64_t>(mid - i);
            scratch[k++] = v[j++];
        } else {
            scratch[k++] = v[i++];
        }
    }
    while (i < mid) scratch[k++] = v[i++];
    while (j < hi) scratch[k++] = v[j++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
              scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

// Pairs tied within runs of equal values of a sorted sequence.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq equal) {
    std::int64_t total = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (equal(i - 1, i)) {
            ++run;
        } else {
            total += pairs(static_cast<std::int64_t>(run));
            run = 1;
        }
    }
    return total + pairs(static_cast<std::int64_t>(run));
}

}  // namespace

KendallResult kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        fail(ErrorCode::LengthMismatch, "kendall_tau needs equal-length vectors");
    const std::size_t n = x.size();
    if (n < 2) fail(ErrorCode::DegenerateInput, "kendall_tau needs at least two observations");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    const std::int64_t n0 = pairs(static_cast<std::int64_t>(n));
    const std::int64_t tx = tied_pairs(n, [&](std::size_t a, std::size_t b) {
        return x[order[a]] == x[order[b]];
    });
    const std::int64_t txy = tied_pairs(n, [&](std::size_t a, std::size_t b) {
        return x[order[a]] == x[order[b]] && y[order[a]] == y[order[b]];
    });

    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
    std::vector<double> scratch(n);
    const std::int64_t discordant = merge_count(ys, scratch, 0, n);
    const std::int64_t ty = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });

    if (tx == n0 || ty == n0)
        fail(ErrorCode::DegenerateInput, "kendall_tau is undefined for a constant vector");

    KendallResult r;
    r.n = n;
    r.discordant = discordant;
    r.concordant = n0 - tx - ty + txy - discordant;
    r.ties_x = tx;
    r.ties_y = ty;
    r.ties_xy = txy;
    const double diff = static_cast<double>(r.concordant - r.discordant);
    r.tau_a = diff * 2.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
    r.tau = diff / std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
    return r;
}

CorrelationReport correlation_report(const data::Dataset& d) {
    CorrelationReport report;
    const auto target = d.target();
    for (const auto& v : d.schema.variables()) {
        if (v.kind != data::VariableKind::numeric || !d.has_column(v.name)) continue;
        const auto col = d.column(v.name);
        KendallResult k;
        try {
            k = kendall_tau(col, target);
        } catch (const Error& e) {
            throw Error(e.code(), "column '" + v.name + "': " + e.what());
        }
        report.names.push_back(v.name);
        report.coefficients.push_back(k.tau);
        report.coefficients_tau_a.push_back(k.tau_a);
    }
    report.ranking.resize(report.names.size());
    std::iota(report.ranking.begin(), report.ranking.end(), std::size_t{0});
    std::sort(report.ranking.begin(), report.ranking.end(), [&](std::size_t a, std::size_t b) {
        const double fa = std::abs(report.coefficients[a]);
        const double fb = std::abs(report.coefficients[b]);
        if (fa != fb) return fa > fb;
        return report.names[a] < report.names[b];
    });
    return report;
}

std::vector<std::string> select_features(const CorrelationReport& report, double threshold) {
    if (!(threshold >= 0.0 && threshold < 1.0))
        fail(ErrorCode::InvalidArgument, "selection threshold must lie in [0, 1)");
    std::vector<std::string> out;
    for (auto i : report.ranking)
        if (std::abs(report.coefficients[i]) >= threshold) out.push_back(report.names[i]);
    if (out.empty()) fail(ErrorCode::EmptySelection, "no variable reaches the selection threshold");
    return out;
}

std::string report_csv(const CorrelationReport& report, double threshold) {
    csv::Writer w({"variable", "tau", "tau_a", "rank", "selected"});
    for (std::size_t r = 0; r < report.ranking.size(); ++r) {
        const auto i = report.ranking[r];
        const bool selected = std::abs(report.coefficients[i]) >= threshold;
        w.add({report.names[i], csv::format_double(report.coefficients[i]),
               csv::format_double(report.coefficients_tau_a[i]), std::to_string(r + 1),
               selected ? "true" : "false"});
    }
    return w.str();
}

}  // namespace cornyield::fs
