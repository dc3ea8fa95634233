#include "cornyield/metrics.hpp"

#include <cmath>
#include <string>

#include "cornyield/error.hpp"

namespace cornyield::metrics {

namespace {

void check(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size())
        fail(ErrorCode::LengthMismatch, "prediction length " + std::to_string(pred.size()) +
                                            " != actual length " + std::to_string(actual.size()));
    if (pred.empty()) fail(ErrorCode::EmptyInput, "metrics need at least one point");
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> actual) {
    check(pred, actual);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - actual[i];
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(pred.size()));
}

double mae(std::span<const double> pred, std::span<const double> actual) {
    check(pred, actual);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - actual[i]);
    return sum / static_cast<double>(pred.size());
}

MetricsReport arse(std::span<const double> pred, std::span<const double> actual) {
    MetricsReport r;
    r.rmse = rmse(pred, actual);
    r.mae = mae(pred, actual);
    r.arse = arse_of(r.rmse, r.mae);
    r.n = pred.size();
    return r;
}

}  // namespace cornyield::metrics
