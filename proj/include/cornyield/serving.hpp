#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cornyield/metrics.hpp"
#include "cornyield/model.hpp"

namespace cornyield::serving {

inline constexpr int kFormatVersion = 1;
inline constexpr double kDefaultBagsPerTonne = 10.0;

struct TestMetrics {
    metrics::MetricsReport report;
    double max_abs_residual = 0.0;
};

/// Self-contained persisted model: everything needed to turn a request into
/// a prediction.
struct ModelEnvelope {
    int format_version = kFormatVersion;
    std::string model_tag;
    model::FeatureLayout layout;
    model::TrainedModel model;
    std::string created_at = "1970-01-01T00:00:00Z";
    std::uint64_t training_seed = 0;
    std::optional<TestMetrics> test_metrics;

    /// Checks width agreement between layout, normalizer and model.
    void check() const;
    [[nodiscard]] double predict(const model::Record& record, std::string_view state) const;
};

[[nodiscard]] nlohmann::json to_json(const ModelEnvelope& env);
[[nodiscard]] ModelEnvelope from_json(const nlohmann::json& j);
[[nodiscard]] std::string serialize(const ModelEnvelope& env);
[[nodiscard]] ModelEnvelope parse(std::string_view text);

void save_model(const ModelEnvelope& env, const std::filesystem::path& path);
[[nodiscard]] ModelEnvelope load_model(const std::filesystem::path& path);

struct HttpResult {
    int status = 200;
    std::string body;
};

/// Request handling independent of any transport. Handlers never mutate the
/// service and may run concurrently.
class Service {
public:
    explicit Service(ModelEnvelope envelope, double bags_per_tonne = kDefaultBagsPerTonne);

    [[nodiscard]] HttpResult handle_predict(std::string_view body) const;
    [[nodiscard]] HttpResult handle_whatif(std::string_view body) const;
    [[nodiscard]] HttpResult handle_health() const;

    /// Response document for a parsed request object; throws Error.
    [[nodiscard]] nlohmann::json respond(const nlohmann::json& request) const;

    [[nodiscard]] const ModelEnvelope& envelope() const noexcept { return envelope_; }
    [[nodiscard]] double bags_per_tonne() const noexcept { return bags_per_tonne_; }

private:
    ModelEnvelope envelope_;
    double bags_per_tonne_;
    std::chrono::steady_clock::time_point started_;
};

/// HTTP status used for an error code.
[[nodiscard]] int status_for(ErrorCode code) noexcept;

/// JSON HTTP front end for a Service.
class HttpServer {
public:
    explicit HttpServer(const Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to `port` (0 picks a free one) and serves on a background thread.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cornyield::serving
