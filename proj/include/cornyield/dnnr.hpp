#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cornyield/matrix.hpp"

namespace cornyield::nn {

enum class Activation { relu };
enum class Optimizer { adam, sgd };

struct MlpArchitecture {
    int input_width = 30;
    int hidden_depth = 3;
    int hidden_width = 64;
    Activation activation = Activation::relu;
    int output_width = 1;

    /// Depth 0 gives a single affine layer.
    void validate() const;
    [[nodiscard]] std::size_t parameter_count() const noexcept;

    [[nodiscard]] static MlpArchitecture dnnr16() { return {30, 3, 16, Activation::relu, 1}; }
    [[nodiscard]] static MlpArchitecture dnnr64() { return {30, 3, 64, Activation::relu, 1}; }

    friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;
};

struct MlpModel {
    MlpArchitecture architecture;
    std::vector<Layer> layers;

    void check() const;
};

struct TrainConfig {
    int epochs = 60;
    int batch_size = 100;
    double learning_rate = 0.001;
    Optimizer optimizer = Optimizer::adam;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

struct OptimizerState {
    std::vector<Layer> first;
    std::vector<Layer> second;
    long step_count = 0;
};

using Gradients = std::vector<Layer>;

struct EpochLoss {
    int epoch = 0;
    double train_mae = 0.0;
    double val_mae = 0.0;  // NaN without a validation set
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochLoss> history;
};

/// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
[[nodiscard]] MlpModel init_mlp(const MlpArchitecture& arch, std::uint64_t seed);

[[nodiscard]] double forward(const MlpModel& m, std::span<const double> x);
[[nodiscard]] std::vector<double> predict(const MlpModel& m, const Matrix& rows);

[[nodiscard]] double loss_mae(std::span<const double> pred, std::span<const double> target);

/// Gradient of the batch MAE with respect to every weight and bias.
[[nodiscard]] Gradients backward(const MlpModel& m, const Matrix& x, std::span<const double> y,
                                 double* loss = nullptr);

/// d forward(x) / d x.
[[nodiscard]] std::vector<double> input_gradient(const MlpModel& m, std::span<const double> x);

/// Product of the layer spectral norms; bounds |f(x) - f(x')| / |x - x'|.
[[nodiscard]] double lipschitz_bound(const MlpModel& m);

void apply_update(MlpModel& m, const Gradients& g, const TrainConfig& cfg, OptimizerState& state);

[[nodiscard]] TrainResult train(const MlpArchitecture& arch, const TrainConfig& cfg, const Matrix& x,
                                std::span<const double> y, const Matrix* val_x = nullptr,
                                std::span<const double> val_y = {});

[[nodiscard]] std::string loss_history_csv(const std::vector<EpochLoss>& history);

}  // namespace cornyield::nn
