#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cornyield/matrix.hpp"

namespace cornyield::trees {

/// Flat node storage; `feature < 0` marks a leaf. Rows with
/// x[feature] <= threshold go left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    [[nodiscard]] bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    [[nodiscard]] double predict(std::span<const double> row) const;
    [[nodiscard]] int depth() const;
    [[nodiscard]] std::size_t leaf_count() const;
    /// Leaf index reached by `row`.
    [[nodiscard]] int leaf_of(std::span<const double> row) const;
    /// Checks child links and returns the largest feature index used.
    int validate() const;

    friend bool operator==(const Tree&, const Tree&) = default;
};

struct TreeLimits {
    int max_depth = 10;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    /// Features tried per split; 0 means all of them.
    std::size_t max_features = 0;
};

/// Greedy variance-reduction CART fit. `seed` drives per-split feature sampling.
[[nodiscard]] Tree fit_tree(const Matrix& x, std::span<const double> y, const TreeLimits& limits,
                            std::uint64_t seed = 0);

struct ForestConfig {
    int n_estimators = 10;
    int max_depth = 10;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    bool bootstrap = true;
    double feature_subsample = 1.0 / 3.0;

    void validate() const;
};

struct ForestModel {
    std::vector<Tree> trees;
    ForestConfig config;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
};

[[nodiscard]] ForestModel fit_forest(const Matrix& x, std::span<const double> y, const ForestConfig& cfg,
                                     std::uint64_t seed);
[[nodiscard]] double predict_forest(const ForestModel& m, std::span<const double> row);

enum class BoostLoss { mae, squared };

struct BoostConfig {
    int n_estimators = 900;
    int max_depth = 10;
    double learning_rate = 0.1;
    double min_samples_split_fraction = 0.1;
    double subsample = 1.0;
    double reg_lambda = 1.0;
    double reg_alpha = 0.0;
    BoostLoss loss = BoostLoss::mae;

    void validate() const;
};

struct BoostModel {
    double base_prediction = 0.0;
    std::vector<Tree> trees;
    BoostConfig config;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
};

[[nodiscard]] BoostModel fit_boost(const Matrix& x, std::span<const double> y, const BoostConfig& cfg,
                                   std::uint64_t seed);
/// As fit_boost, also recording the training MAE after each round (index 0 is the base).
[[nodiscard]] BoostModel fit_boost_traced(const Matrix& x, std::span<const double> y, const BoostConfig& cfg,
                                          std::uint64_t seed, std::vector<double>& train_mae);
[[nodiscard]] double predict_boost(const BoostModel& m, std::span<const double> row);

}  // namespace cornyield::trees
