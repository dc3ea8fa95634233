#include "cornyield/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cornyield/error.hpp"
#include "cornyield/rng.hpp"

namespace cornyield::trees {

int Tree::leaf_of(std::span<const double> row) const {
    int i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
}

double Tree::predict(std::span<const double> row) const { return nodes[leaf_of(row)].value; }

int Tree::depth() const {
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (!nodes[i].is_leaf()) {
            level[nodes[i].left] = level[i] + 1;
            level[nodes[i].right] = level[i] + 1;
        }
    }
    return deepest;
}

std::size_t Tree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int Tree::validate() const {
    if (nodes.empty()) fail(ErrorCode::CorruptFile, "tree has no nodes");
    const int count = static_cast<int>(nodes.size());
    int widest = -1;
    for (int i = 0; i < count; ++i) {
        const auto& n = nodes[i];
        if (n.is_leaf()) continue;
        // Children are stored after their parent, so links cannot form cycles.
        if (n.left <= i || n.right <= i || n.left >= count || n.right >= count)
            fail(ErrorCode::CorruptFile, "tree node " + std::to_string(i) + " has invalid children");
        widest = std::max(widest, n.feature);
    }
    return widest;
}

namespace {

class Builder {
public:
    Builder(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows, const TreeLimits& limits,
            Rng* rng)
        : x_(x), y_(y), rows_(rows), limits_(limits), rng_(rng), features_(x.cols()) {
        const std::size_t m = rows.size();
        order_.resize(features_);
        for (std::size_t f = 0; f < features_; ++f) {
            auto& o = order_[f];
            o.resize(m);
            std::iota(o.begin(), o.end(), std::size_t{0});
            std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
                return x_(rows_[a], f) < x_(rows_[b], f);
            });
        }
        left_.assign(m, 0);
        scratch_.resize(m);
        all_features_.resize(features_);
        std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
    }

    Tree build() {
        Tree t;
        grow(t, 0, rows_.size(), 0);
        return t;
    }

private:
    [[nodiscard]] double target(std::size_t pos) const { return y_[rows_[pos]]; }

    int grow(Tree& t, std::size_t begin, std::size_t end, int depth) {
        const int id = static_cast<int>(t.nodes.size());
        t.nodes.emplace_back();
        const auto& ord = order_.empty() ? all_positions(begin, end) : order_[0];
        const std::size_t count = end - begin;

        double sum = 0.0;
        bool constant = true;
        const double first = target(ord[begin]);
        for (std::size_t i = begin; i < end; ++i) {
            const double v = target(ord[i]);
            sum += v;
            constant = constant && v == first;
        }
        const double leaf_value = constant ? first : sum / static_cast<double>(count);
        const auto min_leaf = static_cast<std::size_t>(std::max(1, limits_.min_samples_leaf));

        if (features_ == 0 || depth >= limits_.max_depth || constant ||
            count < static_cast<std::size_t>(std::max(2, limits_.min_samples_split)) || count < 2 * min_leaf) {
            t.nodes[id].value = leaf_value;
            return id;
        }

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = 0.0;
        for (std::size_t f : candidate_features()) {
            const auto& o = order_[f];
            double sum_left = 0.0;
            for (std::size_t i = begin; i + 1 < end; ++i) {
                sum_left += target(o[i]);
                const std::size_t n_left = i + 1 - begin;
                const std::size_t n_right = count - n_left;
                const double a = x_(rows_[o[i]], f);
                const double b = x_(rows_[o[i + 1]], f);
                if (!(a < b) || n_left < min_leaf || n_right < min_leaf) continue;
                const double mean_left = sum_left / static_cast<double>(n_left);
                const double mean_right = (sum - sum_left) / static_cast<double>(n_right);
                const double diff = mean_left - mean_right;
                const double score = static_cast<double>(n_left) * static_cast<double>(n_right) /
                                     static_cast<double>(count) * diff * diff;
                if (score > best_score) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    double mid = std::midpoint(a, b);
                    if (!(mid < b)) mid = a;
                    best_threshold = mid;
                }
            }
        }
        if (best_feature < 0) {
            t.nodes[id].value = leaf_value;
            return id;
        }

        const auto bf = static_cast<std::size_t>(best_feature);
        std::size_t n_left = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t pos = order_[bf][i];
            left_[pos] = x_(rows_[pos], bf) <= best_threshold ? 1 : 0;
            n_left += left_[pos];
        }
        for (auto& o : order_) {
            std::size_t l = begin;
            std::size_t r = 0;
            for (std::size_t i = begin; i < end; ++i) {
                if (left_[o[i]]) o[l++] = o[i];
                else scratch_[r++] = o[i];
            }
            std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), o.begin() + static_cast<std::ptrdiff_t>(l));
        }

        t.nodes[id].feature = best_feature;
        t.nodes[id].threshold = best_threshold;
        t.nodes[id].value = leaf_value;
        const int left = grow(t, begin, begin + n_left, depth + 1);
        const int right = grow(t, begin + n_left, end, depth + 1);
        t.nodes[id].left = left;
        t.nodes[id].right = right;
        return id;
    }

    const std::vector<std::size_t>& all_positions(std::size_t, std::size_t) {
        if (positions_.size() != rows_.size()) {
            positions_.resize(rows_.size());
            std::iota(positions_.begin(), positions_.end(), std::size_t{0});
        }
        return positions_;
    }

    std::vector<std::size_t> candidate_features() {
        const std::size_t k = limits_.max_features;
        if (k == 0 || k >= features_ || rng_ == nullptr) return all_features_;
        std::vector<std::size_t> pool = all_features_;
        for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng_->index(features_ - i)]);
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    const Matrix& x_;
    std::span<const double> y_;
    std::span<const std::size_t> rows_;
    TreeLimits limits_;
    Rng* rng_;
    std::size_t features_;
    std::vector<std::vector<std::size_t>> order_;
    std::vector<char> left_;
    std::vector<std::size_t> scratch_;
    std::vector<std::size_t> all_features_;
    std::vector<std::size_t> positions_;
};

Tree fit_on_rows(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                 const TreeLimits& limits, Rng* rng) {
    Builder b(x, y, rows, limits, rng);
    return b.build();
}

void check_training(const Matrix& x, std::span<const double> y) {
    if (x.rows() == 0) fail(ErrorCode::EmptyInput, "no training rows");
    if (x.rows() != y.size()) fail(ErrorCode::LengthMismatch, "training rows and targets differ");
}

void check_width(std::size_t expected, std::span<const double> row) {
    if (row.size() != expected)
        fail(ErrorCode::ShapeMismatch, "row has " + std::to_string(row.size()) + " values, model expects " +
                                           std::to_string(expected));
}

}  // namespace

Tree fit_tree(const Matrix& x, std::span<const double> y, const TreeLimits& limits, std::uint64_t seed) {
    check_training(x, y);
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng rng(seed);
    return fit_on_rows(x, y, rows, limits, &rng);
}

void ForestConfig::validate() const {
    if (n_estimators < 1 || max_depth < 1 || min_samples_split < 1 || min_samples_leaf < 1)
        fail(ErrorCode::InvalidArgument, "forest integer settings must be at least 1");
    if (!(feature_subsample > 0.0 && feature_subsample <= 1.0))
        fail(ErrorCode::InvalidArgument, "feature_subsample must lie in (0, 1]");
}

ForestModel fit_forest(const Matrix& x, std::span<const double> y, const ForestConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    check_training(x, y);
    const std::size_t n = x.rows();
    TreeLimits limits;
    limits.max_depth = cfg.max_depth;
    limits.min_samples_split = cfg.min_samples_split;
    limits.min_samples_leaf = cfg.min_samples_leaf;
    limits.max_features = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(cfg.feature_subsample * static_cast<double>(x.cols()))));
    ForestModel m;
    m.config = cfg;
    m.seed = seed;
    m.n_features = x.cols();
    std::vector<std::size_t> rows(n);
    for (int t = 0; t < cfg.n_estimators; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        if (cfg.bootstrap) {
            for (auto& r : rows) r = rng.index(n);
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        m.trees.push_back(fit_on_rows(x, y, rows, limits, &rng));
    }
    return m;
}

double predict_forest(const ForestModel& m, std::span<const double> row) {
    check_width(m.n_features, row);
    if (m.trees.empty()) fail(ErrorCode::ShapeMismatch, "forest has no trees");
    double sum = 0.0;
    for (const auto& t : m.trees) sum += t.predict(row);
    return sum / static_cast<double>(m.trees.size());
}

void BoostConfig::validate() const {
    if (n_estimators < 0 || max_depth < 1) fail(ErrorCode::InvalidArgument, "invalid boosting tree counts");
    if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning_rate must be positive");
    if (!(subsample > 0.0 && subsample <= 1.0)) fail(ErrorCode::InvalidArgument, "subsample must lie in (0, 1]");
    if (!(min_samples_split_fraction >= 0.0 && min_samples_split_fraction <= 1.0))
        fail(ErrorCode::InvalidArgument, "min_samples_split_fraction must lie in [0, 1]");
    if (!(reg_lambda >= 0.0) || !(reg_alpha >= 0.0))
        fail(ErrorCode::InvalidArgument, "regularization strengths must be non-negative");
}

namespace {

double soft_threshold(double v, double alpha) {
    const double mag = std::max(std::abs(v) - alpha, 0.0);
    return v < 0.0 ? -mag : mag;
}

double median(std::vector<double>& v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 == 1 ? v[n / 2] : std::midpoint(v[n / 2 - 1], v[n / 2]);
}

double training_mae(std::span<const double> acc, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - acc[i]);
    return s / static_cast<double>(y.size());
}

BoostModel boost(const Matrix& x, std::span<const double> y, const BoostConfig& cfg, std::uint64_t seed,
                 std::vector<double>* trace) {
    cfg.validate();
    check_training(x, y);
    const std::size_t n = x.rows();
    BoostModel m;
    m.config = cfg;
    m.seed = seed;
    m.n_features = x.cols();
    m.base_prediction = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

    std::vector<double> acc(n, m.base_prediction);
    std::vector<double> residual(n);
    std::vector<double> pseudo(n);
    if (trace) trace->assign(1, training_mae(acc, y));

    Rng rng(derive_seed(seed, 0xb005));
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::size_t used = n;
    if (cfg.subsample < 1.0)
        used = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n))));

    TreeLimits limits;
    limits.max_depth = cfg.max_depth;
    limits.min_samples_leaf = 1;
    limits.min_samples_split =
        std::max(2, static_cast<int>(std::ceil(cfg.min_samples_split_fraction * static_cast<double>(used))));

    for (int round = 0; round < cfg.n_estimators; ++round) {
        std::vector<std::size_t> sample = rows;
        if (used < n) {
            rng.shuffle(sample);
            sample.resize(used);
            std::sort(sample.begin(), sample.end());
        }
        for (std::size_t i = 0; i < n; ++i) {
            residual[i] = y[i] - acc[i];
            pseudo[i] = cfg.loss == BoostLoss::mae ? (residual[i] > 0.0 ? 1.0 : (residual[i] < 0.0 ? -1.0 : 0.0))
                                                   : residual[i];
        }
        Tree t = fit_on_rows(x, pseudo, sample, limits, nullptr);

        std::vector<std::vector<double>> members(t.nodes.size());
        for (std::size_t r : sample) members[t.leaf_of(x.row(r))].push_back(residual[r]);
        for (std::size_t k = 0; k < t.nodes.size(); ++k) {
            if (!t.nodes[k].is_leaf()) continue;
            auto& rs = members[k];
            const double count = static_cast<double>(rs.size());
            double v = 0.0;
            if (rs.empty()) {
                v = 0.0;
            } else if (cfg.loss == BoostLoss::mae) {
                v = soft_threshold(median(rs) * count / (count + cfg.reg_lambda), cfg.reg_alpha);
            } else {
                const double g = std::accumulate(rs.begin(), rs.end(), 0.0);
                v = soft_threshold(g, cfg.reg_alpha) / (count + cfg.reg_lambda);
            }
            t.nodes[k].value = v;
        }
        for (auto& node : t.nodes)
            if (!node.is_leaf()) node.value = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc[i] += cfg.learning_rate * t.predict(x.row(i));
        m.trees.push_back(std::move(t));
        if (trace) trace->push_back(training_mae(acc, y));
    }
    return m;
}

}  // namespace

BoostModel fit_boost(const Matrix& x, std::span<const double> y, const BoostConfig& cfg, std::uint64_t seed) {
    return boost(x, y, cfg, seed, nullptr);
}

BoostModel fit_boost_traced(const Matrix& x, std::span<const double> y, const BoostConfig& cfg, std::uint64_t seed,
                            std::vector<double>& train_mae) {
    return boost(x, y, cfg, seed, &train_mae);
}

double predict_boost(const BoostModel& m, std::span<const double> row) {
    check_width(m.n_features, row);
    double acc = m.base_prediction;
    for (const auto& t : m.trees) acc += m.config.learning_rate * t.predict(row);
    return acc;
}

}  // namespace cornyield::trees
