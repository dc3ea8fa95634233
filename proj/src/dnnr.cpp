#include "cornyield/dnnr.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "cornyield/csv.hpp"
#include "cornyield/error.hpp"
#include "cornyield/rng.hpp"

namespace cornyield::nn {

void MlpArchitecture::validate() const {
    if (hidden_depth < 0) fail(ErrorCode::InvalidArgument, "hidden_depth must be non-negative");
    if (input_width < 1 || hidden_width < 1) fail(ErrorCode::InvalidArgument, "layer widths must be at least 1");
    if (output_width != 1) fail(ErrorCode::InvalidArgument, "only scalar outputs are supported");
}

std::size_t MlpArchitecture::parameter_count() const noexcept {
    const auto in = static_cast<std::size_t>(input_width);
    const auto w = static_cast<std::size_t>(hidden_width);
    if (hidden_depth == 0) return in + 1;
    const auto depth = static_cast<std::size_t>(hidden_depth);
    return (in * w + w) + (depth - 1) * (w * w + w) + (w + 1);
}

void MlpModel::check() const {
    if (layers.empty()) fail(ErrorCode::ShapeMismatch, "model has no layers");
    Eigen::Index width = architecture.input_width;
    for (const auto& l : layers) {
        if (l.weights.cols() != width || l.bias.size() != l.weights.rows())
            fail(ErrorCode::ShapeMismatch, "layer shapes do not chain");
        if (!l.weights.allFinite() || !l.bias.allFinite())
            fail(ErrorCode::NonFiniteValue, "model parameters are not finite");
        width = l.weights.rows();
    }
    if (width != 1) fail(ErrorCode::ShapeMismatch, "output layer must have one unit");
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) fail(ErrorCode::InvalidArgument, "epochs and batch_size must be at least 1");
    if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning_rate must be positive");
}

MlpModel init_mlp(const MlpArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    MlpModel m;
    m.architecture = arch;
    Rng rng(derive_seed(seed, 0x1417));
    int in = arch.input_width;
    for (int l = 0; l <= arch.hidden_depth; ++l) {
        const int out = l == arch.hidden_depth ? 1 : arch.hidden_width;
        const double limit = std::sqrt(6.0 / in);
        Layer layer;
        layer.weights.resize(out, in);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
        layer.bias = Eigen::VectorXd::Zero(out);
        m.layers.push_back(std::move(layer));
        in = out;
    }
    return m;
}

double forward(const MlpModel& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.architecture.input_width)
        fail(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.size()) + " values, model expects " +
                                           std::to_string(m.architecture.input_width));
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const std::size_t last = m.layers.size() - 1;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        Eigen::VectorXd z = m.layers[l].weights * a + m.layers[l].bias;
        if (l != last) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a(0);
}

std::vector<double> predict(const MlpModel& m, const Matrix& rows) {
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = forward(m, rows.row(r));
    return out;
}

double loss_mae(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) fail(ErrorCode::LengthMismatch, "prediction and target lengths differ");
    if (pred.empty()) fail(ErrorCode::EmptyInput, "loss of an empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(target[i] - pred[i]);
    return s / static_cast<double>(pred.size());
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Gradients backward(const MlpModel& m, const Matrix& x, std::span<const double> y, double* loss) {
    if (x.rows() == 0) fail(ErrorCode::EmptyInput, "empty batch");
    if (x.rows() != y.size()) fail(ErrorCode::LengthMismatch, "batch rows and targets differ");
    if (static_cast<int>(x.cols()) != m.architecture.input_width)
        fail(ErrorCode::ShapeMismatch, "batch width does not match model input");
    const auto b = static_cast<Eigen::Index>(x.rows());
    const auto in = static_cast<Eigen::Index>(x.cols());
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMajor> xm(x.data().data(), b, in);

    // Column j of each activation matrix is sample j.
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(m.layers.size() + 1);
    acts.push_back(xm.transpose());
    const std::size_t last = m.layers.size() - 1;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        Eigen::MatrixXd z = (m.layers[l].weights * acts.back()).colwise() + m.layers[l].bias;
        if (l != last) z = z.cwiseMax(0.0);
        acts.push_back(std::move(z));
    }

    const Eigen::MatrixXd& out = acts.back();
    Eigen::MatrixXd delta(1, b);
    double total = 0.0;
    for (Eigen::Index j = 0; j < b; ++j) {
        const double r = y[j] - out(0, j);
        total += std::abs(r);
        delta(0, j) = -sign(r) / static_cast<double>(b);
    }
    if (loss) *loss = total / static_cast<double>(b);

    Gradients g(m.layers.size());
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        g[l].weights = delta * acts[l].transpose();
        g[l].bias = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd prev = m.layers[l].weights.transpose() * delta;
        // ReLU derivative, 0 at the kink; hidden activations equal relu(z).
        prev = prev.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
        delta = std::move(prev);
    }
    return g;
}

std::vector<double> input_gradient(const MlpModel& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.architecture.input_width)
        fail(ErrorCode::ShapeMismatch, "input width does not match model");
    std::vector<Eigen::VectorXd> pre;
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const std::size_t last = m.layers.size() - 1;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        Eigen::VectorXd z = m.layers[l].weights * a + m.layers[l].bias;
        pre.push_back(z);
        a = l != last ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Ones(1);
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        if (l != last) g = g.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix().transpose());
        g = g * m.layers[l].weights;
    }
    return {g.data(), g.data() + g.size()};
}

double lipschitz_bound(const MlpModel& m) {
    double bound = 1.0;
    for (const auto& l : m.layers) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(l.weights);
        bound *= svd.singularValues()(0);
    }
    return bound;
}

void apply_update(MlpModel& m, const Gradients& g, const TrainConfig& cfg, OptimizerState& state) {
    if (cfg.optimizer == Optimizer::sgd) {
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            m.layers[l].weights -= cfg.learning_rate * g[l].weights;
            m.layers[l].bias -= cfg.learning_rate * g[l].bias;
        }
        ++state.step_count;
        return;
    }
    if (state.first.empty()) {
        for (const auto& l : m.layers) {
            state.first.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                                   Eigen::VectorXd::Zero(l.bias.size())});
        }
        state.second = state.first;
    }
    ++state.step_count;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
    auto step = [&](auto& param, const auto& grad, auto& m1, auto& m2) {
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
        param.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        step(m.layers[l].weights, g[l].weights, state.first[l].weights, state.second[l].weights);
        step(m.layers[l].bias, g[l].bias, state.first[l].bias, state.second[l].bias);
    }
}

TrainResult train(const MlpArchitecture& arch, const TrainConfig& cfg, const Matrix& x,
                  std::span<const double> y, const Matrix* val_x, std::span<const double> val_y) {
    cfg.validate();
    if (x.rows() == 0) fail(ErrorCode::EmptyInput, "no training rows");
    if (x.rows() != y.size()) fail(ErrorCode::LengthMismatch, "training rows and targets differ");
    if (static_cast<int>(x.cols()) != arch.input_width)
        fail(ErrorCode::ShapeMismatch, "training width " + std::to_string(x.cols()) +
                                           " does not match input_width " + std::to_string(arch.input_width));
    if (val_x && val_x->rows() != val_y.size()) fail(ErrorCode::LengthMismatch, "validation rows and targets differ");

    TrainResult result;
    result.model = init_mlp(arch, cfg.seed);
    OptimizerState state;
    Rng rng(derive_seed(cfg.seed, 0x5f1e));
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    std::vector<double> targets;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Matrix bx = x.select_rows(idx);
            targets.resize(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) targets[i] = y[idx[i]];
            double batch_loss = 0.0;
            const auto g = backward(result.model, bx, targets, &batch_loss);
            if (!std::isfinite(batch_loss))
                fail(ErrorCode::NonFiniteLoss, "training loss diverged in epoch " + std::to_string(epoch));
            apply_update(result.model, g, cfg, state);
        }
        EpochLoss e;
        e.epoch = epoch;
        e.train_mae = loss_mae(predict(result.model, x), y);
        e.val_mae = val_x && val_x->rows() > 0 ? loss_mae(predict(result.model, *val_x), val_y)
                                               : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(e.train_mae))
            fail(ErrorCode::NonFiniteLoss, "training loss diverged in epoch " + std::to_string(epoch));
        result.history.push_back(e);
    }
    return result;
}

std::string loss_history_csv(const std::vector<EpochLoss>& history) {
    csv::Writer w({"epoch", "train_mae", "val_mae"});
    for (const auto& e : history)
        w.add({std::to_string(e.epoch), csv::format_double(e.train_mae), csv::format_double(e.val_mae)});
    return w.str();
}

}  // namespace cornyield::nn
