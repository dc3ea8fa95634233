#include <doctest.h>

#include <cmath>

#include "cornyield/dnnr.hpp"
#include "cornyield/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cornyield;

namespace {

nn::MlpArchitecture small_arch() { return {5, 2, 8, nn::Activation::relu, 1}; }

}  // namespace

TEST_CASE("architecture shapes") {
    CHECK(nn::MlpArchitecture::dnnr16().hidden_width == 16);
    CHECK(nn::MlpArchitecture::dnnr64().hidden_width == 64);
    CHECK(nn::MlpArchitecture::dnnr64().hidden_depth == 3);
    CHECK(small_arch().parameter_count() == 5 * 8 + 8 + 8 * 8 + 8 + 8 + 1);
    const auto m = nn::init_mlp(small_arch(), 1);
    REQUIRE(m.layers.size() == 3);
    CHECK(m.layers[0].weights.rows() == 8);
    CHECK(m.layers[0].weights.cols() == 5);
    const double bound = std::sqrt(6.0 / 5.0);
    CHECK(m.layers[0].weights.cwiseAbs().maxCoeff() <= bound);
    CHECK(m.layers[1].bias.isZero());
    nn::MlpArchitecture bad = small_arch();
    bad.hidden_width = 0;
    CHECK_THROWS_AS((void)bad.validate(), Error);
}

TEST_CASE("depth-zero network is affine") {
    nn::MlpArchitecture a{3, 0, 1, nn::Activation::relu, 1};
    auto m = nn::init_mlp(a, 2);
    REQUIRE(m.layers.size() == 1);
    m.layers[0].weights << 1, -2, 0.5;
    m.layers[0].bias << 0.25;
    const std::vector<double> x{2, 1, 4};
    CHECK(nn::forward(m, x) == doctest::Approx(2 - 2 + 2 + 0.25));
}

TEST_CASE("analytic gradients match central differences") {
    Rng rng(17);
    int checked = 0;
    for (int t = 0; t < 40; ++t) {
        const auto m = nn::init_mlp(small_arch(), 1000 + t);
        const auto x = testing::random_matrix(6, 5, rng, -1, 1);
        const auto y = testing::random_vector(6, rng, -1, 1);
        if (oracle::kink_margin(m, x, y) < 1e-4) continue;
        const auto g = nn::backward(m, x, y);
        const auto n = oracle::numeric_gradients(m, x, y);
        CHECK(oracle::relative_error(g, n) < 1e-4);
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("backward reports the batch loss") {
    Rng rng(3);
    const auto m = nn::init_mlp(small_arch(), 4);
    const auto x = testing::random_matrix(10, 5, rng);
    const auto y = testing::random_vector(10, rng);
    double loss = -1;
    (void)nn::backward(m, x, y, &loss);
    CHECK(loss == doctest::Approx(nn::loss_mae(nn::predict(m, x), y)));
}

TEST_CASE("input gradient and Lipschitz bound") {
    Rng rng(8);
    const auto m = nn::init_mlp(small_arch(), 9);
    const auto x = testing::random_vector(5, rng, -1, 1);
    const auto g = nn::input_gradient(m, x);
    REQUIRE(g.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        auto up = x, down = x;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        CHECK(g[i] == doctest::Approx((nn::forward(m, up) - nn::forward(m, down)) / 2e-6).epsilon(1e-4));
    }
    const double L = nn::lipschitz_bound(m);
    for (int t = 0; t < 50; ++t) {
        const auto a = testing::random_vector(5, rng, -3, 3);
        const auto b = testing::random_vector(5, rng, -3, 3);
        double dist = 0;
        for (std::size_t i = 0; i < 5; ++i) dist += (a[i] - b[i]) * (a[i] - b[i]);
        CHECK(std::abs(nn::forward(m, a) - nn::forward(m, b)) <= L * std::sqrt(dist) + 1e-12);
    }
}

TEST_CASE("training learns a linear function") {
    Rng rng(12);
    const auto x = testing::random_matrix(500, 2, rng, 0, 1);
    std::vector<double> y(500);
    for (std::size_t r = 0; r < 500; ++r) y[r] = 2 * x(r, 0) - x(r, 1);
    nn::MlpArchitecture a{2, 3, 16, nn::Activation::relu, 1};
    nn::TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.seed = 5;
    const auto r = nn::train(a, cfg, x, y, &x, y);
    REQUIRE(r.history.size() == 60);
    CHECK(r.history.back().train_mae < 0.05);
    CHECK(r.history.back().train_mae < r.history.front().train_mae);
    CHECK(r.history.back().val_mae == doctest::Approx(r.history.back().train_mae));

    const auto again = nn::train(a, cfg, x, y);
    CHECK(std::isnan(again.history.front().val_mae));
    for (std::size_t l = 0; l < r.model.layers.size(); ++l) CHECK(again.model.layers[l].weights == r.model.layers[l].weights);
    cfg.seed = 6;
    CHECK_FALSE(nn::train(a, cfg, x, y).model.layers[0].weights == r.model.layers[0].weights);
}

TEST_CASE("sgd reduces loss and divergence is reported") {
    Rng rng(13);
    const auto x = testing::random_matrix(200, 5, rng);
    std::vector<double> y(200);
    for (std::size_t r = 0; r < 200; ++r) y[r] = x(r, 0) + x(r, 2);
    nn::TrainConfig cfg;
    cfg.optimizer = nn::Optimizer::sgd;
    cfg.learning_rate = 0.05;
    cfg.epochs = 30;
    const auto r = nn::train(small_arch(), cfg, x, y);
    CHECK(r.history.back().train_mae < r.history.front().train_mae);

    auto huge = x;
    for (std::size_t i = 0; i < 200; ++i) huge(i, 0) = 1e300;
    cfg.learning_rate = 1e300;
    CHECK_THROWS_AS((void)nn::train(small_arch(), cfg, huge, y), Error);
}

TEST_CASE("loss history csv") {
    const std::vector<nn::EpochLoss> h{{1, 0.5, 0.25}, {2, 0.125, std::nan("")}};
    CHECK(nn::loss_history_csv(h) == "epoch,train_mae,val_mae\n1,0.5,0.25\n2,0.125,\n");
}

TEST_CASE("shape errors") {
    const auto m = nn::init_mlp(small_arch(), 1);
    const std::vector<double> short_row{1, 2};
    CHECK_THROWS_AS((void)nn::forward(m, short_row), Error);
    nn::TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS((void)cfg.validate(), Error);
}
