#include <doctest.h>

#include <cmath>
#include <sstream>

#include "factcheck/nn.hpp"
#include "grad_oracle.hpp"
#include "test_util.hpp"

using namespace factcheck;
using namespace factcheck::nn;

namespace {

std::vector<LayerSpec> small_tanh() {
    return {{6, 5, Activation::Tanh}, {5, 3, Activation::Tanh}, {3, 2, Activation::Softmax}};
}

std::vector<LayerSpec> small_relu() {
    return {{6, 8, Activation::Relu}, {8, 4, Activation::Relu}, {4, 2, Activation::Softmax}};
}

struct Point {
    Eigen::VectorXd x;
    int label;
};

// Label 1 iff the first coordinate is positive, with a margin; the other
// coordinates are noise.
std::vector<Point> separable(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Point> out;
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd x(6);
        for (Eigen::Index k = 0; k < 6; ++k) x(k) = 2.0 * uniform_unit(rng) - 1.0;
        const int label = static_cast<int>(i % 2);
        x(0) = (label ? 1.0 : -1.0) * (0.5 + uniform_unit(rng));
        out.push_back({x, label});
    }
    return out;
}

const Featurizer<Point> point_features = [](const Point& p) { return p.x; };
const auto point_label = [](const Point& p) { return p.label; };

}  // namespace

TEST_CASE("architecture presets") {
    const auto t = tfidf_baseline_layers();
    REQUIRE(t.size() == 3);
    CHECK(t[0].in_dim == 10001);
    CHECK(t[0].out_dim == 50);
    CHECK(t[1].out_dim == 20);
    CHECK(t[2].out_dim == 2);
    CHECK(t[0].activation == Activation::Tanh);

    const auto w = wordvec_baseline_layers();
    REQUIRE(w.size() == 4);
    CHECK(w[0].in_dim == 600);
    CHECK(w[0].out_dim == 200);
    CHECK(w[1].out_dim == 100);
    CHECK(w[2].out_dim == 50);
    CHECK(w[2].activation == Activation::Relu);
    CHECK(w[3].activation == Activation::Softmax);

    CHECK_THROWS_AS(DenseNet<double>({{4, 3, Activation::Tanh}, {4, 2, Activation::Softmax}}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(DenseNet<double>({{4, 2, Activation::Softmax}, {2, 2, Activation::Softmax}}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(DenseNet<double>({{4, 3, Activation::Softmax}}, 0), std::invalid_argument);
}

TEST_CASE("Glorot initialisation stays within its bound and is seed-determined") {
    const DenseNet<double> a(small_tanh(), 3);
    const DenseNet<double> b(small_tanh(), 3);
    const DenseNet<double> c(small_tanh(), 4);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    for (const auto& p : a.params()) {
        const double limit = std::sqrt(6.0 / static_cast<double>(p.weights.rows() + p.weights.cols()));
        CHECK(p.weights.cwiseAbs().maxCoeff() <= limit);
        CHECK(p.bias.isZero());
    }
}

TEST_CASE("zero network outputs the uniform distribution") {
    const auto net = DenseNet<double>::zeros(tfidf_baseline_layers());
    Rng rng(1);
    const auto x = oracle::sparse_inputs(10001, 3, rng);
    const auto out = forward_batch(net, x);
    for (Eigen::Index c = 0; c < 3; ++c) {
        CHECK(out(0, c) == 0.5);
        CHECK(out(1, c) == 0.5);
    }
    const std::vector<int> y{1, 0, 1};
    CHECK(loss_and_grad(net, x, y).loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("forward rejects bad input") {
    const DenseNet<double> net(small_tanh(), 0);
    CHECK_THROWS_AS(forward(net, Eigen::VectorXd::Ones(5)), std::invalid_argument);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(6);
    bad(2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(net, bad), Error);
}

TEST_CASE("loss matches the reference forward pass") {
    Rng rng(5);
    const DenseNet<double> net(small_relu(), 9);
    const auto x = oracle::dense_inputs(6, 7, rng);
    const auto y = oracle::random_labels(7, rng);
    CHECK(loss_and_grad(net, x, y).loss == doctest::Approx(oracle::reference_loss(net, x, y)).epsilon(1e-12));
}

TEST_CASE("backprop agrees with central differences") {
    SUBCASE("small tanh and relu nets, many seeds") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng rng(seed + 100);
            const DenseNet<double> tanh_net(small_tanh(), seed);
            const DenseNet<double> relu_net(small_relu(), seed);
            const auto x = oracle::dense_inputs(6, 4, rng);
            const auto y = oracle::random_labels(4, rng);
            CHECK(oracle::max_gradient_error(tanh_net, x, y, rng) < 1e-6);
            CHECK(oracle::max_gradient_error(relu_net, x, y, rng) < 1e-6);
        }
    }
    SUBCASE("full-size baseline nets") {
        Rng rng(77);
        const DenseNet<double> tfidf(tfidf_baseline_layers(), 1);
        const auto xt = oracle::sparse_inputs(10001, 3, rng);
        CHECK(oracle::max_gradient_error(tfidf, xt, oracle::random_labels(3, rng), rng) < 1e-4);

        const DenseNet<double> wordvec(wordvec_baseline_layers(), 1);
        const auto xw = oracle::dense_inputs(600, 3, rng);
        CHECK(oracle::max_gradient_error(wordvec, xw, oracle::random_labels(3, rng), rng, 20) < 1e-4);
    }
}

TEST_CASE("Adam") {
    SUBCASE("first step with unit gradients is lr / (1 + eps)") {
        ParamList<double> params{{Eigen::MatrixXd::Constant(2, 3, 0.25), Eigen::VectorXd::Constant(2, -1.0)}};
        ParamList<double> grads{{Eigen::MatrixXd::Constant(2, 3, 1.0), Eigen::VectorXd::Constant(2, -1.0)}};
        AdamState<double> state(params);
        adam_step(state, params, grads);
        const double step = 0.001 / (1.0 + 1e-8);
        CHECK((params[0].weights.array() - (0.25 - step)).abs().maxCoeff() < 1e-15);
        CHECK((params[0].bias.array() - (-1.0 + step)).abs().maxCoeff() < 1e-15);
        CHECK(state.t == 1);
    }
    SUBCASE("first step for any gradient is lr * g / (|g| + eps)") {
        ParamList<double> params{{Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1)}};
        ParamList<double> grads{{Eigen::MatrixXd(1, 4), Eigen::VectorXd::Constant(1, -7.0)}};
        grads[0].weights << 0.3, -2.5, 1e-6, 40.0;
        AdamState<double> state(params);
        adam_step(state, params, grads);
        for (Eigen::Index i = 0; i < 4; ++i) {
            const double g = grads[0].weights(0, i);
            CHECK(params[0].weights(0, i) == doctest::Approx(-0.001 * g / (std::abs(g) + 1e-8)).epsilon(1e-12));
        }
        CHECK(params[0].bias(0) == doctest::Approx(0.001 * 7.0 / (7.0 + 1e-8)).epsilon(1e-12));
    }
    SUBCASE("zero gradients leave parameters unchanged") {
        const DenseNet<double> net(small_tanh(), 2);
        auto params = net.params();
        ParamList<double> zeros;
        for (const auto& p : params) zeros.push_back(LayerParams<double>::zeros_like(p));
        AdamState<double> state(params);
        for (int i = 0; i < 5; ++i) adam_step(state, params, zeros);
        for (std::size_t l = 0; l < params.size(); ++l) {
            CHECK(params[l].weights == net.params()[l].weights);
            CHECK(params[l].bias == net.params()[l].bias);
        }
    }
    SUBCASE("non-finite gradients are rejected") {
        ParamList<double> params{{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)}};
        ParamList<double> grads{{Eigen::MatrixXd::Constant(1, 1, std::numeric_limits<double>::infinity()),
                                 Eigen::VectorXd::Zero(1)}};
        AdamState<double> state(params);
        CHECK_THROWS_AS(adam_step(state, params, grads), Error);
    }
}

TEST_CASE("training") {
    const auto data = separable(200, 8);
    TrainConfig cfg;
    cfg.seed = 13;

    SUBCASE("separable data is learned") {
        DenseNet<double> net(small_tanh(), 1);
        const auto result = train(net, std::span<const Point>(data), point_features, point_label, cfg);
        CHECK(result.epoch_loss.size() == 20);
        CHECK(result.epoch_loss.back() < result.epoch_loss.front());
        CHECK(accuracy(net, std::span<const Point>(data), point_features, point_label) >= 0.95);
    }
    SUBCASE("fixed seed gives identical weights") {
        DenseNet<double> a(small_tanh(), 1);
        DenseNet<double> b(small_tanh(), 1);
        train(a, std::span<const Point>(data), point_features, point_label, cfg);
        train(b, std::span<const Point>(data), point_features, point_label, cfg);
        CHECK(checkpoint_bytes(a) == checkpoint_bytes(b));
    }
    SUBCASE("zero epochs leave the network untouched") {
        DenseNet<double> net(small_tanh(), 1);
        const auto before = net;
        cfg.epochs = 0;
        const auto result = train(net, std::span<const Point>(data), point_features, point_label, cfg);
        CHECK(result.steps == 0);
        CHECK(net == before);
    }
    SUBCASE("a batch at least as large as the data gives one step per epoch") {
        DenseNet<double> net(small_tanh(), 1);
        cfg.batch_size = 500;
        cfg.epochs = 4;
        CHECK(train(net, std::span<const Point>(data), point_features, point_label, cfg).steps == 4);
    }
    SUBCASE("early stopping restores the best epoch") {
        DenseNet<double> net(small_tanh(), 1);
        // Validation set with flipped labels: loss rises as training succeeds.
        auto flipped = separable(40, 9);
        for (auto& p : flipped) p.label = 1 - p.label;
        cfg.patience = 2;
        const auto result = train(net, std::span<const Point>(data), point_features, point_label, cfg,
                                  std::span<const Point>(flipped));
        REQUIRE(result.best_epoch >= 1);
        CHECK(result.epoch_loss.size() == result.validation_loss.size());
        CHECK(result.epoch_loss.size() <= result.best_epoch + 2);
        const auto best = *std::min_element(result.validation_loss.begin(), result.validation_loss.end());
        CHECK(result.validation_loss[result.best_epoch - 1] == best);
    }
    SUBCASE("featurisation failures name the example") {
        DenseNet<double> net(small_tanh(), 1);
        const Featurizer<Point> broken = [](const Point& p) -> Eigen::VectorXd {
            if (p.label == 1) throw std::runtime_error("boom");
            return p.x;
        };
        CHECK_THROWS_WITH_AS(train(net, std::span<const Point>(data), broken, point_label, cfg),
                             doctest::Contains("featurization failed for example"), Error);
    }
}

TEST_CASE("checkpoints") {
    testutil::TempDir dir;
    const DenseNet<double> net(wordvec_baseline_layers(), 21);

    SUBCASE("round trip is exact") {
        save_checkpoint(dir.file("m.fcnn"), net);
        const auto back = load_checkpoint<double>(dir.file("m.fcnn"));
        CHECK(back == net);
        CHECK(checkpoint_bytes(back) == checkpoint_bytes(net));
        Rng rng(3);
        const auto x = oracle::dense_inputs(600, 5, rng);
        CHECK(forward_batch(back, x) == forward_batch(net, x));
    }
    SUBCASE("layout: magic, version, layer table") {
        const auto bytes = checkpoint_bytes(net);
        CHECK(bytes.substr(0, 4) == "FCNN");
        CHECK(static_cast<unsigned char>(bytes[4]) == 1);
        CHECK(static_cast<unsigned char>(bytes[5]) == 0);
        CHECK(static_cast<unsigned char>(bytes[6]) == 4);
        const std::size_t header = 4 + 2 + 4 + 4 * 9;
        CHECK(bytes.size() == header + 8 * net.parameter_count());
    }
    SUBCASE("corrupt files are rejected") {
        auto bytes = checkpoint_bytes(net);
        {
            std::istringstream in(bytes.substr(0, bytes.size() - 3));
            CHECK_THROWS_AS(load_checkpoint_from<double>(in), Error);
        }
        {
            std::istringstream in(bytes + "x");
            CHECK_THROWS_AS(load_checkpoint_from<double>(in), Error);
        }
        bytes[0] = 'X';
        {
            std::istringstream in(bytes);
            CHECK_THROWS_AS(load_checkpoint_from<double>(in), Error);
        }
        CHECK_THROWS_AS(load_checkpoint<double>(dir.file("missing.fcnn")), Error);
    }
    SUBCASE("single precision instantiation") {
        const DenseNet<float> f(small_tanh(), 4);
        std::istringstream in(checkpoint_bytes(f));
        CHECK(load_checkpoint_from<float>(in) == f);
    }
}
