#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "factcheck/common.hpp"

namespace factcheck::nn {

enum class Activation : std::uint8_t { Tanh = 0, Relu = 1, Softmax = 2 };

struct LayerSpec {
    Eigen::Index in_dim;
    Eigen::Index out_dim;
    Activation activation;
};

/// Weights and bias of one dense layer. Gradients and Adam moments reuse the
/// same shape.
template <typename Scalar>
struct LayerParams {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Matrix weights;  // out_dim x in_dim
    Vector bias;

    static LayerParams zeros_like(const LayerParams& other) {
        return {Matrix::Zero(other.weights.rows(), other.weights.cols()),
                Vector::Zero(other.bias.size())};
    }
    bool all_finite() const { return weights.allFinite() && bias.allFinite(); }
};

template <typename Scalar>
using ParamList = std::vector<LayerParams<Scalar>>;

/// Feed-forward classifier: hidden tanh/relu layers, softmax over 2 classes
/// on the last layer.
template <typename Scalar = double>
class DenseNet {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    DenseNet() = default;

    /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)) drawn in
    /// layer order, row-major; zero biases.
    DenseNet(std::vector<LayerSpec> specs, std::uint64_t seed) : specs_(std::move(specs)), seed_(seed) {
        validate();
        Rng rng(seed);
        for (const auto& s : specs_) {
            LayerParams<Scalar> p{Matrix(s.out_dim, s.in_dim), Vector::Zero(s.out_dim)};
            const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
            for (Eigen::Index r = 0; r < s.out_dim; ++r) {
                for (Eigen::Index c = 0; c < s.in_dim; ++c) {
                    p.weights(r, c) = static_cast<Scalar>((2.0 * uniform_unit(rng) - 1.0) * limit);
                }
            }
            params_.push_back(std::move(p));
        }
    }

    static DenseNet zeros(std::vector<LayerSpec> specs) {
        DenseNet net;
        net.specs_ = std::move(specs);
        net.validate();
        for (const auto& s : net.specs_) {
            net.params_.push_back({Matrix::Zero(s.out_dim, s.in_dim), Vector::Zero(s.out_dim)});
        }
        return net;
    }

    const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
    const ParamList<Scalar>& params() const noexcept { return params_; }
    ParamList<Scalar>& params() noexcept { return params_; }
    std::uint64_t seed() const noexcept { return seed_; }
    Eigen::Index input_dim() const { return specs_.empty() ? 0 : specs_.front().in_dim; }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += static_cast<std::size_t>(p.weights.size() + p.bias.size());
        return n;
    }

    friend bool operator==(const DenseNet& a, const DenseNet& b) {
        if (a.params_.size() != b.params_.size()) return false;
        for (std::size_t i = 0; i < a.params_.size(); ++i) {
            if (a.specs_[i].in_dim != b.specs_[i].in_dim || a.specs_[i].out_dim != b.specs_[i].out_dim ||
                a.specs_[i].activation != b.specs_[i].activation ||
                a.params_[i].weights != b.params_[i].weights || a.params_[i].bias != b.params_[i].bias) {
                return false;
            }
        }
        return true;
    }

private:
    template <typename S>
    friend DenseNet<S> load_checkpoint_from(std::istream& in);

    void validate() const {
        if (specs_.empty()) {
            throw std::invalid_argument("DenseNet: no layers");
        }
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const auto& s = specs_[i];
            if (s.in_dim <= 0 || s.out_dim <= 0) {
                throw std::invalid_argument("DenseNet: layer dimensions must be positive");
            }
            if (i > 0 && specs_[i - 1].out_dim != s.in_dim) {
                throw std::invalid_argument("DenseNet: layer " + std::to_string(i) +
                                            " input does not chain with previous output");
            }
            const bool last = i + 1 == specs_.size();
            if (last != (s.activation == Activation::Softmax)) {
                throw std::invalid_argument("DenseNet: softmax must be the final layer only");
            }
        }
        if (specs_.back().out_dim != 2) {
            throw std::invalid_argument("DenseNet: final layer must have 2 classes");
        }
    }

    std::vector<LayerSpec> specs_;
    ParamList<Scalar> params_;
    std::uint64_t seed_ = 0;
};

/// 10,001 -> 50 -> 20 -> 2, tanh hidden layers.
inline std::vector<LayerSpec> tfidf_baseline_layers(Eigen::Index input_dim = 10001) {
    return {{input_dim, 50, Activation::Tanh}, {50, 20, Activation::Tanh}, {20, 2, Activation::Softmax}};
}

/// 600 -> 200 -> 100 -> 50 -> 2, relu hidden layers.
inline std::vector<LayerSpec> wordvec_baseline_layers(Eigen::Index input_dim = 600) {
    return {{input_dim, 200, Activation::Relu},
            {200, 100, Activation::Relu},
            {100, 50, Activation::Relu},
            {50, 2, Activation::Softmax}};
}

namespace detail {

template <typename Derived>
void apply_activation(Eigen::MatrixBase<Derived>& z, Activation act) {
    using Scalar = typename Derived::Scalar;
    switch (act) {
        case Activation::Tanh:
            z = z.array().tanh().matrix();
            break;
        case Activation::Relu:
            z = z.cwiseMax(Scalar(0));
            break;
        case Activation::Softmax:
            for (Eigen::Index c = 0; c < z.cols(); ++c) {
                auto col = z.col(c);
                col.array() -= col.maxCoeff();
                col = col.array().exp().matrix();
                col /= col.sum();
            }
            break;
    }
}

template <typename Scalar>
struct ForwardTrace {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    std::vector<Matrix> activations;  // activations[0] = input, activations[l+1] = layer l output
    Matrix final_logits;
};

template <typename Scalar>
ForwardTrace<Scalar> forward_trace(const DenseNet<Scalar>& net,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& inputs) {
    if (inputs.rows() != net.input_dim()) {
        throw std::invalid_argument("forward: input dimension " + std::to_string(inputs.rows()) +
                                    " does not match network input " + std::to_string(net.input_dim()));
    }
    ForwardTrace<Scalar> trace;
    trace.activations.reserve(net.params().size() + 1);
    trace.activations.push_back(inputs);
    for (std::size_t l = 0; l < net.params().size(); ++l) {
        const auto& p = net.params()[l];
        typename ForwardTrace<Scalar>::Matrix z = p.weights * trace.activations.back();
        z.colwise() += p.bias;
        if (!z.allFinite()) {
            throw Error("forward: non-finite pre-activation in layer " + std::to_string(l));
        }
        if (l + 1 == net.params().size()) trace.final_logits = z;
        apply_activation(z, net.specs()[l].activation);
        trace.activations.push_back(std::move(z));
    }
    return trace;
}

}  // namespace detail

/// Class probabilities for a batch laid out one example per column.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> forward_batch(
    const DenseNet<Scalar>& net, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& inputs) {
    return std::move(detail::forward_trace(net, inputs).activations.back());
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, 2, 1> forward(const DenseNet<Scalar>& net, const Eigen::MatrixBase<Derived>& input) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x = input.template cast<Scalar>();
    if (x.cols() != 1) {
        throw std::invalid_argument("forward: expected a column vector");
    }
    auto out = forward_batch(net, x);
    return Eigen::Matrix<Scalar, 2, 1>(out(0, 0), out(1, 0));
}

template <typename Scalar, typename Derived>
Scalar predict_prob(const DenseNet<Scalar>& net, const Eigen::MatrixBase<Derived>& features) {
    return forward(net, features)(1);
}

template <typename Scalar>
struct LossAndGrad {
    Scalar loss;
    ParamList<Scalar> grads;
};

/// Mean softmax cross-entropy over the batch (one example per column) and
/// its gradient with respect to every weight and bias.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const DenseNet<Scalar>& net,
                                  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& inputs,
                                  std::span<const int> labels) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const auto batch = inputs.cols();
    if (batch == 0) {
        throw std::invalid_argument("loss_and_grad: empty batch");
    }
    if (static_cast<Eigen::Index>(labels.size()) != batch) {
        throw std::invalid_argument("loss_and_grad: label count does not match batch");
    }
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw std::invalid_argument("loss_and_grad: label " + std::to_string(y) + " out of range");
        }
    }
    auto trace = detail::forward_trace(net, inputs);
    const Matrix& probs = trace.activations.back();

    Scalar loss = 0;
    for (Eigen::Index c = 0; c < batch; ++c) {
        const auto z = trace.final_logits.col(c);
        const Scalar zmax = z.maxCoeff();
        const Scalar lse = zmax + std::log((z.array() - zmax).exp().sum());
        loss -= z(labels[static_cast<std::size_t>(c)]) - lse;
    }
    loss /= static_cast<Scalar>(batch);

    Matrix delta = probs;
    for (Eigen::Index c = 0; c < batch; ++c) delta(labels[static_cast<std::size_t>(c)], c) -= Scalar(1);
    delta /= static_cast<Scalar>(batch);

    const auto n_layers = net.params().size();
    ParamList<Scalar> grads(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& input = trace.activations[l];
        grads[l].weights = delta * input.transpose();
        grads[l].bias = delta.rowwise().sum();
        if (l == 0) break;
        Matrix upstream = net.params()[l].weights.transpose() * delta;
        const Matrix& a = trace.activations[l];
        switch (net.specs()[l - 1].activation) {
            case Activation::Tanh:
                delta = upstream.cwiseProduct((Scalar(1) - a.array().square()).matrix());
                break;
            case Activation::Relu:
                // Subgradient 0 at the kink.
                delta = upstream.cwiseProduct((a.array() > Scalar(0)).template cast<Scalar>().matrix());
                break;
            case Activation::Softmax:
                throw std::logic_error("softmax only valid on the final layer");
        }
    }
    return {loss, std::move(grads)};
}

template <typename Scalar = double>
struct AdamState {
    ParamList<Scalar> m;
    ParamList<Scalar> v;
    std::uint64_t t = 0;
    Scalar lr = Scalar(0.001);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);

    explicit AdamState(const ParamList<Scalar>& params, Scalar learning_rate = Scalar(0.001))
        : lr(learning_rate) {
        for (const auto& p : params) {
            m.push_back(LayerParams<Scalar>::zeros_like(p));
            v.push_back(LayerParams<Scalar>::zeros_like(p));
        }
    }
};

/// Bias-corrected Adam update applied to `params` in place.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, ParamList<Scalar>& params, const ParamList<Scalar>& grads) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("adam_step: parameter/gradient layer count mismatch");
    }
    for (std::size_t l = 0; l < params.size(); ++l) {
        if (params[l].weights.rows() != grads[l].weights.rows() ||
            params[l].weights.cols() != grads[l].weights.cols() ||
            params[l].bias.size() != grads[l].bias.size()) {
            throw std::invalid_argument("adam_step: shape mismatch in layer " + std::to_string(l));
        }
        if (!grads[l].all_finite()) {
            throw Error("adam_step: non-finite gradient in layer " + std::to_string(l));
        }
    }
    ++state.t;
    const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.t));
    const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.t));
    auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
        m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
        v = state.beta2 * v + (Scalar(1) - state.beta2) * g.cwiseAbs2();
        p.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    };
    for (std::size_t l = 0; l < params.size(); ++l) {
        update(params[l].weights, state.m[l].weights, state.v[l].weights, grads[l].weights);
        update(params[l].bias, state.m[l].bias, state.v[l].bias, grads[l].bias);
    }
}

struct TrainConfig {
    double lr = 0.001;
    std::size_t batch_size = 32;
    std::size_t epochs = 20;
    std::uint64_t seed = 0;
    bool shuffle = true;
    /// Epochs without validation-loss improvement before stopping; 0 disables.
    std::size_t patience = 3;
};

struct TrainResult {
    std::vector<double> epoch_loss;       // mean training loss per epoch
    std::vector<double> validation_loss;  // empty without validation data
    std::size_t steps = 0;
    std::size_t best_epoch = 0;  // 1-based; 0 when no validation data
};

template <typename Example>
using Featurizer = std::function<Eigen::VectorXd(const Example&)>;

namespace detail {

template <typename Scalar, typename Example, typename LabelOf>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>, std::vector<int>> make_batch(
    std::span<const Example> examples, std::span<const std::size_t> order, Eigen::Index input_dim,
    const Featurizer<Example>& featurize, LabelOf label_of) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x(input_dim, static_cast<Eigen::Index>(order.size()));
    std::vector<int> labels;
    labels.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        Eigen::VectorXd f;
        try {
            f = featurize(examples[order[i]]);
        } catch (const std::exception& e) {
            throw Error("featurization failed for example " + std::to_string(order[i]) + ": " + e.what());
        }
        if (f.size() != input_dim) {
            throw Error("featurization produced " + std::to_string(f.size()) + " features for example " +
                        std::to_string(order[i]) + ", network expects " + std::to_string(input_dim));
        }
        x.col(static_cast<Eigen::Index>(i)) = f.cast<Scalar>();
        labels.push_back(label_of(examples[order[i]]));
    }
    return {std::move(x), std::move(labels)};
}

template <typename Scalar, typename Example, typename LabelOf>
double mean_loss(const DenseNet<Scalar>& net, std::span<const Example> examples,
                 const Featurizer<Example>& featurize, LabelOf label_of, std::size_t batch_size) {
    double total = 0.0;
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const auto n = std::min(batch_size, order.size() - start);
        auto [x, y] = make_batch<Scalar>(examples, std::span(order).subspan(start, n), net.input_dim(),
                                         featurize, label_of);
        total += static_cast<double>(loss_and_grad(net, x, y).loss) * static_cast<double>(n);
    }
    return total / static_cast<double>(examples.size());
}

}  // namespace detail

/// Mini-batch Adam training. Each epoch reshuffles with a generator seeded by
/// `config.seed`; with validation data, training stops after `patience`
/// epochs without improvement and the best weights are restored.
template <typename Scalar, typename Example, typename LabelOf>
TrainResult train(DenseNet<Scalar>& net, std::span<const Example> examples, const Featurizer<Example>& featurize,
                  LabelOf label_of, const TrainConfig& config, std::span<const Example> validation = {}) {
    if (examples.empty()) {
        throw std::invalid_argument("train: no training examples");
    }
    if (!(config.lr > 0.0) || config.batch_size == 0) {
        throw std::invalid_argument("train: lr must be positive and batch_size >= 1");
    }
    TrainResult result;
    AdamState<Scalar> adam(net.params(), static_cast<Scalar>(config.lr));
    Rng rng(config.seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double best_val = std::numeric_limits<double>::infinity();
    ParamList<Scalar> best_params;
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) seeded_shuffle(order, rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const auto n = std::min(config.batch_size, order.size() - start);
            auto [x, y] = detail::make_batch<Scalar>(examples, std::span<const std::size_t>(order).subspan(start, n),
                                                     net.input_dim(), featurize, label_of);
            auto lg = loss_and_grad(net, x, y);
            adam_step(adam, net.params(), lg.grads);
            total += static_cast<double>(lg.loss) * static_cast<double>(n);
            ++result.steps;
        }
        result.epoch_loss.push_back(total / static_cast<double>(examples.size()));

        if (!validation.empty()) {
            const double val = detail::mean_loss(net, validation, featurize, label_of, config.batch_size);
            result.validation_loss.push_back(val);
            if (val < best_val) {
                best_val = val;
                best_params = net.params();
                result.best_epoch = epoch + 1;
                since_best = 0;
            } else if (config.patience > 0 && ++since_best >= config.patience) {
                break;
            }
        }
    }
    if (!best_params.empty()) net.params() = std::move(best_params);
    return result;
}

/// Fraction of examples whose argmax class equals the label.
template <typename Scalar, typename Example, typename LabelOf>
double accuracy(const DenseNet<Scalar>& net, std::span<const Example> examples, const Featurizer<Example>& featurize,
                LabelOf label_of) {
    if (examples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& ex : examples) {
        const auto p = forward(net, featurize(ex));
        const int predicted = p(1) >= p(0) ? 1 : 0;
        if (predicted == label_of(ex)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// Checkpoint: "FCNN", u16 version, u32 layer count, per layer (u32 in, u32
// out, u8 activation), then per layer the row-major weights followed by the
// bias, all as little-endian f64.
inline constexpr std::uint16_t kCheckpointVersion = 1;

template <typename Scalar>
void save_checkpoint_to(std::ostream& out, const DenseNet<Scalar>& net) {
    out.write("FCNN", 4);
    binio::write_le<std::uint16_t>(out, kCheckpointVersion);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.specs().size()));
    for (const auto& s : net.specs()) {
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.in_dim));
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.out_dim));
        binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(s.activation));
    }
    for (const auto& p : net.params()) {
        for (Eigen::Index r = 0; r < p.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.weights.cols(); ++c) {
                binio::write_le<double>(out, static_cast<double>(p.weights(r, c)));
            }
        }
        for (Eigen::Index i = 0; i < p.bias.size(); ++i) {
            binio::write_le<double>(out, static_cast<double>(p.bias(i)));
        }
    }
}

template <typename Scalar>
DenseNet<Scalar> load_checkpoint_from(std::istream& in) {
    binio::expect_magic(in, "FCNN", "checkpoint");
    const auto version = binio::read_le<std::uint16_t>(in);
    if (version != kCheckpointVersion) {
        throw Error("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto n_layers = binio::read_le<std::uint32_t>(in);
    if (n_layers == 0 || n_layers > 64) {
        throw Error("checkpoint: implausible layer count " + std::to_string(n_layers));
    }
    std::vector<LayerSpec> specs;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const auto in_dim = binio::read_le<std::uint32_t>(in);
        const auto out_dim = binio::read_le<std::uint32_t>(in);
        const auto act = binio::read_le<std::uint8_t>(in);
        if (act > static_cast<std::uint8_t>(Activation::Softmax)) {
            throw Error("checkpoint: unknown activation code " + std::to_string(act));
        }
        specs.push_back({in_dim, out_dim, static_cast<Activation>(act)});
    }
    DenseNet<Scalar> net;
    try {
        net = DenseNet<Scalar>::zeros(specs);
    } catch (const std::invalid_argument& e) {
        throw Error(std::string("checkpoint: ") + e.what());
    }
    for (auto& p : net.params_) {
        for (Eigen::Index r = 0; r < p.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.weights.cols(); ++c) {
                p.weights(r, c) = static_cast<Scalar>(binio::read_le<double>(in));
            }
        }
        for (Eigen::Index i = 0; i < p.bias.size(); ++i) {
            p.bias(i) = static_cast<Scalar>(binio::read_le<double>(in));
        }
        if (!p.all_finite()) {
            throw Error("checkpoint: non-finite weights");
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw Error("checkpoint: trailing bytes after final layer");
    }
    return net;
}

template <typename Scalar>
std::string checkpoint_bytes(const DenseNet<Scalar>& net) {
    std::ostringstream out(std::ios::binary);
    save_checkpoint_to(out, net);
    return out.str();
}

template <typename Scalar>
void save_checkpoint(const std::string& path, const DenseNet<Scalar>& net) {
    write_file_atomic(path, checkpoint_bytes(net));
}

template <typename Scalar = double>
DenseNet<Scalar> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open checkpoint " + path);
    }
    return load_checkpoint_from<Scalar>(in);
}

}  // namespace factcheck::nn
