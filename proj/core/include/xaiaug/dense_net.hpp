#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xaiaug/dataset.hpp"
#include "xaiaug/matrix.hpp"
#include "xaiaug/rng.hpp"

namespace xaiaug {

enum class Activation { relu, softmax, identity };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

/// y = act(W x + b) with W stored as out_units x in_units.
struct DenseLayer {
    Matrix weights;
    std::vector<double> biases;
    Activation activation = Activation::identity;

    std::size_t in_units() const noexcept { return weights.cols(); }
    std::size_t out_units() const noexcept { return weights.rows(); }
};

/// Ordered stack of dense layers. The constructor enforces shape
/// compatibility, finiteness and "Softmax only on the final layer".
class DenseNetwork {
public:
    DenseNetwork() = default;
    explicit DenseNetwork(std::vector<DenseLayer> layers);

    std::size_t layer_count() const noexcept { return layers_.size(); }
    std::size_t input_dim() const;
    std::size_t output_dim() const;

    const DenseLayer& layer(std::size_t l) const { return layers_.at(l); }
    DenseLayer& layer(std::size_t l) { return layers_.at(l); }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    /// Widths of every layer input plus the final output, e.g. (5,64,32,16,2).
    std::vector<std::size_t> layer_sizes() const;

    /// Re-checks invariants after in-place edits; throws ConfigError/NumericError.
    void validate() const;

    bool operator==(const DenseNetwork& other) const;

private:
    std::vector<DenseLayer> layers_;
};

/// Deterministic network with weights uniform in [-sqrt(1/in), sqrt(1/in)] and
/// zero biases.
DenseNetwork build_network(std::span<const std::size_t> layer_sizes,
                           std::span<const Activation> activations, std::uint64_t seed);

/// Multiplicative gates applied to layer inputs during the forward pass,
/// keyed by layer index. A gate has the shape of that layer's input batch.
using FeatureGates = std::map<std::size_t, Matrix>;

/// Cached activations of one forward pass.
struct ForwardTrace {
    /// inputs[l] is what layer l consumed, i.e. after its gate (if any).
    std::vector<Matrix> inputs;
    /// inputs[l] before gating; equals inputs[l] for ungated layers.
    std::vector<Matrix> raw_inputs;
    std::vector<Matrix> pre_activations;
    FeatureGates gates;
    Matrix output;

    std::size_t batch_size() const noexcept { return output.rows(); }
    const Matrix& logits() const { return pre_activations.back(); }
};

ForwardTrace forward(const DenseNetwork& net, const Matrix& batch, const FeatureGates& gates = {});

/// Rows of `logits` mapped through a numerically stable softmax.
Matrix softmax_rows(const Matrix& logits);

inline constexpr double kLogProbFloor = 1e-12;

/// -log(max(p[true], floor)) for every row.
std::vector<double> per_sample_cross_entropy(const Matrix& probs, const Labels& labels);

/// Batch mean of per_sample_cross_entropy.
double cross_entropy(const Matrix& probs, const Labels& labels);

struct LayerGradients {
    Matrix weights;
    std::vector<double> biases;
};

struct Gradients {
    std::vector<LayerGradients> layers;
    /// features[l] = dL / d inputs[l] (the gated input of layer l).
    std::vector<Matrix> features;

    static Gradients zeros_like(const DenseNetwork& net);

    /// this += scale * other (parameter and feature gradients).
    void add_scaled(const Gradients& other, double scale);
};

/// Optional hook applied to dL/d inputs[l] before it is propagated into layer l-1.
using FeatureGradientHook = std::function<void(std::size_t layer, Matrix& grad)>;

/// Reverse pass from an arbitrary gradient at the final pre-activations.
Gradients backpropagate(const DenseNetwork& net, const ForwardTrace& trace, Matrix logit_grad,
                        const FeatureGradientHook& hook = {});

/// Exact gradients of (weighted) mean cross-entropy. With `sample_weights`
/// the loss is mean_i(w_i * CE_i). Requires a Softmax head.
Gradients backward(const DenseNetwork& net, const ForwardTrace& trace, const Labels& labels,
                   std::span<const double> sample_weights = {}, const FeatureGradientHook& hook = {});

struct TrainConfig {
    std::size_t iterations = 1;
    std::size_t batch_size = 1;
    double learning_rate = 0.01;
    double momentum = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Velocity buffers of SGD with momentum; empty until the first step.
struct MomentumState {
    std::vector<Matrix> weight_velocity;
    std::vector<std::vector<double>> bias_velocity;

    bool initialized() const noexcept { return !weight_velocity.empty(); }
};

/// v <- momentum * v + g;  theta <- theta - lr * v.
void sgd_momentum_step(DenseNetwork& net, const Gradients& grads, MomentumState& state,
                       double learning_rate, double momentum);

/// Argmax class per row, ties to the lowest index.
Labels predict(const DenseNetwork& net, const Matrix& features);

/// Fraction of argmax-correct predictions.
double evaluate(const DenseNetwork& net, const LabeledDataset& data);

/// Per-class accuracy (recall); classes without samples report 0.
std::vector<double> classwise_accuracy(const DenseNetwork& net, const LabeledDataset& data,
                                       std::size_t classes);

/// Draws batches by shuffling the index range once per pass and consuming
/// it in order; the next pass reshuffles.
class BatchSampler {
public:
    BatchSampler(std::size_t dataset_size, std::size_t batch_size, Rng rng);

    std::vector<std::size_t> next();

private:
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::size_t batch_size_;
    Rng rng_;
};

}  // namespace xaiaug
