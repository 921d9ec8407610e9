#include "xaiaug/dense_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xaiaug {

std::string to_string(Activation activation) {
    switch (activation) {
        case Activation::relu: return "relu";
        case Activation::softmax: return "softmax";
        case Activation::identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "softmax") return Activation::softmax;
    if (name == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + name + "'");
}

DenseNetwork::DenseNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

std::size_t DenseNetwork::input_dim() const {
    if (layers_.empty()) throw ConfigError("network has no layers");
    return layers_.front().in_units();
}

std::size_t DenseNetwork::output_dim() const {
    if (layers_.empty()) throw ConfigError("network has no layers");
    return layers_.back().out_units();
}

std::vector<std::size_t> DenseNetwork::layer_sizes() const {
    std::vector<std::size_t> sizes;
    if (layers_.empty()) return sizes;
    sizes.push_back(layers_.front().in_units());
    for (const auto& layer : layers_) sizes.push_back(layer.out_units());
    return sizes;
}

void DenseNetwork::validate() const {
    if (layers_.empty()) throw ConfigError("network must have at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.in_units() == 0 || layer.out_units() == 0) {
            throw ConfigError("layer " + std::to_string(l) + " has an empty weight matrix");
        }
        if (layer.biases.size() != layer.out_units()) {
            throw ConfigError("layer " + std::to_string(l) + " has " + std::to_string(layer.biases.size()) +
                              " biases for " + std::to_string(layer.out_units()) + " units");
        }
        if (l + 1 < layers_.size()) {
            if (layer.activation == Activation::softmax) {
                throw ConfigError("softmax is only allowed on the final layer (found at layer " +
                                  std::to_string(l) + ")");
            }
            if (layer.out_units() != layers_[l + 1].in_units()) {
                throw ConfigError("layer " + std::to_string(l) + " outputs " +
                                  std::to_string(layer.out_units()) + " units but layer " +
                                  std::to_string(l + 1) + " expects " +
                                  std::to_string(layers_[l + 1].in_units()));
            }
        }
        bool finite = layer.weights.all_finite() &&
                      std::all_of(layer.biases.begin(), layer.biases.end(),
                                  [](double b) { return std::isfinite(b); });
        if (!finite) throw NumericError("non-finite parameter", l);
    }
}

bool DenseNetwork::operator==(const DenseNetwork& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& a = layers_[l];
        const auto& b = other.layers_[l];
        if (a.activation != b.activation || !(a.weights == b.weights) || a.biases != b.biases) return false;
    }
    return true;
}

DenseNetwork build_network(std::span<const std::size_t> layer_sizes,
                           std::span<const Activation> activations, std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw ConfigError("need at least an input and an output size");
    if (activations.size() + 1 != layer_sizes.size()) {
        throw ConfigError("expected " + std::to_string(layer_sizes.size() - 1) + " activations, got " +
                          std::to_string(activations.size()));
    }
    if (std::any_of(layer_sizes.begin(), layer_sizes.end(), [](std::size_t s) { return s == 0; })) {
        throw ConfigError("layer sizes must be >= 1");
    }
    Rng rng = make_rng(seed, Stream::init);
    std::vector<DenseLayer> layers;
    layers.reserve(activations.size());
    for (std::size_t l = 0; l < activations.size(); ++l) {
        const std::size_t in = layer_sizes[l];
        const std::size_t out = layer_sizes[l + 1];
        const double bound = std::sqrt(1.0 / static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer;
        layer.weights = Matrix(out, in);
        for (auto& w : layer.weights.data()) w = dist(rng);
        layer.biases.assign(out, 0.0);
        layer.activation = activations[l];
        layers.push_back(std::move(layer));
    }
    return DenseNetwork(std::move(layers));
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto z = logits.row(i);
        auto p = out.row(i);
        const double zmax = *std::max_element(z.begin(), z.end());
        double total = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) {
            p[k] = std::exp(z[k] - zmax);
            total += p[k];
        }
        for (auto& v : p) v /= total;
    }
    return out;
}

namespace {

Matrix affine(const DenseLayer& layer, const Matrix& input) {
    const std::size_t batch = input.rows();
    const std::size_t in = layer.in_units();
    const std::size_t out = layer.out_units();
    Matrix z(batch, out);
    for (std::size_t i = 0; i < batch; ++i) {
        auto a = input.row(i);
        auto zi = z.row(i);
        for (std::size_t k = 0; k < out; ++k) {
            auto w = layer.weights.row(k);
            double acc = layer.biases[k];
            for (std::size_t j = 0; j < in; ++j) acc += w[j] * a[j];
            zi[k] = acc;
        }
    }
    return z;
}

Matrix activate(Activation activation, const Matrix& z) {
    switch (activation) {
        case Activation::relu: {
            Matrix out = z;
            for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
            return out;
        }
        case Activation::softmax: return softmax_rows(z);
        case Activation::identity: return z;
    }
    return z;
}

}  // namespace

ForwardTrace forward(const DenseNetwork& net, const Matrix& batch, const FeatureGates& gates) {
    if (batch.cols() != net.input_dim()) {
        throw DimensionError("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                             std::to_string(net.input_dim()));
    }
    if (!batch.all_finite()) throw NumericError("non-finite input batch", 0);
    for (const auto& [l, gate] : gates) {
        if (l >= net.layer_count()) throw ConfigError("gate for nonexistent layer " + std::to_string(l));
    }

    ForwardTrace trace;
    trace.inputs.reserve(net.layer_count());
    trace.raw_inputs.reserve(net.layer_count());
    trace.pre_activations.reserve(net.layer_count());
    trace.gates = gates;

    Matrix current = batch;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto& layer = net.layer(l);
        trace.raw_inputs.push_back(current);
        if (auto it = gates.find(l); it != gates.end()) {
            require_same_shape(it->second, current, "feature gate");
            current = hadamard(it->second, current);
        }
        Matrix z = affine(layer, current);
        trace.inputs.push_back(std::move(current));
        current = activate(layer.activation, z);
        if (!current.all_finite() || !z.all_finite()) throw NumericError("non-finite activation", l);
        trace.pre_activations.push_back(std::move(z));
    }
    trace.output = std::move(current);
    return trace;
}

std::vector<double> per_sample_cross_entropy(const Matrix& probs, const Labels& labels) {
    if (probs.rows() != labels.size()) {
        throw DimensionError("cross_entropy: " + std::to_string(probs.rows()) + " rows vs " +
                             std::to_string(labels.size()) + " labels");
    }
    std::vector<double> losses(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= probs.cols()) {
            throw IndexError("label " + std::to_string(labels[i]) + " out of range for " +
                             std::to_string(probs.cols()) + " classes");
        }
        losses[i] = -std::log(std::max(probs(i, labels[i]), kLogProbFloor));
    }
    return losses;
}

double cross_entropy(const Matrix& probs, const Labels& labels) {
    auto losses = per_sample_cross_entropy(probs, labels);
    if (losses.empty()) return 0.0;
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

Gradients Gradients::zeros_like(const DenseNetwork& net) {
    Gradients g;
    for (const auto& layer : net.layers()) {
        g.layers.push_back({Matrix(layer.out_units(), layer.in_units()), std::vector<double>(layer.out_units(), 0.0)});
    }
    return g;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
    if (other.layers.size() != layers.size()) throw ConsistencyError("gradient layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        require_same_shape(layers[l].weights, other.layers[l].weights, "gradient add");
        for (std::size_t i = 0; i < layers[l].weights.size(); ++i) {
            layers[l].weights.data()[i] += scale * other.layers[l].weights.data()[i];
        }
        for (std::size_t k = 0; k < layers[l].biases.size(); ++k) {
            layers[l].biases[k] += scale * other.layers[l].biases[k];
        }
    }
    if (features.empty()) {
        features = other.features;
        for (auto& f : features)
            for (auto& v : f.data()) v *= scale;
    } else if (!other.features.empty()) {
        for (std::size_t l = 0; l < features.size(); ++l) {
            for (std::size_t i = 0; i < features[l].size(); ++i) {
                features[l].data()[i] += scale * other.features[l].data()[i];
            }
        }
    }
}

namespace {

void check_trace(const DenseNetwork& net, const ForwardTrace& trace) {
    if (trace.inputs.size() != net.layer_count() || trace.pre_activations.size() != net.layer_count()) {
        throw ConsistencyError("trace has " + std::to_string(trace.inputs.size()) + " layers, network has " +
                               std::to_string(net.layer_count()));
    }
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        if (trace.inputs[l].cols() != net.layer(l).in_units() ||
            trace.pre_activations[l].cols() != net.layer(l).out_units()) {
            throw ConsistencyError("trace does not match network at layer " + std::to_string(l));
        }
    }
}

}  // namespace

Gradients backpropagate(const DenseNetwork& net, const ForwardTrace& trace, Matrix logit_grad,
                        const FeatureGradientHook& hook) {
    check_trace(net, trace);
    const std::size_t batch = trace.batch_size();
    if (logit_grad.rows() != batch || logit_grad.cols() != net.output_dim()) {
        throw DimensionError("logit gradient shape " + shape_string(logit_grad));
    }
    Gradients grads = Gradients::zeros_like(net);
    grads.features.resize(net.layer_count());

    Matrix dz = std::move(logit_grad);
    for (std::size_t l = net.layer_count(); l-- > 0;) {
        const auto& layer = net.layer(l);
        const Matrix& a = trace.inputs[l];
        auto& gw = grads.layers[l].weights;
        auto& gb = grads.layers[l].biases;
        Matrix da(batch, layer.in_units());
        for (std::size_t i = 0; i < batch; ++i) {
            auto dzi = dz.row(i);
            auto ai = a.row(i);
            auto dai = da.row(i);
            for (std::size_t k = 0; k < layer.out_units(); ++k) {
                const double g = dzi[k];
                if (g == 0.0) continue;
                gb[k] += g;
                auto w = layer.weights.row(k);
                auto gwk = gw.row(k);
                for (std::size_t j = 0; j < layer.in_units(); ++j) {
                    gwk[j] += g * ai[j];
                    dai[j] += g * w[j];
                }
            }
        }
        if (hook) hook(l, da);
        grads.features[l] = da;
        if (l == 0) break;

        // Into the previous layer's pre-activation: through the gate, then the activation.
        Matrix next = std::move(da);
        if (auto it = trace.gates.find(l); it != trace.gates.end()) next = hadamard(next, it->second);
        const auto& prev = net.layer(l - 1);
        const Matrix& z_prev = trace.pre_activations[l - 1];
        if (prev.activation == Activation::relu) {
            for (std::size_t i = 0; i < next.size(); ++i) {
                if (!(z_prev.data()[i] > 0.0)) next.data()[i] = 0.0;
            }
        } else if (prev.activation == Activation::softmax) {
            throw ConfigError("softmax in a hidden layer");
        }
        dz = std::move(next);
    }
    return grads;
}

Gradients backward(const DenseNetwork& net, const ForwardTrace& trace, const Labels& labels,
                   std::span<const double> sample_weights, const FeatureGradientHook& hook) {
    check_trace(net, trace);
    if (net.layer(net.layer_count() - 1).activation != Activation::softmax) {
        throw ConfigError("cross-entropy backward requires a softmax output layer");
    }
    const std::size_t batch = trace.batch_size();
    if (labels.size() != batch) throw DimensionError("labels do not match batch size");
    if (!sample_weights.empty() && sample_weights.size() != batch) {
        throw DimensionError("sample weights do not match batch size");
    }
    const std::size_t classes = net.output_dim();
    Matrix dz(batch, classes);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        if (labels[i] >= classes) throw IndexError("label " + std::to_string(labels[i]) + " out of range");
        const double w = (sample_weights.empty() ? 1.0 : sample_weights[i]) * inv_batch;
        // The log floor clamps the loss; below it the gradient vanishes.
        const bool floored = trace.output(i, labels[i]) < kLogProbFloor;
        for (std::size_t k = 0; k < classes; ++k) {
            double g = trace.output(i, k) - (k == labels[i] ? 1.0 : 0.0);
            dz(i, k) = floored ? 0.0 : w * g;
        }
    }
    return backpropagate(net, trace, std::move(dz), hook);
}

void TrainConfig::validate() const {
    if (iterations == 0) throw ConfigError("iterations must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
}

void sgd_momentum_step(DenseNetwork& net, const Gradients& grads, MomentumState& state,
                       double learning_rate, double momentum) {
    if (grads.layers.size() != net.layer_count()) throw ConsistencyError("gradient/network layer mismatch");
    if (!state.initialized()) {
        for (const auto& layer : net.layers()) {
            state.weight_velocity.emplace_back(layer.out_units(), layer.in_units());
            state.bias_velocity.emplace_back(layer.out_units(), 0.0);
        }
    }
    if (state.weight_velocity.size() != net.layer_count()) throw ConsistencyError("optimizer state/network layer mismatch");
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto& layer = net.layer(l);
        auto& vw = state.weight_velocity[l];
        auto& vb = state.bias_velocity[l];
        const auto& gw = grads.layers[l].weights;
        const auto& gb = grads.layers[l].biases;
        if (!vw.same_shape(layer.weights) || !gw.same_shape(layer.weights) || vb.size() != layer.biases.size() ||
            gb.size() != layer.biases.size()) {
            throw ConsistencyError("optimizer shape mismatch at layer " + std::to_string(l));
        }
        for (std::size_t i = 0; i < vw.size(); ++i) {
            vw.data()[i] = momentum * vw.data()[i] + gw.data()[i];
            layer.weights.data()[i] -= learning_rate * vw.data()[i];
        }
        for (std::size_t k = 0; k < vb.size(); ++k) {
            vb[k] = momentum * vb[k] + gb[k];
            layer.biases[k] -= learning_rate * vb[k];
        }
    }
}

Labels predict(const DenseNetwork& net, const Matrix& features) {
    auto trace = forward(net, features);
    Labels out(trace.output.rows());
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto row = trace.output.row(i);
        // max_element returns the first maximum, i.e. the lowest index on ties.
        out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double evaluate(const DenseNetwork& net, const LabeledDataset& data) {
    if (data.size() == 0) throw UsageError("evaluate on an empty dataset");
    auto predicted = predict(net, data.features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == data.labels[i];
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<double> classwise_accuracy(const DenseNetwork& net, const LabeledDataset& data, std::size_t classes) {
    if (data.size() == 0) throw UsageError("classwise_accuracy on an empty dataset");
    auto predicted = predict(net, data.features);
    std::vector<double> correct(classes, 0.0), total(classes, 0.0);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (data.labels[i] >= classes) throw IndexError("label out of range");
        total[data.labels[i]] += 1.0;
        correct[data.labels[i]] += predicted[i] == data.labels[i];
    }
    for (std::size_t c = 0; c < classes; ++c) correct[c] = total[c] > 0 ? correct[c] / total[c] : 0.0;
    return correct;
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, Rng rng)
    : order_(dataset_size), batch_size_(batch_size), rng_(std::move(rng)) {
    if (dataset_size == 0 || batch_size == 0) throw ConfigError("BatchSampler needs a nonempty dataset and batch");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    cursor_ = order_.size();
}

std::vector<std::size_t> BatchSampler::next() {
    std::vector<std::size_t> batch;
    batch.reserve(batch_size_);
    while (batch.size() < batch_size_) {
        if (cursor_ == order_.size()) {
            std::shuffle(order_.begin(), order_.end(), rng_);
            cursor_ = 0;
        }
        batch.push_back(order_[cursor_++]);
    }
    return batch;
}

}  // namespace xaiaug
