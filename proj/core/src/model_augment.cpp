#include "xaiaug/model_augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaiaug/feature_augment.hpp"

namespace xaiaug {

NeuronImportance neuron_importance(const DenseNetwork& net, const LabeledDataset& references,
                                   const AttributionMethod& method, bool absolute) {
    if (references.size() == 0) throw UsageError("neuron_importance needs at least one reference sample");
    AttributionMethod m = method;
    m.target = AttributionTarget::true_class();
    const auto trace = forward(net, references.features);
    const auto maps = explain(net, trace, references.labels, m);
    NeuronImportance importance;
    for (std::size_t h = 0; h + 1 < net.layer_count(); ++h) {
        const Matrix& r = maps.at_input(h + 1);
        std::vector<double> score(r.cols(), 0.0);
        for (std::size_t i = 0; i < r.rows(); ++i) {
            for (std::size_t j = 0; j < r.cols(); ++j) score[j] += absolute ? std::abs(r(i, j)) : r(i, j);
        }
        for (auto& s : score) s /= static_cast<double>(r.rows());
        importance.scores.push_back(std::move(score));
    }
    return importance;
}

NeuronImportance random_importance(const DenseNetwork& net, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    NeuronImportance importance;
    for (std::size_t h = 0; h + 1 < net.layer_count(); ++h) {
        std::vector<double> score(net.layer(h).out_units());
        for (auto& s : score) s = u(rng);
        importance.scores.push_back(std::move(score));
    }
    return importance;
}

std::vector<std::size_t> prune_counts(const DenseNetwork& net, double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("prune fraction must lie in [0, 1)");
    std::vector<std::size_t> counts;
    for (std::size_t h = 0; h + 1 < net.layer_count(); ++h) counts.push_back(drop_count(fraction, net.layer(h).out_units()));
    return counts;
}

PruneResult prune_neurons(const DenseNetwork& net, const NeuronImportance& importance,
                          const std::vector<std::size_t>& count_per_layer) {
    const std::size_t hidden = net.layer_count() - 1;
    if (importance.scores.size() != hidden) throw ConsistencyError("importance does not match the hidden layers");
    if (count_per_layer.size() != hidden) {
        throw ConfigError("expected " + std::to_string(hidden) + " prune counts, got " +
                          std::to_string(count_per_layer.size()));
    }
    std::vector<DenseLayer> layers = net.layers();
    PruneResult result;
    for (std::size_t h = 0; h < hidden; ++h) {
        const auto& scores = importance.scores[h];
        const std::size_t width = net.layer(h).out_units();
        if (scores.size() != width) throw ConsistencyError("importance length mismatch at hidden layer " + std::to_string(h));
        if (count_per_layer[h] >= width) {
            throw ConfigError("cannot prune " + std::to_string(count_per_layer[h]) + " of " + std::to_string(width) +
                              " units in hidden layer " + std::to_string(h));
        }
        std::vector<std::size_t> order(width);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
        std::vector<std::size_t> removed(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count_per_layer[h]));
        std::sort(removed.begin(), removed.end());
        std::vector<double> removed_scores;
        for (auto u : removed) removed_scores.push_back(scores[u]);

        std::vector<std::size_t> kept;
        for (std::size_t u = 0; u < width; ++u) {
            if (!std::binary_search(removed.begin(), removed.end(), u)) kept.push_back(u);
        }
        // Rows of layer h, columns of layer h + 1.
        const DenseLayer& src = layers[h];
        DenseLayer out_layer{src.weights.select_rows(kept), {}, src.activation};
        for (auto u : kept) out_layer.biases.push_back(src.biases[u]);
        const DenseLayer& next = layers[h + 1];
        Matrix next_w(next.out_units(), kept.size());
        for (std::size_t o = 0; o < next.out_units(); ++o) {
            for (std::size_t n = 0; n < kept.size(); ++n) next_w(o, n) = next.weights(o, kept[n]);
        }
        layers[h] = std::move(out_layer);
        layers[h + 1].weights = std::move(next_w);
        result.removed.push_back(std::move(removed));
        result.removed_scores.push_back(std::move(removed_scores));
    }
    result.network = DenseNetwork(std::move(layers));
    return result;
}

nlohmann::json PruneResult::report() const {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t h = 0; h < removed.size(); ++h) {
        layers.push_back({{"hidden_layer", h}, {"removed_units", removed[h]}, {"scores", removed_scores[h]}});
    }
    return {{"layers", layers}, {"layer_sizes", network.layer_sizes()}};
}

}  // namespace xaiaug
