#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "xaiaug/attribution.hpp"
#include "xaiaug/dense_net.hpp"
#include "xaiaug/rng.hpp"

namespace xaiaug {

/// scores[h] has one entry per unit of hidden layer h, i.e. the output of
/// dense layer h (= the input of layer h + 1).
struct NeuronImportance {
    std::vector<std::vector<double>> scores;
};

/// Mean over reference samples of the relevance at each hidden unit,
/// explained w.r.t. the true class. `absolute` averages |relevance|.
NeuronImportance neuron_importance(const DenseNetwork& net, const LabeledDataset& references,
                                   const AttributionMethod& method, bool absolute = true);

/// Uniformly random scores; pruning by them is the random baseline.
NeuronImportance random_importance(const DenseNetwork& net, Rng& rng);

struct PruneResult {
    DenseNetwork network;
    /// Removed unit indices per hidden layer, in original numbering.
    std::vector<std::vector<std::size_t>> removed;
    std::vector<std::vector<double>> removed_scores;

    nlohmann::json report() const;
};

/// Removes the `count_per_layer[h]` lowest-scoring units of each hidden
/// layer (ties to the lowest index): their weight rows and biases in layer h
/// and their weight columns in layer h + 1.
PruneResult prune_neurons(const DenseNetwork& net, const NeuronImportance& importance,
                          const std::vector<std::size_t>& count_per_layer);

/// round(fraction * width) for each hidden layer.
std::vector<std::size_t> prune_counts(const DenseNetwork& net, double fraction);

}  // namespace xaiaug
