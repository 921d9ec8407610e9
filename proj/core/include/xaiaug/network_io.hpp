#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "xaiaug/dense_net.hpp"

namespace xaiaug {

/// Versioned JSON document for DenseNetwork:
///
///   {
///     "format": "xaiaug.dense_network",
///     "version": 1,
///     "layer_sizes": [5, 64, 32, 16, 2],
///     "activations": ["relu", "relu", "relu", "softmax"],
///     "layers": [{"in_units": 5, "out_units": 64,
///                 "weights": [...row-major, out_units*in_units...],
///                 "biases": [...]}, ...]
///   }
///
/// Numbers are written as shortest round-trip decimals, so load(save(net))
/// reproduces every weight bit for bit.
inline constexpr int kNetworkFormatVersion = 1;

nlohmann::json network_to_json(const DenseNetwork& net);
DenseNetwork network_from_json(const nlohmann::json& doc);

std::string dump_network(const DenseNetwork& net);
void save_network(const DenseNetwork& net, const std::filesystem::path& path);
DenseNetwork load_network(const std::filesystem::path& path);

}  // namespace xaiaug
