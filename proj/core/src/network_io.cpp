#include "xaiaug/network_io.hpp"

#include <fstream>
#include <sstream>

namespace xaiaug {

namespace {
constexpr const char* kFormatName = "xaiaug.dense_network";
}

nlohmann::json network_to_json(const DenseNetwork& net) {
    nlohmann::json doc;
    doc["format"] = kFormatName;
    doc["version"] = kNetworkFormatVersion;
    doc["layer_sizes"] = net.layer_sizes();
    auto& activations = doc["activations"] = nlohmann::json::array();
    auto& layers = doc["layers"] = nlohmann::json::array();
    for (const auto& layer : net.layers()) {
        activations.push_back(to_string(layer.activation));
        layers.push_back({{"in_units", layer.in_units()},
                          {"out_units", layer.out_units()},
                          {"weights", layer.weights.data()},
                          {"biases", layer.biases}});
    }
    return doc;
}

DenseNetwork network_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != kFormatName) throw DataError("not a dense network document");
        const int version = doc.at("version").get<int>();
        if (version != kNetworkFormatVersion) {
            throw DataError("unsupported network format version " + std::to_string(version));
        }
        const auto& activations = doc.at("activations");
        const auto& layers_json = doc.at("layers");
        if (activations.size() != layers_json.size()) throw DataError("activations/layers length mismatch");
        std::vector<DenseLayer> layers;
        for (std::size_t l = 0; l < layers_json.size(); ++l) {
            const auto& lj = layers_json[l];
            const auto in = lj.at("in_units").get<std::size_t>();
            const auto out = lj.at("out_units").get<std::size_t>();
            DenseLayer layer;
            layer.weights = Matrix(out, in, lj.at("weights").get<std::vector<double>>());
            layer.biases = lj.at("biases").get<std::vector<double>>();
            layer.activation = activation_from_string(activations[l].get<std::string>());
            layers.push_back(std::move(layer));
        }
        DenseNetwork net(std::move(layers));
        if (doc.contains("layer_sizes") && doc["layer_sizes"].get<std::vector<std::size_t>>() != net.layer_sizes()) {
            throw DataError("layer_sizes disagree with layer shapes");
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed network document: ") + e.what());
    } catch (const DimensionError& e) {
        throw DataError(std::string("malformed network document: ") + e.what());
    }
}

std::string dump_network(const DenseNetwork& net) { return network_to_json(net).dump(2) + "\n"; }

void save_network(const DenseNetwork& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << dump_network(net) << "\n";
    if (!out) throw IoError("failed writing " + path.string());
}

DenseNetwork load_network(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return network_from_json(doc);
}

}  // namespace xaiaug
