#include "xaiaug/dataset.hpp"

#include <algorithm>
#include <cmath>

namespace xaiaug {

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "test") return Split::test;
    throw DataError("unknown split '" + name + "'");
}

std::size_t LabeledDataset::num_classes(std::size_t min_classes) const {
    std::size_t classes = min_classes;
    for (auto y : labels) classes = std::max(classes, y + 1);
    return classes;
}

void LabeledDataset::validate() const {
    if (labels.empty() || features.cols() == 0) throw DataError("dataset must have N,D > 0");
    if (features.rows() != labels.size()) {
        throw DataError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                        std::to_string(labels.size()) + " labels");
    }
    if (!features.all_finite()) throw DataError("dataset contains non-finite features");
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.features = features.select_rows(indices);
    out.labels.reserve(indices.size());
    for (auto i : indices) out.labels.push_back(labels.at(i));
    out.split = split;
    return out;
}

std::vector<std::vector<std::size_t>> LabeledDataset::indices_by_class(std::size_t classes) const {
    std::vector<std::vector<std::size_t>> groups(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes) throw IndexError("label " + std::to_string(labels[i]) + " out of range");
        groups[labels[i]].push_back(i);
    }
    return groups;
}

}  // namespace xaiaug
