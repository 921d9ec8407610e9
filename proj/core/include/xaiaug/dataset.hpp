#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xaiaug/matrix.hpp"

namespace xaiaug {

using Labels = std::vector<std::size_t>;

enum class Split { train, test };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

/// Features (N x D) with one class index per row.
struct LabeledDataset {
    Matrix features;
    Labels labels;
    Split split = Split::train;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dims() const noexcept { return features.cols(); }

    /// Largest label + 1; at least `min_classes`.
    std::size_t num_classes(std::size_t min_classes = 0) const;

    /// Throws DataError unless rows match labels, N,D > 0 and every feature is finite.
    void validate() const;

    LabeledDataset subset(std::span<const std::size_t> indices) const;

    /// Row indices grouped by class; vector has `classes` entries.
    std::vector<std::vector<std::size_t>> indices_by_class(std::size_t classes) const;
};

}  // namespace xaiaug
