#pragma once

#include <span>

#include "xaiaug/matrix.hpp"

namespace xaiaug {

/// grad' = grad + lambda * (grad (.) mask).
Matrix mask_feature_gradient(const Matrix& grad, const Matrix& mask, double lambda);

/// Weight-wise importance for one dense layer, shaped like its weights
/// (out_units x in_units).
struct WeightImportance {
    Matrix scores;
    bool normalized = false;
};

/// Outer product |r_out| x |r_in| divided by its sum. `r_in` is the relevance
/// at the layer input, `r_out` at the input of the next layer. Absolute
/// values are taken first so the normalized scores are a distribution.
/// Throws DegenerateImportanceError when the product is identically zero.
WeightImportance weight_importance_scores(std::span<const double> r_in, std::span<const double> r_out);

/// Same with the raw (unnormalized) outer product kept.
WeightImportance raw_weight_importance(std::span<const double> r_in, std::span<const double> r_out);

/// Uniform 1/n importance; the fallback after a degenerate score.
WeightImportance uniform_weight_importance(std::size_t out_units, std::size_t in_units);

/// theta' = theta - lr * (grad (.) importance).
Matrix scaled_weight_update(const Matrix& weights, const Matrix& grad, const WeightImportance& importance,
                            double learning_rate);

}  // namespace xaiaug
