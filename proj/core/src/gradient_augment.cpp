#include "xaiaug/gradient_augment.hpp"

#include <cmath>

namespace xaiaug {

Matrix mask_feature_gradient(const Matrix& grad, const Matrix& mask, double lambda) {
    require_same_shape(grad, mask, "mask_feature_gradient");
    Matrix out = grad;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += lambda * grad.data()[i] * mask.data()[i];
    return out;
}

WeightImportance raw_weight_importance(std::span<const double> r_in, std::span<const double> r_out) {
    WeightImportance w{Matrix(r_out.size(), r_in.size()), false};
    for (std::size_t o = 0; o < r_out.size(); ++o) {
        for (std::size_t j = 0; j < r_in.size(); ++j) w.scores(o, j) = std::abs(r_out[o]) * std::abs(r_in[j]);
    }
    return w;
}

WeightImportance weight_importance_scores(std::span<const double> r_in, std::span<const double> r_out) {
    if (r_in.empty() || r_out.empty()) throw DimensionError("weight importance needs nonempty relevances");
    WeightImportance w = raw_weight_importance(r_in, r_out);
    double total = 0.0;
    for (double v : w.scores.data()) total += v;
    if (!(total > 0.0)) throw DegenerateImportanceError("weight importance is identically zero");
    for (auto& v : w.scores.data()) v /= total;
    w.normalized = true;
    return w;
}

WeightImportance uniform_weight_importance(std::size_t out_units, std::size_t in_units) {
    const double n = static_cast<double>(out_units * in_units);
    return {Matrix(out_units, in_units, 1.0 / n), true};
}

Matrix scaled_weight_update(const Matrix& weights, const Matrix& grad, const WeightImportance& importance,
                            double learning_rate) {
    require_same_shape(weights, grad, "scaled_weight_update");
    require_same_shape(weights, importance.scores, "scaled_weight_update");
    if (!importance.normalized) throw PreconditionError("scaled_weight_update needs normalized importance");
    Matrix out = weights;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] -= learning_rate * grad.data()[i] * importance.scores.data()[i];
    }
    return out;
}

}  // namespace xaiaug
