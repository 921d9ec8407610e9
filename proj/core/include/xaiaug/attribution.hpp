#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xaiaug/dense_net.hpp"

namespace xaiaug {

enum class AttributionKind { lrp, gradient, gradient_times_input, guided_backprop };

std::string to_string(AttributionKind kind);
AttributionKind attribution_kind_from_string(const std::string& name);

inline constexpr double kDefaultLrpEpsilon = 1e-6;
inline constexpr double kZPlusStabilizer = 1e-9;

struct LrpRule {
    enum class Kind { epsilon, zplus };
    Kind kind = Kind::epsilon;
    double epsilon = kDefaultLrpEpsilon;

    static LrpRule eps(double e = kDefaultLrpEpsilon) { return {Kind::epsilon, e}; }
    static LrpRule zplus() { return {Kind::zplus, 0.0}; }
};

/// Which output each sample is explained for.
struct AttributionTarget {
    enum class Kind { true_class, predicted_class, explicit_class };
    Kind kind = Kind::true_class;
    std::size_t class_index = 0;

    static AttributionTarget true_class() { return {Kind::true_class, 0}; }
    static AttributionTarget predicted() { return {Kind::predicted_class, 0}; }
    static AttributionTarget explicit_class(std::size_t c) { return {Kind::explicit_class, c}; }
};

/// Explanation method. For LRP every layer needs a rule: either an entry in
/// `lrp_rules` or `default_rule`. Non-LRP kinds must carry no rules.
struct AttributionMethod {
    AttributionKind kind = AttributionKind::lrp;
    std::map<std::size_t, LrpRule> lrp_rules;
    std::optional<LrpRule> default_rule;
    AttributionTarget target = AttributionTarget::true_class();

    /// Epsilon rule on every layer (the dense-only reduction of the eps/z+ composite).
    static AttributionMethod lrp_epsilon(double epsilon = kDefaultLrpEpsilon,
                                         AttributionTarget target = AttributionTarget::true_class());
    static AttributionMethod of_kind(AttributionKind kind,
                                     AttributionTarget target = AttributionTarget::true_class());

    void validate() const;
    /// Rule for layer `l`; throws ConfigError when none is configured.
    LrpRule rule_for(std::size_t l) const;
};

/// relevance[l] has the shape of trace.inputs[l]; relevance[L] holds the
/// output-layer seed.
struct RelevanceMaps {
    std::vector<Matrix> relevance;
    Labels targets;

    const Matrix& at_input(std::size_t l) const { return relevance.at(l); }
    std::size_t layer_count() const noexcept { return relevance.empty() ? 0 : relevance.size() - 1; }
};

/// Explains every sample of `trace`. LRP is seeded with the target-class
/// logit; gradient methods with a one-hot at the logits. `labels` may be
/// empty unless the target is the true class.
RelevanceMaps explain(const DenseNetwork& net, const ForwardTrace& trace, const Labels& labels,
                      const AttributionMethod& method);

/// r_j = sum_k a_j w_kj / (z_k + eps*sign(z_k)) * R_k, sign(0) = +1.
/// A zero denominator (only possible for eps = 0) passes no relevance.
Matrix lrp_dense_epsilon(const DenseLayer& layer, const Matrix& in_acts, const Matrix& out_relevance,
                         double epsilon);

/// r_j = sum_k a_j w+_kj / z+_k * R_k; zero denominators get kZPlusStabilizer.
Matrix lrp_dense_zplus(const DenseLayer& layer, const Matrix& in_acts, const Matrix& out_relevance);

/// Per row: r / max|r|; all-zero rows stay zero.
Matrix normalize_signed(const Matrix& r);
/// Per row: |r| / max|r|; all-zero rows stay zero.
Matrix normalize_abs(const Matrix& r);

/// Column means of a relevance matrix (mean attribution per feature).
std::vector<double> mean_per_feature(const Matrix& r);

/// Vector-Jacobian product through an epsilon-LRP pass: given G = dLoss/dR^l
/// (relevance at the input of `layer`), returns dLoss/dtheta for all
/// parameters. Every layer >= `layer` must use an epsilon rule; gates in the
/// trace are treated as constants. The loss is taken as the plain sum over
/// the batch, so callers apply their own averaging.
Gradients lrp_epsilon_vjp(const DenseNetwork& net, const ForwardTrace& trace, const RelevanceMaps& maps,
                          const AttributionMethod& method, std::size_t layer, const Matrix& relevance_grad);

/// dLoss/dr for a loss written in terms of normalize_abs(r), treating the
/// per-row divisor max|r| as a constant.
Matrix normalize_abs_backward(const Matrix& r, const Matrix& grad_wrt_normalized);

}  // namespace xaiaug
