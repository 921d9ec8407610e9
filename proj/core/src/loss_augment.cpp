#include "xaiaug/loss_augment.hpp"

#include <cmath>

#include "xaiaug/log.hpp"

namespace xaiaug {

void GroundTruthMask::validate() const {
    if (values.empty()) throw PreconditionError("ground-truth mask is empty");
    for (double v : values.data()) {
        if (v != 0.0 && v != 1.0) throw PreconditionError("ground-truth mask must be binary");
    }
}

std::vector<double> GroundTruthMask::forbidden(std::size_t i) const {
    auto row = values.rows() == 1 ? values.row(0) : values.row(i);
    std::vector<double> out(row.begin(), row.end());
    if (semantics == MaskSemantics::relevance_mask) {
        for (auto& v : out) v = 1.0 - v;
    }
    return out;
}

namespace {

void check_mask(const Matrix& r_norm, const GroundTruthMask& mask) {
    mask.validate();
    if (mask.dims() != r_norm.cols() || (mask.values.rows() != 1 && mask.values.rows() != r_norm.rows())) {
        throw DimensionError("ground-truth mask " + shape_string(mask.values) + " vs relevance " +
                             shape_string(r_norm));
    }
}

}  // namespace

std::vector<double> rrr_reason_loss(const Matrix& r_norm, const GroundTruthMask& mask) {
    check_mask(r_norm, mask);
    std::vector<double> losses(r_norm.rows(), 0.0);
    for (std::size_t i = 0; i < r_norm.rows(); ++i) {
        const auto forbidden = mask.forbidden(i);
        auto r = r_norm.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            const double v = forbidden[j] * r[j];
            losses[i] += v * v;
        }
    }
    return losses;
}

Matrix rrr_reason_loss_grad(const Matrix& r_norm, const GroundTruthMask& mask) {
    check_mask(r_norm, mask);
    Matrix grad(r_norm.rows(), r_norm.cols());
    for (std::size_t i = 0; i < r_norm.rows(); ++i) {
        const auto forbidden = mask.forbidden(i);
        for (std::size_t j = 0; j < r_norm.cols(); ++j) {
            grad(i, j) = 2.0 * forbidden[j] * forbidden[j] * r_norm(i, j);
        }
    }
    return grad;
}

double L1Penalty::value(std::span<const double> r) const {
    double total = 0.0;
    for (double v : r) total += std::abs(v);
    return total;
}

void L1Penalty::gradient(std::span<const double> r, std::span<double> out) const {
    for (std::size_t j = 0; j < r.size(); ++j) out[j] = r[j] > 0.0 ? 1.0 : (r[j] < 0.0 ? -1.0 : 0.0);
}

double TargetDistancePenalty::value(std::span<const double> r) const {
    if (r.size() != target_.size()) throw DimensionError("attribution target has the wrong length");
    double total = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) total += (r[j] - target_[j]) * (r[j] - target_[j]);
    return total;
}

void TargetDistancePenalty::gradient(std::span<const double> r, std::span<double> out) const {
    if (r.size() != target_.size()) throw DimensionError("attribution target has the wrong length");
    for (std::size_t j = 0; j < r.size(); ++j) out[j] = 2.0 * (r[j] - target_[j]);
}

std::unique_ptr<PenaltyFunction> make_penalty(const std::string& name, std::vector<double> target) {
    if (name == "l1") return std::make_unique<L1Penalty>();
    if (name == "target_distance") return std::make_unique<TargetDistancePenalty>(std::move(target));
    throw ConfigError("unknown penalty '" + name + "' (expected l1 or target_distance)");
}

double attribution_prior_loss(double pred_loss, const PenaltyFunction& penalty, std::span<const double> r,
                              double lambda) {
    if (!(lambda >= 0.0)) throw ConfigError("attribution prior weight must be >= 0");
    return pred_loss + lambda * penalty.value(r);
}

double dual_objective(double loss_original, double loss_masked, double alpha, double beta) {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("dual objective weights must be >= 0");
    if (alpha == 0.0 && beta == 0.0) warn("dual objective with alpha = beta = 0 is identically zero");
    return alpha * loss_original + beta * loss_masked;
}

void validate_class_factors(std::span<const double> class_factors, const Labels& labels) {
    for (double f : class_factors) {
        if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("class factors must be positive");
    }
    for (auto y : labels) {
        if (y >= class_factors.size()) throw ConfigError("no loss factor for class " + std::to_string(y));
    }
}

double classwise_loss_scaling(std::span<const double> per_sample_losses, const Labels& labels,
                              std::span<const double> class_factors) {
    if (per_sample_losses.size() != labels.size()) throw DimensionError("losses and labels differ in length");
    validate_class_factors(class_factors, labels);
    if (labels.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) total += class_factors[labels[i]] * per_sample_losses[i];
    return total / static_cast<double>(labels.size());
}

}  // namespace xaiaug
