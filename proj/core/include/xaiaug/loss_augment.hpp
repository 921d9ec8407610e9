#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xaiaug/dataset.hpp"
#include "xaiaug/matrix.hpp"

namespace xaiaug {

enum class MaskSemantics {
    relevance_mask,    ///< 1 = the feature should be relevant (r_A)
    irrelevance_mask,  ///< 1 = the feature should be irrelevant (a)
};

/// Binary ground truth over the explained layer's features. `values` is
/// either one row shared by all samples or one row per sample.
struct GroundTruthMask {
    Matrix values;
    MaskSemantics semantics = MaskSemantics::relevance_mask;

    void validate() const;
    /// 1 where relevance is penalized, for sample `i`.
    std::vector<double> forbidden(std::size_t i) const;
    std::size_t dims() const noexcept { return values.cols(); }
};

/// Per sample: ||forbidden (.) r'||_2^2.
std::vector<double> rrr_reason_loss(const Matrix& r_norm, const GroundTruthMask& mask);

/// d/dr' of rrr_reason_loss, row by row.
Matrix rrr_reason_loss_grad(const Matrix& r_norm, const GroundTruthMask& mask);

/// Scalar penalty zeta(r) >= 0 on one sample's attribution, with its gradient.
class PenaltyFunction {
public:
    virtual ~PenaltyFunction() = default;
    virtual double value(std::span<const double> r) const = 0;
    virtual void gradient(std::span<const double> r, std::span<double> out) const = 0;
    virtual std::string name() const = 0;
};

/// sum_j |r_j|
class L1Penalty final : public PenaltyFunction {
public:
    double value(std::span<const double> r) const override;
    void gradient(std::span<const double> r, std::span<double> out) const override;
    std::string name() const override { return "l1"; }
};

/// sum_j (r_j - target_j)^2
class TargetDistancePenalty final : public PenaltyFunction {
public:
    explicit TargetDistancePenalty(std::vector<double> target) : target_(std::move(target)) {}
    double value(std::span<const double> r) const override;
    void gradient(std::span<const double> r, std::span<double> out) const override;
    std::string name() const override { return "target_distance"; }

private:
    std::vector<double> target_;
};

std::unique_ptr<PenaltyFunction> make_penalty(const std::string& name, std::vector<double> target = {});

/// pred_loss + lambda * zeta(r).
double attribution_prior_loss(double pred_loss, const PenaltyFunction& penalty, std::span<const double> r,
                              double lambda);

/// alpha * loss_original + beta * loss_masked. Warns when both weights are zero.
double dual_objective(double loss_original, double loss_masked, double alpha, double beta);

/// mean_i factor[label_i] * loss_i.
double classwise_loss_scaling(std::span<const double> per_sample_losses, const Labels& labels,
                              std::span<const double> class_factors);

/// Checks that every factor is positive and one exists for each label.
void validate_class_factors(std::span<const double> class_factors, const Labels& labels);

}  // namespace xaiaug
