#include <gtest/gtest.h>

#include <cmath>

#include "testkit.hpp"
#include "xaiaug/errors.hpp"
#include "xaiaug/gradient_augment.hpp"
#include "xaiaug/loss_augment.hpp"

namespace {

using namespace testkit;

GroundTruthMask relevance_mask(std::vector<double> v) {
    return {Matrix::row_vector(v), MaskSemantics::relevance_mask};
}

TEST(ReasonLoss, HandValues) {
    EXPECT_NEAR(rrr_reason_loss(Matrix{{0.5, 0.8}}, relevance_mask({1, 0}))[0], 0.64, 1e-15);
    EXPECT_EQ(rrr_reason_loss(Matrix{{0.5, 0.8}}, relevance_mask({1, 1}))[0], 0.0);
    EXPECT_EQ(rrr_reason_loss(Matrix{{0.0, 0.0}}, relevance_mask({1, 0}))[0], 0.0);
    const GroundTruthMask irr{Matrix{{0, 1}}, MaskSemantics::irrelevance_mask};
    EXPECT_NEAR(rrr_reason_loss(Matrix{{0.5, 0.8}}, irr)[0], 0.64, 1e-15);
}

TEST(ReasonLoss, GradientIsTwiceForbiddenRelevance) {
    const auto g = rrr_reason_loss_grad(Matrix{{0.5, 0.8}}, relevance_mask({1, 0}));
    EXPECT_EQ(g, (Matrix{{0.0, 1.6}}));
}

TEST(ReasonLoss, RejectsNonBinaryMask) {
    EXPECT_THROW(rrr_reason_loss(Matrix{{0.5, 0.8}}, relevance_mask({1, 0.5})), PreconditionError);
    EXPECT_THROW(rrr_reason_loss(Matrix{{0.5, 0.8, 1}}, relevance_mask({1, 0})), DimensionError);
}

TEST(AttributionPrior, HandValues) {
    const std::vector<double> r{1, -2};
    const auto l1 = make_penalty("l1");
    EXPECT_DOUBLE_EQ(attribution_prior_loss(0.0, *l1, r, 1.0), 3.0);
    EXPECT_DOUBLE_EQ(attribution_prior_loss(0.7, *l1, r, 0.0), 0.7);
    const auto td = make_penalty("target_distance", r);
    EXPECT_DOUBLE_EQ(attribution_prior_loss(0.7, *td, r, 5.0), 0.7);
    EXPECT_THROW(attribution_prior_loss(0.7, *l1, r, -1.0), ConfigError);
    EXPECT_THROW(make_penalty("nope"), ConfigError);
}

TEST(DualObjective, HandValues) {
    EXPECT_DOUBLE_EQ(dual_objective(2, 4, 1, 0), 2.0);
    EXPECT_DOUBLE_EQ(dual_objective(2, 4, 0.5, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(dual_objective(2, 4, 0, 1), 4.0);
}

TEST(ClasswiseLossScaling, HandValues) {
    const std::vector<double> losses{1, 3};
    const Labels y{0, 1};
    EXPECT_DOUBLE_EQ(classwise_loss_scaling(losses, y, std::vector<double>{1, 1}), 2.0);
    EXPECT_DOUBLE_EQ(classwise_loss_scaling(losses, y, std::vector<double>{2, 1}), 2.5);
    EXPECT_DOUBLE_EQ(classwise_loss_scaling(losses, {0, 0}, std::vector<double>{2}), 4.0);
    EXPECT_THROW(classwise_loss_scaling(losses, y, std::vector<double>{2}), ConfigError);
}

TEST(FeatureGradientMask, HandValues) {
    EXPECT_EQ(mask_feature_gradient(Matrix{{1, 2}}, Matrix{{0, 1}}, 0.5), (Matrix{{1, 3}}));
    EXPECT_EQ(mask_feature_gradient(Matrix{{1, 2}}, Matrix{{1, 1}}, 1.0), (Matrix{{2, 4}}));
    EXPECT_EQ(mask_feature_gradient(Matrix{{1, 2}}, Matrix{{1, 1}}, 0.0), (Matrix{{1, 2}}));
}

TEST(WeightImportance, HandValues) {
    const std::vector<double> rin{1, 2}, rout{3};
    EXPECT_EQ(raw_weight_importance(rin, rout).scores, (Matrix{{3, 6}}));
    const auto w = weight_importance_scores(rin, rout);
    EXPECT_NEAR(w.scores(0, 0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(w.scores(0, 1), 2.0 / 3.0, 1e-15);
    const auto u = weight_importance_scores(std::vector<double>{2, 2, 2}, std::vector<double>{-1, -1});
    EXPECT_LT(max_abs_diff(u.scores, uniform_weight_importance(2, 3).scores), 1e-15);
    EXPECT_THROW(weight_importance_scores(std::vector<double>{0, 0}, rout), DegenerateImportanceError);
}

TEST(ScaledWeightUpdate, HandValues) {
    // 2x1 weights, importance (0.25, 0.75)
    const WeightImportance imp{Matrix{{0.25}, {0.75}}, true};
    const auto w = scaled_weight_update(Matrix{{1.0}, {1.0}}, Matrix{{4.0}, {-2.0}}, imp, 0.5);
    EXPECT_DOUBLE_EQ(w(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(w(1, 0), 1.75);
    const auto uni = scaled_weight_update(Matrix{{1.0, 1.0}}, Matrix{{1.0, 2.0}}, uniform_weight_importance(1, 2), 1.0);
    EXPECT_EQ(uni, (Matrix{{0.5, 0.0}}));
    EXPECT_THROW(scaled_weight_update(Matrix{{1.0}}, Matrix{{1.0}}, {Matrix{{1.0}}, false}, 1.0), PreconditionError);
}

}  // namespace
