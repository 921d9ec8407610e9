#include <gtest/gtest.h>

#include <cmath>

#include "testkit.hpp"
#include "xaiaug/data_redistribution.hpp"
#include "xaiaug/errors.hpp"

namespace {

using namespace testkit;

TEST(AttributionEntropy, HandValues) {
    EXPECT_NEAR(attribution_entropy(std::vector<double>{1, 1, 1, 1}), std::log(4.0), 1e-15);
    EXPECT_EQ(attribution_entropy(std::vector<double>{0, 2, 0}), 0.0);
    EXPECT_NEAR(attribution_entropy(std::vector<double>{1, -3}), -(0.25 * std::log(0.25) + 0.75 * std::log(0.75)), 1e-15);
    EXPECT_NEAR(attribution_entropy(std::vector<double>{1, -3}), 0.5623, 1e-4);
}

TEST(AttributionMseDistance, HandValues) {
    const std::vector<double> a{0, 1}, b{1, 1};
    EXPECT_DOUBLE_EQ(attribution_mse_distance(a, b), 0.5);
    EXPECT_DOUBLE_EQ(attribution_mse_distance(b, a), 0.5);
    EXPECT_EQ(attribution_mse_distance(a, a), 0.0);
}

TEST(ClassProportions, HandValues) {
    const auto u = class_proportions({{2.0, 2.0, 2.0}, MetricKind::entropy});
    for (double p : u) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
    const auto p = class_proportions({{0.0, std::log(3.0)}, MetricKind::entropy});
    EXPECT_NEAR(p[0], 0.25, 1e-15);
    EXPECT_NEAR(p[1], 0.75, 1e-15);
    const auto q = class_proportions({{0.0, std::log(3.0)}, MetricKind::entropy}, false);
    EXPECT_NEAR(q[0], 0.75, 1e-15);
}

TEST(Apportion, HandValues) {
    EXPECT_EQ(apportion(std::vector<double>{0.3, 0.7}, 10), (std::vector<std::size_t>{3, 7}));
    EXPECT_EQ(apportion(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 100), (std::vector<std::size_t>{25, 25, 25, 25}));
}

TEST(ResampleMiniepoch, AllFromOneClassAndEmptyClass) {
    const auto data = make_dataset(Matrix(5, 1), {0, 1, 0, 1, 0});
    Rng rng(1);
    for (auto i : resample_miniepoch(data, std::vector<double>{1, 0}, 12, rng)) EXPECT_EQ(data.labels[i], 0u);
    const auto single = make_dataset(Matrix(2, 1), {0, 0});
    EXPECT_THROW(resample_miniepoch(single, std::vector<double>{0.5, 0.5}, 4, rng), DataError);
}

TEST(BalanceScore, HandValues) {
    const auto b = balance_score(std::vector<double>{0.9, 0.7});
    EXPECT_NEAR(b.value, 8.0, 1e-12);
    EXPECT_FALSE(b.perfectly_balanced);
    const auto eq = balance_score(std::vector<double>{0.1, 0.1, 0.1});
    EXPECT_TRUE(eq.perfectly_balanced);
    EXPECT_TRUE(std::isinf(eq.as_double()));
    EXPECT_EQ(eq.to_string(), "balanced");
    EXPECT_THROW(balance_score(std::vector<double>{0.5}), UsageError);
}

TEST(InverseFrequency, RarerClassGetsMore) {
    const auto t = inverse_frequency_metrics({0, 0, 0, 1}, 2);
    const auto p = class_proportions(t);
    EXPECT_GT(p[1], p[0]);
}

TEST(RepresentativeSet, PicksPerClassAndSmoothsWindow) {
    const auto data = make_dataset(Matrix(8, 2), {0, 1, 0, 1, 0, 1, 0, 1});
    Rng rng(7);
    RepresentativeSet reps(data, 2, 2, rng);
    ASSERT_EQ(reps.indices().size(), 4u);
    EXPECT_EQ(reps.labels(), (Labels{0, 0, 1, 1}));
    for (int t = 1; t <= 7; ++t) reps.record(Matrix(4, 2, static_cast<double>(t)));
    EXPECT_EQ(reps.history_size(), 5u);
    // window 3..7
    EXPECT_EQ(reps.smoothed(), Matrix(4, 2, 5.0));
}

}  // namespace
