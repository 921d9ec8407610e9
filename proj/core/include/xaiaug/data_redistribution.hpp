#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xaiaug/dataset.hpp"
#include "xaiaug/matrix.hpp"
#include "xaiaug/rng.hpp"

namespace xaiaug {

/// Shannon entropy (natural log) of |r| / sum|r|; 0 for an all-zero map.
double attribution_entropy(std::span<const double> r);

/// Mean squared elementwise difference.
double attribution_mse_distance(std::span<const double> r_now, std::span<const double> r_prev);

enum class MetricKind { entropy, mse_distance, inverse_frequency };

std::string to_string(MetricKind kind);
MetricKind metric_kind_from_string(const std::string& name);

struct ClassMetricTable {
    std::vector<double> values;
    MetricKind kind = MetricKind::entropy;
};

/// Softmax over the class metrics. With `higher_gets_more = false` the
/// metrics are negated first.
std::vector<double> class_proportions(const ClassMetricTable& metrics, bool higher_gets_more = true);

/// -log(class frequency) per class; the data-distribution control policy.
ClassMetricTable inverse_frequency_metrics(const Labels& labels, std::size_t classes);

/// Largest-remainder apportionment of `size` by `proportions`; ties in the
/// remainders go to the lowest class index.
std::vector<std::size_t> apportion(std::span<const double> proportions, std::size_t size);

/// Exactly `size` indices into `data`, with per-class counts from apportion().
/// Within a class indices are drawn without replacement until the class is
/// exhausted, then uniformly with replacement. The result is shuffled.
std::vector<std::size_t> resample_miniepoch(const LabeledDataset& data, std::span<const double> proportions,
                                            std::size_t size, Rng& rng);

/// b_p = mean / population std of class-wise performance. A zero spread is
/// reported through `perfectly_balanced` instead of a number.
struct BalanceScore {
    double value = 0.0;
    bool perfectly_balanced = false;

    /// +inf for a perfectly balanced outcome; used when averaging.
    double as_double() const;
    std::string to_string() const;
};

BalanceScore balance_score(std::span<const double> classwise_performance);

/// Fixed representative samples per class and a short history of their
/// input attributions.
class RepresentativeSet {
public:
    static constexpr std::size_t kHistoryLength = 5;

    RepresentativeSet() = default;
    /// Picks `per_class` samples per class (fewer if a class is smaller).
    RepresentativeSet(const LabeledDataset& data, std::size_t classes, std::size_t per_class, Rng& rng);

    const std::vector<std::size_t>& indices() const noexcept { return indices_; }
    const Labels& labels() const noexcept { return labels_; }
    std::size_t classes() const noexcept { return classes_; }

    /// Records this mini-epoch's attributions (one row per representative).
    void record(const Matrix& attributions);
    std::size_t history_size() const noexcept { return history_.size(); }

    /// Mean over the stored history (at most kHistoryLength mini-epochs).
    Matrix smoothed() const;

    /// Class-wise mean of the chosen metric. MSE compares the current
    /// smoothed map with the previous one; without a previous map every
    /// class gets 0.
    ClassMetricTable class_metrics(MetricKind kind) const;

private:
    std::vector<std::size_t> indices_;
    Labels labels_;
    std::size_t classes_ = 0;
    std::deque<Matrix> history_;
    std::optional<Matrix> previous_smoothed_;
};

}  // namespace xaiaug
