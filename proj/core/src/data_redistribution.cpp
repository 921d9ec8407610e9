#include "xaiaug/data_redistribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace xaiaug {

double attribution_entropy(std::span<const double> r) {
    double total = 0.0;
    for (double v : r) total += std::abs(v);
    if (total == 0.0) return 0.0;
    double h = 0.0;
    for (double v : r) {
        const double p = std::abs(v) / total;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

double attribution_mse_distance(std::span<const double> r_now, std::span<const double> r_prev) {
    if (r_now.size() != r_prev.size()) throw DimensionError("attribution_mse_distance: length mismatch");
    if (r_now.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < r_now.size(); ++j) total += (r_now[j] - r_prev[j]) * (r_now[j] - r_prev[j]);
    return total / static_cast<double>(r_now.size());
}

std::string to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::entropy: return "entropy";
        case MetricKind::mse_distance: return "mse_distance";
        case MetricKind::inverse_frequency: return "inverse_frequency";
    }
    return "entropy";
}

MetricKind metric_kind_from_string(const std::string& name) {
    if (name == "entropy") return MetricKind::entropy;
    if (name == "mse_distance") return MetricKind::mse_distance;
    if (name == "inverse_frequency") return MetricKind::inverse_frequency;
    throw ConfigError("unknown class metric '" + name + "'");
}

std::vector<double> class_proportions(const ClassMetricTable& metrics, bool higher_gets_more) {
    if (metrics.values.empty()) throw ConfigError("class_proportions needs at least one class");
    std::vector<double> x = metrics.values;
    for (auto& v : x) {
        if (!std::isfinite(v)) throw NumericError("non-finite class metric");
        if (!higher_gets_more) v = -v;
    }
    const double peak = *std::max_element(x.begin(), x.end());
    double total = 0.0;
    for (auto& v : x) total += (v = std::exp(v - peak));
    for (auto& v : x) v /= total;
    return x;
}

ClassMetricTable inverse_frequency_metrics(const Labels& labels, std::size_t classes) {
    if (labels.empty()) throw UsageError("inverse_frequency_metrics on empty labels");
    std::vector<double> counts(classes, 0.0);
    for (auto y : labels) {
        if (y >= classes) throw IndexError("label out of range");
        counts[y] += 1.0;
    }
    ClassMetricTable t{std::vector<double>(classes), MetricKind::inverse_frequency};
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] == 0.0) throw DataError("class " + std::to_string(c) + " has no samples");
        t.values[c] = -std::log(counts[c] / static_cast<double>(labels.size()));
    }
    return t;
}

std::vector<std::size_t> apportion(std::span<const double> proportions, std::size_t size) {
    double total = 0.0;
    for (double p : proportions) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("proportions must be finite and >= 0");
        total += p;
    }
    if (!(total > 0.0)) throw ConfigError("proportions sum to zero");
    std::vector<std::size_t> counts(proportions.size());
    std::vector<double> remainder(proportions.size());
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < proportions.size(); ++c) {
        const double quota = static_cast<double>(size) * proportions[c] / total;
        counts[c] = static_cast<std::size_t>(std::floor(quota));
        remainder[c] = quota - static_cast<double>(counts[c]);
        assigned += counts[c];
    }
    std::vector<std::size_t> order(proportions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t n = 0; assigned < size; ++n, ++assigned) counts[order[n % order.size()]] += 1;
    return counts;
}

std::vector<std::size_t> resample_miniepoch(const LabeledDataset& data, std::span<const double> proportions,
                                            std::size_t size, Rng& rng) {
    auto groups = data.indices_by_class(std::max(proportions.size(), data.num_classes()));
    if (groups.size() != proportions.size()) {
        throw ConfigError("dataset has " + std::to_string(groups.size()) + " classes but " +
                          std::to_string(proportions.size()) + " proportions were given");
    }
    const auto counts = apportion(proportions, size);
    std::vector<std::size_t> out;
    out.reserve(size);
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) continue;
        auto& pool = groups[c];
        if (pool.empty()) throw DataError("class " + std::to_string(c) + " has positive proportion but no samples");
        std::shuffle(pool.begin(), pool.end(), rng);
        const std::size_t direct = std::min(counts[c], pool.size());
        out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(direct));
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t n = direct; n < counts[c]; ++n) out.push_back(pool[pick(rng)]);
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

double BalanceScore::as_double() const {
    return perfectly_balanced ? std::numeric_limits<double>::infinity() : value;
}

std::string BalanceScore::to_string() const {
    if (perfectly_balanced) return "balanced";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

BalanceScore balance_score(std::span<const double> classwise_performance) {
    if (classwise_performance.size() < 2) throw UsageError("balance score needs at least two classes");
    // equal performances: sigma is exactly zero, whatever the mean rounds to
    const auto first = classwise_performance.front();
    if (std::all_of(classwise_performance.begin(), classwise_performance.end(), [&](double v) { return v == first; })) {
        return {0.0, true};
    }
    const double n = static_cast<double>(classwise_performance.size());
    const double mean = std::accumulate(classwise_performance.begin(), classwise_performance.end(), 0.0) / n;
    double var = 0.0;
    for (double v : classwise_performance) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    if (sd == 0.0) return {0.0, true};
    return {mean / sd, false};
}

RepresentativeSet::RepresentativeSet(const LabeledDataset& data, std::size_t classes, std::size_t per_class, Rng& rng)
    : classes_(classes) {
    auto groups = data.indices_by_class(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<std::size_t> chosen;
        std::sample(groups[c].begin(), groups[c].end(), std::back_inserter(chosen),
                    static_cast<std::ptrdiff_t>(per_class), rng);
        for (auto i : chosen) {
            indices_.push_back(i);
            labels_.push_back(c);
        }
    }
}

void RepresentativeSet::record(const Matrix& attributions) {
    if (attributions.rows() != indices_.size()) throw DimensionError("one attribution row per representative expected");
    if (!history_.empty()) {
        require_same_shape(history_.back(), attributions, "representative history");
        previous_smoothed_ = smoothed();
    }
    history_.push_back(attributions);
    while (history_.size() > kHistoryLength) history_.pop_front();
}

Matrix RepresentativeSet::smoothed() const {
    if (history_.empty()) throw UsageError("no attributions recorded yet");
    Matrix mean(history_.front().rows(), history_.front().cols());
    for (const auto& h : history_) {
        for (std::size_t i = 0; i < h.size(); ++i) mean.data()[i] += h.data()[i];
    }
    for (auto& v : mean.data()) v /= static_cast<double>(history_.size());
    return mean;
}

ClassMetricTable RepresentativeSet::class_metrics(MetricKind kind) const {
    if (kind == MetricKind::inverse_frequency) {
        throw ConfigError("inverse_frequency is computed from the training labels, not attributions");
    }
    ClassMetricTable table{std::vector<double>(classes_, 0.0), kind};
    if (kind == MetricKind::mse_distance && !previous_smoothed_) return table;
    const Matrix now = smoothed();
    std::vector<double> counts(classes_, 0.0);
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        const double m = kind == MetricKind::entropy ? attribution_entropy(now.row(i))
                                                     : attribution_mse_distance(now.row(i), previous_smoothed_->row(i));
        table.values[labels_[i]] += m;
        counts[labels_[i]] += 1.0;
    }
    for (std::size_t c = 0; c < classes_; ++c) {
        if (counts[c] > 0.0) table.values[c] /= counts[c];
    }
    return table;
}

}  // namespace xaiaug
