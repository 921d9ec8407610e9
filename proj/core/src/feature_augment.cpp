#include "xaiaug/feature_augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaiaug/attribution.hpp"

namespace xaiaug {

namespace {

void require_unit_range(const Matrix& r, double lo, const char* what) {
    for (double v : r.data()) {
        if (!(v >= lo && v <= 1.0)) {
            throw PreconditionError(std::string(what) + ": relevance " + std::to_string(v) + " outside [" +
                                    std::to_string(lo) + ", 1]");
        }
    }
}

void require_rate(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
}

// Indices of one row ordered by relevance; descending puts the most relevant
// first. Stable sorting keeps the lowest index first among ties.
std::vector<std::size_t> rank(std::span<const double> scores, bool descending) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return descending ? scores[a] > scores[b] : scores[a] < scores[b];
    });
    return order;
}

// Zeroes `dropped` and rescales the rest so the row sum is preserved.
void drop_and_rescale(std::span<const double> f, const std::vector<std::size_t>& dropped, std::span<double> out_f,
                      std::span<double> out_gate) {
    std::vector<bool> keep(f.size(), true);
    for (auto j : dropped) keep[j] = false;
    double before = 0.0, survivors = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        before += f[j];
        if (keep[j]) survivors += f[j];
    }
    const double scale = survivors != 0.0 ? before / survivors : 1.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        out_gate[j] = keep[j] ? scale : 0.0;
        out_f[j] = f[j] * out_gate[j];
    }
}

}  // namespace

FeatureMask attention_mask(const Matrix& r_signed_norm) {
    require_unit_range(r_signed_norm, -1.0, "attention_mask");
    FeatureMask mask{Matrix(r_signed_norm.rows(), r_signed_norm.cols()), MaskMode::multiplicative};
    for (std::size_t i = 0; i < r_signed_norm.size(); ++i) {
        mask.values.data()[i] = 0.5 + (r_signed_norm.data()[i] + 1.0) / 2.0;
    }
    return mask;
}

FeatureMask lrp_weight_mask(const Matrix& r_signed_norm) {
    require_unit_range(r_signed_norm, -1.0, "lrp_weight_mask");
    FeatureMask mask{r_signed_norm, MaskMode::multiplicative};
    for (auto& v : mask.values.data()) v += 1.0;
    return mask;
}

Matrix lrp_weighted_features(const Matrix& features, const Matrix& r_signed_norm) {
    require_same_shape(features, r_signed_norm, "lrp_weighted_features");
    return apply_mask(features, lrp_weight_mask(r_signed_norm));
}

Matrix apply_mask(const Matrix& features, const FeatureMask& mask) {
    require_same_shape(features, mask.values, "apply_mask");
    return hadamard(mask.values, features);
}

std::size_t drop_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
}

FeatureMask binary_relevance_mask(const Matrix& r, double fraction, RelevanceMaskMode mode) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("mask fraction must lie in [0, 1]");
    const Matrix importance = normalize_abs(r);
    FeatureMask mask{Matrix(r.rows(), r.cols(), 1.0), MaskMode::binary};
    const std::size_t count = drop_count(fraction, r.cols());
    for (std::size_t i = 0; i < r.rows(); ++i) {
        auto order = rank(importance.row(i), mode == RelevanceMaskMode::zero_most_relevant);
        for (std::size_t n = 0; n < count; ++n) mask.values(i, order[n]) = 0.0;
    }
    return mask;
}

DropoutResult xai_guided_dropout(const Matrix& features, const Matrix& r_abs_norm, double rate) {
    require_rate(rate);
    require_same_shape(features, r_abs_norm, "xai_guided_dropout");
    DropoutResult out{Matrix(features.rows(), features.cols()), Matrix(features.rows(), features.cols())};
    const std::size_t count = drop_count(rate, features.cols());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto order = rank(r_abs_norm.row(i), true);
        order.resize(count);
        drop_and_rescale(features.row(i), order, out.features.row(i), out.gate.row(i));
    }
    return out;
}

DropoutResult random_dropout(const Matrix& features, double rate, Rng& rng) {
    require_rate(rate);
    DropoutResult out{Matrix(features.rows(), features.cols()), Matrix(features.rows(), features.cols())};
    const std::size_t count = drop_count(rate, features.cols());
    std::vector<std::size_t> all(features.cols());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::vector<std::size_t> chosen;
        std::sample(all.begin(), all.end(), std::back_inserter(chosen), count, rng);
        drop_and_rescale(features.row(i), chosen, out.features.row(i), out.gate.row(i));
    }
    return out;
}

}  // namespace xaiaug
