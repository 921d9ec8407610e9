#pragma once

#include <cstddef>

#include "xaiaug/matrix.hpp"
#include "xaiaug/rng.hpp"

namespace xaiaug {

enum class MaskMode { multiplicative, binary };

/// Elementwise multiplier for the input features of one layer.
struct FeatureMask {
    Matrix values;
    MaskMode mode = MaskMode::multiplicative;
};

/// M = 0.5 + (r' + 1) / 2, so M lies in [0.5, 1.5] and r' = 0 leaves a feature
/// untouched. `r_signed_norm` must come from normalize_signed.
FeatureMask attention_mask(const Matrix& r_signed_norm);

/// (1 + r') as a multiplicative mask.
FeatureMask lrp_weight_mask(const Matrix& r_signed_norm);

/// f' = (1 + r') * f.
Matrix lrp_weighted_features(const Matrix& features, const Matrix& r_signed_norm);

Matrix apply_mask(const Matrix& features, const FeatureMask& mask);

enum class RelevanceMaskMode { zero_least_relevant, zero_most_relevant };

/// round(p * n) with halves rounded away from zero; 25% of 4 units is 1 unit.
std::size_t drop_count(double fraction, std::size_t n);

/// Binary mask zeroing exactly round(fraction * n) coordinates per sample,
/// ranked by |r| / max|r|. Ties go to the lowest index.
FeatureMask binary_relevance_mask(const Matrix& r, double fraction, RelevanceMaskMode mode);

/// Output of a dropout operator. `gate` is the multiplier that produced
/// `features` from the input (0 for dropped units, the rescale factor for
/// survivors) and is what the forward pass applies.
struct DropoutResult {
    Matrix features;
    Matrix gate;
};

/// Drops the round(p * n) most relevant coordinates of each sample and
/// rescales the survivors so the per-sample activation sum is preserved
/// (skipped when the survivor sum is zero). Ranking is deterministic, so
/// no generator is needed.
DropoutResult xai_guided_dropout(const Matrix& features, const Matrix& r_abs_norm, double rate);

/// Same drop count and rescale rule with uniformly chosen coordinates.
DropoutResult random_dropout(const Matrix& features, double rate, Rng& rng);

}  // namespace xaiaug
