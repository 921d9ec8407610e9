#pragma once

#include <cstdint>
#include <random>

namespace xaiaug {

using Rng = std::mt19937_64;

/// Independent streams derived from one run seed. Training batches and
/// augmentation randomness never share a generator, so toggling an
/// augmentation cannot shift the training stream.
enum class Stream : std::uint32_t {
    init = 0,
    training = 1,
    augmentation = 2,
    data = 3,
    evaluation = 4,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), 0x9e3779b9u};
    return Rng(seq);
}

}  // namespace xaiaug
