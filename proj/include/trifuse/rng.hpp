#pragma once

#include "trifuse/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace trifuse {

using Rng = std::mt19937_64;

/// Decorrelated generator for (seed, stream) pairs, so e.g. parameter init
/// and data shuffling never share a stream.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{seed, stream, std::uint64_t{0x9e3779b97f4a7c15ULL}};
    return Rng(seq);
}

inline DenseTensor gaussian_tensor(std::vector<std::size_t> shape, double stddev, Rng& rng) {
    DenseTensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& x : t.values()) x = dist(rng);
    return t;
}

/// Init scale for a parameter contracted over `fan_in` additive terms.
inline double fan_in_scale(std::size_t fan_in) {
    return 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
}

}  // namespace trifuse
