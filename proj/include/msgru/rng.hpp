#pragma once

#include <cstdint>
#include <random>

namespace msgru {

// Distributions are written out by hand: the std:: ones are not reproducible
// across standard library implementations, and datasets must be.
using Rng = std::mt19937_64;

/// splitmix64 finaliser over (a, b); used to split one seed into per-item streams.
std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(derive_seed(seed, stream)); }

/// Uniform in [0, 1) with 53 random bits.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
/// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);
bool bernoulli(Rng& rng, double p);
/// Box-Muller normal draw.
double normal(Rng& rng, double mean, double stddev);

}  // namespace msgru
