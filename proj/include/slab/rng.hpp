#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace slab {

// Deterministic random source used everywhere in the library.
//
// Generator: xoshiro256++ (Blackman & Vigna), state seeded by four
// rounds of splitmix64. Both algorithms are fixed integer arithmetic,
// so the raw stream is bit-identical across platforms and compilers.
// uniform() maps the top 53 bits onto [0,1). normal() uses the basic
// Box-Muller transform and consumes exactly two uniforms per call (no
// caching of the second deviate); its bits depend on libm's log/cos/sqrt,
// which are deterministic per platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on [0,1), 53-bit resolution.
    double uniform();

    // Uniform integer in [0, bound) via Lemire's multiply-shift reduction.
    // bound must be >= 1.
    std::uint64_t below(std::uint64_t bound);

    // Gaussian deviate. stddev below 1e-12 is clamped to 1e-12 so the
    // degenerate-width limit stays finite; negative stddev is an error.
    double normal(double mean, double stddev);

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
};

// Stateless seed mixer for deriving per-epoch / per-layer / per-variant
// streams from one master seed: one splitmix64 step over
// seed + (salt+1) * 0x9E3779B97F4A7C15.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

// Fisher-Yates permutation of 0..n-1 driven by rng.below().
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

} // namespace slab
