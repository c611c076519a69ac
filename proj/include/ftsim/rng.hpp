#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ftsim {

// SplitMix64. All randomized machinery in the suite (trial seeding, fault
// site selection, sensor noise) draws from this generator so that results
// are reproducible bit-for-bit from a single base seed, independent of the
// standard library's distribution implementations.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Unbiased-enough uniform in [0, n) via 128-bit multiply reduction.
    std::uint64_t uniform_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // Uniform in (0, 1].
    double uniform01() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Box-Muller. One normal deviate per call; the cosine branch only, so
    // the draw count per step is fixed and easy to reason about.
    double gaussian(double mean, double sigma) {
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

// Deterministic per-trial seed derivation: hash-chain the base seed with a
// stream label and an index through SplitMix64. Documented so external
// tooling can reproduce any single trial in isolation.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    SplitMix64 g(base ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
    std::uint64_t s = g.next();
    SplitMix64 h(s ^ (0xbf58476d1ce4e5b9ull * (index + 1)));
    return h.next();
}

}  // namespace ftsim
