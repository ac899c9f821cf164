#pragma once

#include <cstdint>
#include <random>

namespace relia {

/// Seeded generator used everywhere a run needs randomness.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// derives doubles and bounded integers itself, because the standard
/// distributions are implementation-defined and would break byte-identical
/// reports across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t index(std::uint64_t n);

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a tag
/// (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

} // namespace relia
