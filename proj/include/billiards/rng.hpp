#pragma once

#include <cstdint>

namespace billiards {

/// Small deterministic generator (splitmix64). Used instead of the standard
/// engines so that identical seeds give identical streams on every platform,
/// which the batch driver relies on for byte-identical reruns.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

private:
    std::uint64_t state_;
};

/// Derives an independent per-task seed from a master seed and a task index.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    SplitMix64 g(master ^ (0x5851f42d4c957f2dull * (index + 1)));
    g.next();
    return g.next();
}

} // namespace billiards
