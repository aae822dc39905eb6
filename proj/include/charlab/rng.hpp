#pragma once

#include <cmath>
#include <cstdint>

namespace charlab {

/// Splittable 64-bit generator (splitmix64). Every consumer derives its own
/// stream from (seed, tags...), so results do not depend on evaluation order
/// or thread scheduling.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1); safe as a log() argument on both ends.
    double next_open() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (cosine branch only, fixed consumption).
    double next_gauss() {
        double u1 = next_open();
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    SplitMix64 g(a ^ (0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2)));
    g.next();
    return g.next();
}

/// Derive an independent stream for (seed, tag, index), e.g. one stream per
/// (component, replicate).
inline SplitMix64 derive_stream(std::uint64_t seed, std::uint64_t tag,
                                std::uint64_t index = 0) {
    return SplitMix64(mix_seed(mix_seed(seed, tag), index));
}

} // namespace charlab
