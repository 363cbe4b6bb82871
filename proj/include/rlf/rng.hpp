#pragma once

#include <cstdint>
#include <vector>

namespace rlf {

// splitmix64: small, fast generator whose state-derivation doubles as a hash,
// which makes it convenient for counter-based per-node streams.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform double in the open interval (0, 1); endpoints are unreachable.
    double next_open01() {
        return (static_cast<double>(next() >> 12) + 0.5) * 0x1.0p-52;
    }

    // Unbiased integer in [0, bound), bound >= 1 (Lemire multiply-shift).
    std::uint64_t next_below(std::uint64_t bound) {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next()) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform double in the open interval (lo, hi).
    double next_in_open(double lo, double hi) {
        return lo + (hi - lo) * next_open01();
    }

private:
    std::uint64_t state_;
};

// Finalizer of splitmix64, used as a 64-bit mixing function.
inline std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Labels for independent stream families hanging off one master seed.
enum class StreamPurpose : std::uint64_t {
    kSplitSearch = 1,
    kBootstrap = 2,
    kSubsample = 3,
    kSynthetic = 4,
};

// Deterministic stream for (seed, purpose, a, b, c). Training derives one
// stream per (tree, level, node), so any evaluation order -- or a parallel
// one -- draws identical randomness.
inline SplitMix64 derive_stream(std::uint64_t seed, StreamPurpose purpose,
                                std::uint64_t a = 0, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
    std::uint64_t h = mix64(seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(purpose)));
    h = mix64(h ^ (a + 0xD1B54A32D192ED03ull));
    h = mix64(h ^ (b + 0x8CB92BA72F3D8DD7ull));
    h = mix64(h ^ (c + 0xA24BAED4963EE407ull));
    return SplitMix64(h);
}

// First k entries of a uniform random permutation of [0, n), in draw order.
inline std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n,
                                                             std::uint32_t k,
                                                             SplitMix64& rng) {
    std::vector<std::uint32_t> idx(n);
    for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    for (std::uint32_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::uint32_t>(rng.next_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace rlf
