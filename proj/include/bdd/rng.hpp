#pragma once

#include <cstdint>
#include <vector>

namespace bdd {

/// SplitMix64 generator (Steele/Lea/Flood constants). Chosen over the
/// standard-library engines because its output is pinned by published
/// constants, so seeded runs reproduce across compilers and platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 significant bits.
    double next_double() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be nonzero.
    std::uint64_t next_below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& values) noexcept {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::uint64_t state_;
};

/// SplitMix64 finalizer applied to a value (stateless bijection).
inline std::uint64_t splitmix64_finalize(std::uint64_t x) noexcept {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and three indices
/// (grid row, grid column, fold). Pure function of its inputs.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b, std::uint64_t c) noexcept {
    std::uint64_t h = seed + 0x9E3779B97F4A7C15ULL;
    h = splitmix64_finalize(h ^ (a + 1) * 0xFF51AFD7ED558CCDULL);
    h = splitmix64_finalize(h ^ (b + 1) * 0xC4CEB9FE1A85EC53ULL);
    h = splitmix64_finalize(h ^ (c + 1) * 0x2545F4914F6CDD1DULL);
    return h;
}

} // namespace bdd
