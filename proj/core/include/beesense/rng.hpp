#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace beesense {

/// SplitMix64, used as a counter-based generator.
///
/// The n-th output (n starting at 1) of a generator seeded with `s` is
/// `mix(s + n * 0x9E3779B97F4A7C15)` where
///
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     z =  z ^ (z >> 31)
///
/// with all arithmetic modulo 2^64. Derived quantities:
///   - uniform():        (next() >> 11) * 2^-53, in [0, 1)
///   - below(n):         high 64 bits of the 128-bit product next() * n
///   - shuffle():        Fisher-Yates from the back, swap i with below(i + 1)
///   - normal():         Box-Muller on two uniform() draws (cosine branch)
/// Every consumer in the library uses only these four rules, so splits and
/// initializations can be reproduced from this description alone.
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next() noexcept {
        state_ += kGamma;
        return mix(state_);
    }

    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    __extension__ using Wide = unsigned __int128;

    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>((static_cast<Wide>(next()) * n) >> 64);
    }

    double normal() noexcept;

    template <typename T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

    /// Independent stream for a sub-task, e.g. one per fold.
    SplitMix64 fork(std::uint64_t stream) const noexcept {
        return SplitMix64(mix(state_ ^ mix(stream + kGamma)));
    }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

using Rng = SplitMix64;

}  // namespace beesense
