#pragma once

// Portable, seedable randomness. Every simulated record owns a 64-bit seed
// derived from (master_seed, state, basis, trial), so records can be produced
// in any order or on any thread with identical results.
//
//   generator : xoshiro256** 1.0 (Blackman & Vigna), state filled by SplitMix64
//   uniform   : top 53 bits of the generator output scaled by 2^-53
//   binomial  : exact inversion, searching outward from the mode

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "qvfv/errors.hpp"

namespace qvfv {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Order-sensitive hash of a seed path, e.g. derive_seed({master, state, basis, trial}).
inline constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = 0x6A09E667F3BCC909ULL;
    for (std::uint64_t v : path) {
        std::uint64_t s = h ^ v;
        h = splitmix64(s);
    }
    return h;
}

class Xoshiro256StarStar {
public:
    using result_type = std::uint64_t;

    explicit constexpr Xoshiro256StarStar(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    constexpr result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
};

namespace detail {

// Draws from Binomial(n, p) for 0 < p <= 1/2 by inversion: the support is
// visited in order of decreasing probability mass starting at the mode, so
// the expected number of steps is O(sqrt(n p q)).
inline std::int64_t binomial_from_mode(Xoshiro256StarStar& rng, std::int64_t n, double p) {
    const double q = 1.0 - p;
    const auto mode = static_cast<std::int64_t>(std::floor((n + 1) * p));
    const double nd = static_cast<double>(n);
    const double md = static_cast<double>(mode);
    const double log_pmf_mode = std::lgamma(nd + 1.0) - std::lgamma(md + 1.0) - std::lgamma(nd - md + 1.0) +
                                md * std::log(p) + (nd - md) * std::log(q);
    const double pmf_mode = std::exp(log_pmf_mode);
    const double ratio = p / q;

    double u = rng.uniform() - pmf_mode;
    if (u < 0.0) return mode;

    std::int64_t lo = mode;
    std::int64_t hi = mode;
    double pmf_lo = pmf_mode;
    double pmf_hi = pmf_mode;
    for (;;) {
        const bool can_down = lo > 0;
        const bool can_up = hi < n;
        if (!can_down && !can_up) break;
        // Masses of the next candidates on each side.
        const double next_down = can_down ? pmf_lo * static_cast<double>(lo) / (static_cast<double>(n - lo + 1) * ratio) : -1.0;
        const double next_up = can_up ? pmf_hi * static_cast<double>(n - hi) / static_cast<double>(hi + 1) * ratio : -1.0;
        if (next_up >= next_down) {
            ++hi;
            pmf_hi = next_up;
            u -= pmf_hi;
            if (u < 0.0) return hi;
        } else {
            --lo;
            pmf_lo = next_down;
            u -= pmf_lo;
            if (u < 0.0) return lo;
        }
        // Both tails have underflowed; the residual is rounding error.
        if (pmf_hi == 0.0 && pmf_lo == 0.0) break;
    }
    return mode;
}

} // namespace detail

// Exact Binomial(n, p) variate; deterministic for a given generator state.
inline std::int64_t sample_binomial(Xoshiro256StarStar& rng, std::int64_t n, double p) {
    if (n < 0) throw InvalidArgument("binomial trial count must be nonnegative");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("binomial probability must lie in [0, 1]");
    if (n == 0 || p == 0.0) return 0;
    if (p == 1.0) return n;
    if (p > 0.5) return n - detail::binomial_from_mode(rng, n, 1.0 - p);
    return detail::binomial_from_mode(rng, n, p);
}

} // namespace qvfv
