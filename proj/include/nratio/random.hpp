#pragma once

// Seeded, platform-independent random streams.
//
// Generator: xoshiro256** (Blackman & Vigna). A stream is identified by
// (seed, stream index); its 256-bit state is filled from SplitMix64 started at
// seed ^ mix(stream index), so substreams never share a starting point.
// Normal variates use the Marsaglia polar method on 53-bit uniforms.

#include <array>
#include <cmath>
#include <cstdint>

namespace nratio {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed, std::uint64_t stream = 0) noexcept {
        std::uint64_t mix = stream ^ 0x632BE59BD9B4E019ULL;
        std::uint64_t sm = seed ^ splitmix64(mix);
        for (auto& word : s_)
            word = splitmix64(sm);
    }

    std::uint64_t next() noexcept {
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

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
};

/// Standard normal variates by the polar method; keeps the second variate of each pair.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept : rng_(seed, stream) {}

    double operator()() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * rng_.uniform() - 1.0;
            v = 2.0 * rng_.uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    Xoshiro256& engine() noexcept { return rng_; }

private:
    Xoshiro256 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace nratio
