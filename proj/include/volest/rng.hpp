#pragma once

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, index), so parallel and serial runs agree bit-for-bit.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace volest::rng {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for child stream `index` of `seed` (replications, paths).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed ^ 0x6a09e667f3bcc909ULL) + mix64(index + 0xbb67ae8584caa73bULL));
}

class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) : key_(mix64(seed)) {}

    constexpr std::uint64_t bits(std::uint64_t stream, std::uint64_t index) const {
        std::uint64_t h = mix64(key_ ^ mix64(stream * 0xd1b54a32d192ed03ULL + 1));
        return mix64(h + index * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform on (0, 1].
    double uniform_open0(std::uint64_t stream, std::uint64_t index) const {
        return static_cast<double>((bits(stream, index) >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform on [0, 1).
    double uniform(std::uint64_t stream, std::uint64_t index) const {
        return static_cast<double>(bits(stream, index) >> 11) * 0x1.0p-53;
    }

    /// Two independent standard normals (Box-Muller) for counter `index`.
    std::pair<double, double> normal_pair(std::uint64_t stream, std::uint64_t index) const {
        const double u1 = uniform_open0(stream, 2 * index);
        const double u2 = uniform(stream, 2 * index + 1);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    double normal(std::uint64_t stream, std::uint64_t index) const {
        return normal_pair(stream, index).first;
    }

private:
    std::uint64_t key_;
};

}  // namespace volest::rng
