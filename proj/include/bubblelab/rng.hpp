#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace bubblelab {

// splitmix64 finalizer; used to derive independent substreams from keys.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::initializer_list<std::int64_t> parts) {
    std::uint64_t h = 0x51ed270b27c1a3d5ULL;
    for (auto p : parts) h = mix64(h ^ static_cast<std::uint64_t>(p));
    return h;
}

// Substream purposes. Keys are (seed, sim, period, purpose, actor).
enum class StreamPurpose : std::int64_t { Dividend = 1, Agent = 2, Judge = 3 };

// Thin wrapper over mt19937_64. Distributions are computed from raw bits
// here rather than via <random> distributions, whose output is not
// specified identically across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }
    bool bernoulli(double p) { return uniform() < p; }
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace bubblelab
