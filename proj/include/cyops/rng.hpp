#pragma once

#include <cstdint>

namespace cyops {

/// SplitMix64 finalizer; the whole RNG layer is built on it so draws are
/// bit-identical on every platform.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child stream key for `id` under `parent`. Streams derived with different
/// ids are independent of each other and of how many draws either makes.
constexpr std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t id) {
    return splitmix64(parent ^ splitmix64(id + 0x632be59bd9b4e019ULL));
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

/// Named stream ids used when splitting a run seed.
namespace streams {
inline constexpr std::uint64_t kTrainEpisodes = 1;
inline constexpr std::uint64_t kEvalEpisodes = 2;
inline constexpr std::uint64_t kPolicy = 3;
inline constexpr std::uint64_t kSimulator = 4;
inline constexpr std::uint64_t kEmulator = 5;
inline constexpr std::uint64_t kBaseline = 6;
inline constexpr std::uint64_t kSegment = 7;
}  // namespace streams

/// Sequential SplitMix64 generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform01() { return to_unit(next_u64()); }

    /// Uniform integer in [0, n) by rejection, n > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace cyops
