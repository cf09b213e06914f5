#pragma once

#include <cstdint>

namespace magloc {

// Counter-derived random stream (splitmix64 core). The state is a pure
// function of (seed, a, b), so the substream for a given (voxel, run) pair
// can be created in any order on any thread and always yields the same
// draws. This is what makes the Monte Carlo results independent of the
// worker count.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
        state_ = mix(seed + kGamma);
        state_ = mix(state_ ^ (a + kGamma));
        state_ = mix(state_ ^ (b + kGamma));
    }

    std::uint64_t next_u64() {
        state_ += kGamma;
        return mix(state_);
    }

    // uniform in [0, 1), 53-bit resolution
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace magloc
