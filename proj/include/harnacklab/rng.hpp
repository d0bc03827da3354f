#pragma once

#include <cstdint>

namespace hl {

// SplitMix64 (Steele/Lea/Flood). Small, fast, and fully reproducible across
// platforms, which the reports require. Distinct sub-streams are derived by
// hashing a purpose tag into the seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_in(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t purpose) {
        Rng r(seed ^ (0x6a09e667f3bcc909ULL * (purpose + 1)));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

}  // namespace hl
