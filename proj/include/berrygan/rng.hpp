#pragma once

#include <cmath>
#include <cstdint>

namespace berrygan {

// PCG32 with hand-rolled distributions. The standard <random> distributions
// are implementation-defined, which would break the byte-identical-output
// contract across toolchains, so everything random in this project goes
// through this struct.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed) {
        state_ = 0U;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += splitmix64(seed);
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        return (static_cast<std::uint64_t>(next_u32()) << 32) | next_u32();
    }

    // Unbiased integer in [0, bound).
    std::uint32_t uniform_below(std::uint32_t bound) {
        if (bound <= 1) return 0;
        std::uint32_t threshold = (~bound + 1u) % bound;
        for (;;) {
            std::uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    // Inclusive integer range.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform_below(static_cast<std::uint32_t>(hi - lo + 1)));
    }

    // Double in [0, 1).
    double uniform_real() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform_real(double lo, double hi) {
        return lo + (hi - lo) * uniform_real();
    }

    bool coin() { return (next_u32() & 1u) != 0; }

    // Box-Muller, one cached value.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform_real();
        double u2 = uniform_real();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Derive an independent stream, e.g. one per scene id, so batch
    // generation gives the same result serial or parallel.
    Rng split(std::uint64_t id) const {
        return Rng(splitmix64(seed_ ^ splitmix64(id ^ 0xa0761d6478bd642fULL)), id);
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace berrygan
