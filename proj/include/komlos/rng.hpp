#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace komlos {

namespace detail {

// splitmix64; used only to expand seeds into engine state.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

// Seeded random stream keyed by (master_seed, stream_index). All sampling in
// the library goes through this type so replays are bit-identical: the raw
// engine is the standard mt19937_64 and every derived quantity (uniforms,
// gaussians, signs) is produced by fixed code below rather than by
// implementation-defined std distributions.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
        : master_(master_seed), stream_(stream_index) {
        std::uint64_t s = detail::mix64(master_seed ^ detail::mix64(stream_index));
        eng_.seed(detail::mix64(s));
    }

    std::uint64_t master_seed() const { return master_; }
    std::uint64_t stream_index() const { return stream_; }

    // Derived independent stream; tags keep exposure stages separate.
    RngStream substream(std::uint64_t tag) const {
        return RngStream(detail::mix64(master_ ^ detail::mix64(stream_ + 0x1234)),
                         detail::mix64(tag));
    }

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Fair +-1.
    int sign() { return (next_u64() >> 63) ? 1 : -1; }

    bool coin() { return (next_u64() >> 63) != 0; }

    // Unbiased integer in [0, bound); Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) {
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            std::uint64_t t = (0 - bound) % bound;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller (one spare cached).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t master_;
    std::uint64_t stream_;
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace komlos
