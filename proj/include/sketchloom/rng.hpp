#pragma once

#include <cmath>
#include <cstdint>

namespace sketchloom {

// Deterministic 64-bit random stream (splitmix64). The standard <random>
// distributions are not bit-identical across library implementations, so
// everything that needs reproducible draws goes through this type. State is
// a single counter word, which keeps checkpointing trivial.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n). Multiply-shift; bias is < 2^-64 per draw.
    uint64_t next_below(uint64_t n) {
        return uint64_t(((unsigned __int128)next_u64() * n) >> 64);
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Box-Muller without the cached spare, so state stays a pure counter.
    double normal() {
        constexpr double two_pi = 6.283185307179586476925286766559;
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

private:
    uint64_t state_;
};

namespace detail {
inline uint64_t mix64(uint64_t h, uint64_t x) {
    h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    RngStream s(h);
    return s.next_u64();
}
}  // namespace detail

// Derives an independent stream from a seed plus tag words. Consumers pass a
// distinct tag (and counters such as the step index) so no two sites ever
// share a sequence; this is what makes mid-run resume bit-exact.
inline RngStream derive_stream(uint64_t seed, uint64_t tag, uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = detail::mix64(seed, tag);
    h = detail::mix64(h, a);
    h = detail::mix64(h, b);
    return RngStream(h);
}

// Small helper for readable call sites: tag from a short string literal.
constexpr uint64_t stream_tag(const char* s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (; *s; ++s) {
        h ^= uint64_t((unsigned char)*s);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace sketchloom
