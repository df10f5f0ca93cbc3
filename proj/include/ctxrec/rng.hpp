#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ctxrec {

// All randomness in the project flows through this generator so that runs
// are reproducible bit-for-bit across platforms and worker counts.  The
// standard <random> distributions are implementation-defined, which would
// break that contract; the few draws we need are hand-rolled instead.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream id from a parent seed and an index.
inline uint64_t mix_seed(uint64_t seed, uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

// FNV-1a, used both for named substreams and for dataset digests.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

inline uint64_t mix_seed(uint64_t seed, std::string_view stream) {
    return mix_seed(seed, fnv1a64(stream));
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

    uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // Unbiased-enough for our purposes: multiply-shift maps the 64-bit draw
    // onto [0, bound) deterministically.
    uint64_t next_below(uint64_t bound) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Box-Muller; consumes two uniforms per call.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Partial Fisher-Yates shuffle of [first, first+n).
    template <typename It>
    void shuffle(It first, size_t n) {
        for (size_t i = n; i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(first[i - 1], first[j]);
        }
    }

    template <typename Container>
    void shuffle(Container& c) {
        shuffle(c.begin(), c.size());
    }

private:
    uint64_t state_;
};

}  // namespace ctxrec
