#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace lsda {

// Seeded RNG with platform-stable uniform and normal draws. std::mt19937_64
// provides the bit stream; the shaping below avoids the implementation-defined
// std::*_distribution algorithms so equal seeds give equal streams everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t uniform_index(uint64_t n) {
        // modulo bias is negligible for n << 2^64 but reject anyway
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    // standard normal via Box-Muller; second draw cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <class It>
    void shuffle(It first, It last) {
        auto n = static_cast<uint64_t>(last - first);
        for (uint64_t i = n; i > 1; --i) {
            uint64_t j = uniform_index(i);
            std::swap(first[i - 1], first[j]);
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derives an independent stream seed from a root seed and a purpose tag, so
// the consumers of randomness stay decoupled (adding draws in one stage must
// not shift another stage's stream).
inline uint64_t derive_seed(uint64_t root, std::string_view purpose, uint64_t index = 0) {
    // FNV-1a over the tag, then splitmix64 finalization
    uint64_t h = 1469598103934665603ull;
    for (char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    uint64_t x = root ^ h ^ (0x9e3779b97f4a7c15ull * (index + 1));
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace lsda
