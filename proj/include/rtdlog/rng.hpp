// Deterministic RNG with fixed distribution algorithms.
//
// std::mt19937_64 output is pinned by the standard, but the std::*_distribution
// adapters are implementation-defined, so every draw here goes through explicit
// algorithms. Identical seeds give identical streams on every platform.

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace rtdlog {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Independent stream for (seed, index) pairs; used so per-line draws do
    // not depend on batch composition or iteration order.
    static Rng stream(uint64_t seed, uint64_t a, uint64_t b = 0) {
        return Rng(splitmix64(splitmix64(seed ^ 0xA076'1D64'78BD'642FULL) + a) ^ splitmix64(b + 1));
    }

    uint64_t next_u64() { return engine_(); }

    // Unbiased bounded draw by masked rejection.
    uint64_t next_below(uint64_t bound) {
        if (bound <= 1) return 0;
        uint64_t mask = ~uint64_t{0} >> __builtin_clzll(bound - 1 | 1);
        for (;;) {
            uint64_t v = engine_() & mask;
            if (v < bound) return v;
        }
    }

    // Uniform in [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Box-Muller; second value cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0,n), in draw order.
    std::vector<size_t> sample_indices(size_t n, size_t k) {
        std::vector<size_t> pool(n);
        std::iota(pool.begin(), pool.end(), size_t{0});
        std::vector<size_t> out;
        out.reserve(k);
        for (size_t i = 0; i < k && i < n; ++i) {
            size_t j = i + static_cast<size_t>(next_below(n - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

    // CDF inversion over unnormalized nonnegative weights.
    size_t next_categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_double() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace rtdlog
