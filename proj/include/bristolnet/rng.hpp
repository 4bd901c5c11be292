#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace bristolnet {

/// splitmix64 finalizer. Stateless mix of one 64-bit word.
inline uint64_t splitmix64_mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// n-th output of the splitmix64 stream seeded with `seed`.
/// Used to derive independent per-sample / per-purpose seeds.
inline uint64_t derive_seed(uint64_t seed, uint64_t n) {
    return splitmix64_mix(seed + n * 0x9e3779b97f4a7c15ULL);
}

/// xoshiro256** seeded through splitmix64. The single PRNG used for all
/// initialization, shuffling, splitting and augmentation draws, so runs are
/// reproducible across platforms bit for bit.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) {
            sm += 0x9e3779b97f4a7c15ULL;
            uint64_t z = sm;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            w = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0,1), 53 significant bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform float in [0,1).
    float uniform_f() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) { return next_u64() % n; }

    /// Uniform integer in [lo, hi] inclusive.
    int64_t range(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

/// Deterministic per-pixel hash noise in [0,1). Independent of traversal order.
inline float hash_noise(uint64_t seed, uint64_t index) {
    return static_cast<float>(derive_seed(seed, index) >> 40) * 0x1.0p-24f;
}

}  // namespace bristolnet
