#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hypergrid {

// splitmix64 finalizer. Also the documented mix behind per-(fold, run) seed
// derivation, so all experiment cells are independent yet reproducible.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    return mix64(mix64(base) ^ (stream * 0xd1b54a32d192ed03ULL + 0x8bb84b93962eacc9ULL));
}

// xoshiro256** seeded through splitmix64. Fixed algorithm, so the integer
// stream is identical on every platform for a given seed. Single-owner:
// parallel code forks independent streams instead of sharing one generator.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = mix64(s++);
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // [lo, hi)
    double uniform(double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("rng: uniform needs lo < hi");
        double v = lo + (hi - lo) * unit();
        if (v >= hi) v = std::nextafter(hi, lo);
        return v;
    }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("rng: below(0)");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Box-Muller, two fresh uniforms per draw so the stream has no hidden state.
    double normal(double mean = 0.0, double stddev = 1.0) {
        const double u1 = unit();
        const double u2 = unit();
        const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> shuffle(std::size_t n) {
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        shuffle_in_place(perm);
        return perm;
    }

    template <typename V>
    void shuffle_in_place(std::vector<V>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Independent child stream; identical (seed, id) pairs give identical streams.
    SeededRng fork(std::uint64_t stream_id) const { return SeededRng(mix_seed(seed_, stream_id)); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_ = 0;
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace hypergrid
