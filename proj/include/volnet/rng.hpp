#pragma once

#include <cmath>
#include <cstdint>

namespace volnet {

// Deterministic splitmix64 generator. The standard library distributions are
// implementation-defined, so all sampling is done explicitly here to keep
// seeded runs reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); rejection sampling, n > 0.
    int uniform_int(int n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<int>(r % bound);
    }

    // Standard normal via Box-Muller (uncached; one draw per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = static_cast<int>(last - first);
        for (int i = n - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(first[i], first[j]);
        }
    }

    // Seed for an independent child stream; hashing keeps siblings decorrelated.
    std::uint64_t derive(std::uint64_t stream) const {
        std::uint64_t z = state_ ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
        z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
        return z ^ (z >> 33);
    }

    Rng fork(std::uint64_t stream) const { return Rng(derive(stream)); }

private:
    std::uint64_t state_;
};

}  // namespace volnet
