#pragma once

// Deterministic randomness for the whole project. Every stochastic result
// flows through this header so that outputs are bit-reproducible across
// platforms, runs and thread counts:
//
//  - mt19937_64 core (the algorithm is pinned by the C++ standard),
//  - explicit Box-Muller for normal deviates (std::normal_distribution is
//    implementation-defined and therefore banned here),
//  - explicit Fisher-Yates for shuffles (std::shuffle likewise),
//  - splitmix64 finalizer to derive independent sub-seeds, so per-sample /
//    per-trial work can run in any order or in parallel.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace bump {

// splitmix64 finalizer over (master, index). Used for per-sample seeds,
// per-trial seeds, per-epoch shuffle seeds.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Two-level derivation: a small domain tag keeps independent seed families
// (samples, shuffles, splits, ...) from colliding.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t domain,
                              std::uint64_t index) {
    return mix_seed(mix_seed(master, domain), index);
}

namespace seed_domain {
inline constexpr std::uint64_t sample = 1;
inline constexpr std::uint64_t shuffle = 2;
inline constexpr std::uint64_t split = 3;
inline constexpr std::uint64_t epoch = 4;
inline constexpr std::uint64_t trial = 5;
inline constexpr std::uint64_t init = 6;
}  // namespace seed_domain

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller; u1 shifted into (0, 1] so the log is finite.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Bounded draw in [0, n) via 128-bit multiply-shift.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    // Fisher-Yates, back to front.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace bump
