#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gmil {

// mt19937_64 with explicit sampling helpers so streams do not depend on
// standard-library distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed), seed_hash_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), n > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        // rejection sampling over the top multiple of n
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = eng_(); } while (x >= limit);
        return x % n;
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    // Derives an independent stream (e.g. per slide, per fold).
    Rng derive(std::uint64_t salt) const {
        std::uint64_t h = seed_hash_ ^ (salt + 0x9e3779b97f4a7c15ULL +
                                        (seed_hash_ << 6) + (seed_hash_ >> 2));
        return Rng(h);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_index(i)]);
    }

private:
    std::mt19937_64 eng_;
    std::uint64_t seed_hash_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace gmil
