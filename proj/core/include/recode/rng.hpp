#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace recode {

// Deterministic random source. All distributions are implemented on top of
// the raw mt19937_64 output so sampled values do not depend on the standard
// library's unspecified distribution algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent named substream: adding or removing one consumer never
    // shifts the draws seen by another.
    static Rng stream(std::uint64_t seed, std::string_view tag);

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased draw from [0, n), n >= 1.
    std::size_t uniform_index(std::size_t n);

    double normal(double mean = 0.0, double stddev = 1.0);

    // Mean 1/rate.
    double exponential(double rate);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Zipf(exponent) sampler over ranks 0..n-1 (rank 0 most probable),
// via a precomputed CDF and binary search.
class ZipfSampler {
public:
    ZipfSampler(std::size_t n, double exponent);
    std::size_t sample(Rng& rng) const;

private:
    std::vector<double> cdf_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace recode
