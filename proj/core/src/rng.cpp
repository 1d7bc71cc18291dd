#include "recode/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace recode {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

Rng Rng::stream(std::uint64_t seed, std::string_view tag) {
    return Rng(splitmix64(seed ^ fnv1a(tag)));
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_index: n must be positive");
    // rejection sampling over the top of the 64-bit range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % n);
}

double Rng::normal(double mean, double stddev) {
    // Box-Muller, fixed two draws per sample
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::exponential(double rate) {
    if (rate <= 0.0) throw std::invalid_argument("Rng::exponential: rate must be positive");
    return -std::log(1.0 - uniform()) / rate;
}

ZipfSampler::ZipfSampler(std::size_t n, double exponent) {
    if (n == 0) throw std::invalid_argument("ZipfSampler: empty support");
    cdf_.resize(n);
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        acc += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
        cdf_[r] = acc;
    }
    for (double& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
}

std::size_t ZipfSampler::sample(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<std::size_t>(it - cdf_.begin());
}

}  // namespace recode
