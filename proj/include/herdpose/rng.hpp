#pragma once

#include <cstdint>
#include <vector>

namespace herdpose {

/// xoshiro256** (Blackman & Vigna), seeded by expanding a 64-bit seed with
/// SplitMix64. All derived variates below are computed with portable
/// arithmetic only, so a seed produces the same stream on every platform.
/// The standard <random> distributions are deliberately not used: their
/// output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller (no cached second variate).
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }
    /// Marsaglia-Tsang; shape > 0.
    double gamma(double shape);
    double beta(double a, double b);
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

}  // namespace herdpose
