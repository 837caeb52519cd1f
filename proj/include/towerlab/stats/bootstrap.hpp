#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "towerlab/numerics.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

inline constexpr unsigned kBootstrapResamples = 200;

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double sample_stddev(std::span<const double> xs)
{
    if (xs.size() < 2)
        return 0.0;
    const double mean = compensated_sum(xs) / static_cast<double>(xs.size());
    CompensatedSum ss;
    for (double x : xs)
        ss.add((x - mean) * (x - mean));
    return std::sqrt(ss.value() / static_cast<double>(xs.size() - 1));
}

/// Bootstrap standard error of a proportion count/total. Resampling the 0/1
/// indicators with replacement gives a Binomial(total, count/total) count, so
/// the resamples are drawn from that law directly.
inline double proportion_stderr(std::uint64_t count, std::uint64_t total, std::uint64_t seed,
                                unsigned resamples = kBootstrapResamples)
{
    if (total == 0 || count == 0 || count == total)
        return 0.0;
    rng::CounterEngine eng(seed);
    std::binomial_distribution<std::uint64_t> draw(total, static_cast<double>(count) / total);
    std::vector<double> p(resamples);
    for (auto& v : p)
        v = static_cast<double>(draw(eng)) / static_cast<double>(total);
    return sample_stddev(p);
}

/// Bootstrap standard error of statistic(indices) over resampled member indices.
template <class Statistic>
double bootstrap_stderr(std::uint64_t members, std::uint64_t seed, Statistic&& statistic,
                        unsigned resamples = kBootstrapResamples)
{
    if (members < 2)
        return 0.0;
    std::vector<double> stats(resamples);
    std::vector<std::uint64_t> idx(members);
    for (unsigned r = 0; r < resamples; ++r) {
        const auto s = rng::mix(seed, r);
        for (std::uint64_t i = 0; i < members; ++i)
            idx[i] = rng::mix(s, i) % members;
        stats[r] = statistic(std::span<const std::uint64_t>(idx));
    }
    return sample_stddev(stats);
}

} // namespace towerlab
