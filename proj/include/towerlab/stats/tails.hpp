#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "towerlab/errors.hpp"
#include "towerlab/measures.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats/birkhoff.hpp"
#include "towerlab/stats/bootstrap.hpp"
#include "towerlab/stats/deviations.hpp"
#include "towerlab/stats/parallel.hpp"
#include "towerlab/systems.hpp"

namespace towerlab {

/// Tail frequencies P(X > n) on a grid, with censoring bookkeeping.
struct TailSeries {
    std::vector<std::uint64_t> n;
    std::vector<double> value;
    std::vector<double> stderr;
    std::uint64_t members = 0;
    std::uint64_t horizon = 0;
    std::uint64_t censored = 0; ///< members whose time exceeded the horizon
};

/// Exact recurrence tail of an abstract tower (returns are prescribed).
inline TailSeries recurrence_tail_estimate(const ReturnTimeSpec& spec,
                                           const std::vector<std::uint64_t>& n)
{
    validate_grid(n);
    TailSeries t;
    t.n = n;
    for (auto k : n) {
        t.value.push_back(tail(spec, k));
        t.stderr.push_back(0.0);
    }
    t.horizon = spec.max_return_time();
    return t;
}

namespace detail {

inline TailSeries tail_from_times(const std::vector<std::uint64_t>& times,
                                  const std::vector<std::uint64_t>& n, std::uint64_t horizon,
                                  std::uint64_t seed)
{
    TailSeries t;
    t.n = n;
    t.members = times.size();
    t.horizon = horizon;
    for (auto x : times)
        if (x > horizon)
            ++t.censored;
    const auto boot = rng::tagged(seed, rng::Tag::bootstrap);
    for (std::size_t k = 0; k < n.size(); ++k) {
        const auto c = static_cast<std::uint64_t>(
            std::count_if(times.begin(), times.end(), [&](std::uint64_t x) { return x > n[k]; }));
        t.value.push_back(static_cast<double>(c) / static_cast<double>(times.size()));
        t.stderr.push_back(proportion_stderr(c, times.size(), rng::mix(boot, k)));
    }
    return t;
}

} // namespace detail

/// Lebesgue frequency of first-return times > n to Y = [1/2, 1] for the
/// intermittent map. Orbits still outside Y after `horizon` steps are censored
/// and counted as R = horizon + 1.
inline TailSeries recurrence_tail_estimate(const IntermittentMap& map,
                                           const std::vector<std::uint64_t>& n,
                                           std::uint64_t members, std::uint64_t horizon,
                                           std::uint64_t seed, unsigned threads = 0)
{
    validate_grid(n);
    if (horizon < n.back())
        throw ParameterError("horizon must cover the n grid");
    const auto start = lebesgue_leaf(seed, 0.5, 1.0);
    const auto times = parallel_map<std::uint64_t>(members, resolve_threads(threads),
                                                   [&](std::uint64_t i) {
        double x = start(i).x;
        for (std::uint64_t r = 1; r <= horizon; ++r) {
            x = map.step(x);
            if (x >= 0.5)
                return r;
        }
        return horizon + 1;
    });
    return detail::tail_from_times(times, n, horizon, seed);
}

/// 𝓔 of one orbit from the values φ(f^{Ni}x), i < H: one plus the last k
/// with (1/k) Σ_{i<k} φ > λ/2 (1 if there is none). A last violation at H
/// means 𝓔 was not resolved; the caller treats it as censored.
inline std::uint64_t expansion_time(std::span<const double> values, double lambda)
{
    double s = 0.0;
    std::uint64_t last = 0;
    for (std::size_t k = 1; k <= values.size(); ++k) {
        s += values[k - 1];
        if (s / static_cast<double>(k) > lambda / 2.0)
            last = k;
    }
    return last + 1;
}

struct ExpansionTimeOptions {
    double lambda = 0.0;           ///< long-orbit mean of φ, must be < 0
    std::vector<std::uint64_t> n;  ///< report grid
    std::uint64_t margin = 0;      ///< extra check steps beyond n.back()
    std::uint64_t members = 1000;
    unsigned threads = 0;
    std::uint64_t seed = 0;
};

/// Tail of the expansion time over an ensemble (typically Lebesgue on an
/// unstable leaf). The check horizon is n.back() + margin.
inline TailSeries expansion_time_tail(const OrbitFiller& orbits, const ExpansionTimeOptions& o)
{
    validate_grid(o.n);
    if (!(o.lambda < 0.0))
        throw NotExpanding("mean of the inverse cu-derivative observable is " +
                           format_real(o.lambda) + ", not negative");
    const std::uint64_t H = o.n.back() + o.margin;
    const auto times = parallel_map<std::uint64_t>(o.members, resolve_threads(o.threads),
                                                   [&](std::uint64_t i) {
        std::vector<double> v(H);
        orbits(i, v);
        return expansion_time(v, o.lambda);
    });
    return detail::tail_from_times(times, o.n, H, o.seed);
}

} // namespace towerlab
