#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "towerlab/errors.hpp"
#include "towerlab/measures.hpp"
#include "towerlab/numerics.hpp"
#include "towerlab/return_time_spec.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats/birkhoff.hpp"
#include "towerlab/stats/bootstrap.hpp"
#include "towerlab/stats/parallel.hpp"

namespace towerlab {

/// Running deviations d_j = |(1/j) Σ_{i<j} v_i - mean| for j = 1..len, written
/// into out[j-1].
inline void running_deviation(std::span<const double> values, double mean, std::span<double> out)
{
    double s = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
        s += values[j];
        out[j] = std::abs(s / static_cast<double>(j + 1) - mean);
    }
}

/// Largest j in [1, len] with deviation d_j > ε, or 0 if none.
inline std::uint64_t last_exceedance(std::span<const double> deviation, double epsilon)
{
    for (std::size_t j = deviation.size(); j > 0; --j)
        if (deviation[j - 1] > epsilon)
            return j;
    return 0;
}

struct DeviationOptions {
    double epsilon = 0.1;
    double mean = 0.0;               ///< ∫φ, exact or from a control orbit
    std::vector<std::uint64_t> n;    ///< report grid, strictly increasing, n >= 1
    std::uint64_t j_max = 0;         ///< sup horizon, >= n.back()
    std::uint64_t members = 1000;
    unsigned threads = 0;
    std::uint64_t seed = 0;          ///< bootstrap stream
};

/// ld(n) and mld(n) = fraction of the ensemble with sup_{n≤j≤j_max} d_j > ε.
struct DeviationSeries {
    double epsilon = 0.0;
    std::uint64_t j_max = 0;
    std::uint64_t members = 0;
    std::vector<std::uint64_t> n;
    std::vector<double> ld, ld_stderr;
    std::vector<double> mld, mld_stderr;
    std::vector<std::uint64_t> ld_count, mld_count;
    /// ld(j) for every j = 1..j_max (index j-1), for union-bound sums.
    std::vector<double> ld_all;
    /// Largest j at which some member's exceedance status last changed;
    /// equal to j_max when the sup has not saturated.
    std::uint64_t last_change = 0;
    bool unstable = false;

    /// Σ_{j=n}^{j_max} ld(j).
    double ld_tail_sum(std::uint64_t from) const
    {
        CompensatedSum s;
        for (std::uint64_t j = std::max<std::uint64_t>(from, 1); j <= j_max; ++j)
            s.add(ld_all[j - 1]);
        return s.value();
    }
};

inline void validate_grid(const std::vector<std::uint64_t>& n)
{
    if (n.empty())
        throw ParameterError("n grid is empty");
    if (n.front() < 1)
        throw ParameterError("n grid must start at n >= 1");
    for (std::size_t i = 1; i < n.size(); ++i)
        if (n[i] <= n[i - 1])
            throw ParameterError("n grid must be strictly increasing");
}

/// Ensemble ld/mld estimator. Each member's orbit of length j_max comes from
/// `orbits`; counts are integer reductions, so the result does not depend on
/// the worker count.
inline DeviationSeries deviation_series(const OrbitFiller& orbits, const DeviationOptions& o)
{
    validate_grid(o.n);
    if (!(o.epsilon > 0.0))
        throw ParameterError("epsilon must be > 0");
    if (o.j_max < o.n.back())
        throw ParameterError("j_max must be >= the largest n");
    if (o.members < 1)
        throw ParameterError("ensemble must be nonempty");

    const unsigned threads = resolve_threads(o.threads);
    const std::uint64_t J = o.j_max;
    std::vector<std::vector<std::uint64_t>> exceed(threads, std::vector<std::uint64_t>(J + 1, 0));
    std::vector<std::vector<std::uint64_t>> last(threads, std::vector<std::uint64_t>(J + 1, 0));
    std::vector<std::uint64_t> change(threads, 0);

    parallel_chunks(o.members, threads, [&](unsigned w, std::uint64_t b, std::uint64_t e) {
        std::vector<double> values(J), dev(J);
        auto& ex = exceed[w];
        auto& ls = last[w];
        for (std::uint64_t m = b; m < e; ++m) {
            orbits(m, values);
            running_deviation(values, o.mean, dev);
            std::uint64_t le = 0;
            for (std::uint64_t j = 1; j <= J; ++j)
                if (dev[j - 1] > o.epsilon) {
                    ++ex[j];
                    le = j;
                }
            ++ls[le];
            change[w] = std::max(change[w], le == 0 ? std::uint64_t{0} : std::min(le + 1, J));
        }
    });

    std::vector<std::uint64_t> ex(J + 1, 0), ls(J + 1, 0);
    for (unsigned w = 0; w < threads; ++w)
        for (std::uint64_t j = 0; j <= J; ++j) {
            ex[j] += exceed[w][j];
            ls[j] += last[w][j];
        }

    DeviationSeries d;
    d.epsilon = o.epsilon;
    d.j_max = J;
    d.members = o.members;
    d.n = o.n;
    d.last_change = *std::max_element(change.begin(), change.end());
    d.unstable = d.last_change >= J;
    const double N = static_cast<double>(o.members);
    d.ld_all.resize(J);
    for (std::uint64_t j = 1; j <= J; ++j)
        d.ld_all[j - 1] = static_cast<double>(ex[j]) / N;
    // mld(n) counts members whose last exceedance is at or after n.
    std::vector<std::uint64_t> at_or_after(J + 2, 0);
    for (std::uint64_t j = J + 1; j-- > 0;)
        at_or_after[j] = at_or_after[j + 1] + ls[j];
    const auto boot = rng::tagged(o.seed, rng::Tag::bootstrap);
    for (std::size_t k = 0; k < o.n.size(); ++k) {
        const auto n = o.n[k];
        d.ld_count.push_back(ex[n]);
        d.mld_count.push_back(at_or_after[n]);
        d.ld.push_back(static_cast<double>(ex[n]) / N);
        d.mld.push_back(static_cast<double>(at_or_after[n]) / N);
        d.ld_stderr.push_back(proportion_stderr(ex[n], o.members, rng::mix(boot, 2 * k)));
        d.mld_stderr.push_back(
            proportion_stderr(at_or_after[n], o.members, rng::mix(boot, 2 * k + 1)));
    }
    return d;
}

/// Single-n ld estimate.
inline double ld_estimate(const OrbitFiller& orbits, double mean, double epsilon, std::uint64_t n,
                          std::uint64_t members, unsigned threads = 0)
{
    DeviationOptions o{epsilon, mean, {n}, n, members, threads, 0};
    return deviation_series(orbits, o).ld[0];
}

/// Single-n mld estimate with sup horizon j_max; throws if the sup has not saturated
/// unless `allow_unstable`.
inline double mld_estimate(const OrbitFiller& orbits, double mean, double epsilon,
                           std::uint64_t n, std::uint64_t j_max, std::uint64_t members,
                           unsigned threads = 0, bool allow_unstable = false)
{
    DeviationOptions o{epsilon, mean, {n}, j_max, members, threads, 0};
    const auto d = deviation_series(orbits, o);
    if (d.unstable && !allow_unstable)
        throw Error("mld estimate unstable: exceedances persist at j_max = " +
                    std::to_string(j_max));
    return d.mld[0];
}

/// Exact ld(n) on the quotient tower for an observable that depends only on
/// (level, current branch). Propagates the joint law of (level, branch,
/// partial sum) through n steps; sums are merged when bitwise equal.
inline double ld_exact(const ReturnTimeSpec& spec,
                       const std::function<double(std::uint32_t, Symbol)>& phi, double epsilon,
                       std::uint64_t n)
{
    if (n < 1)
        throw ParameterError("ld_exact needs n >= 1");
    const auto m = level_masses(spec);
    CompensatedSum mean_acc;
    for (const auto& b : spec.branches())
        for (std::uint32_t l = 0; l < b.return_time; ++l)
            mean_acc.add(m.kac_norm * b.p * phi(l, b.index));
    const double mean = mean_acc.value();

    using State = std::tuple<std::uint32_t, Symbol, double>;
    std::map<State, double> cur;
    for (const auto& b : spec.branches())
        for (std::uint32_t l = 0; l < b.return_time; ++l)
            cur[{l, b.index, phi(l, b.index)}] += m.kac_norm * b.p;
    for (std::uint64_t step = 1; step < n; ++step) {
        std::map<State, double> next;
        for (const auto& [s, mass] : cur) {
            const auto [l, a, sum] = s;
            if (l + 1 < spec.return_time(a)) {
                next[{l + 1, a, sum + phi(l + 1, a)}] += mass;
            } else {
                for (const auto& b : spec.branches())
                    next[{0, b.index, sum + phi(0, b.index)}] += mass * b.p;
            }
        }
        cur = std::move(next);
    }
    CompensatedSum out;
    for (const auto& [s, mass] : cur)
        if (std::abs(std::get<2>(s) / static_cast<double>(n) - mean) > epsilon)
            out.add(mass);
    return out.value();
}

} // namespace towerlab
