#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "towerlab/measures.hpp"
#include "towerlab/numerics.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats/bootstrap.hpp"
#include "towerlab/stats/deviations.hpp"
#include "towerlab/stats/parallel.hpp"

namespace towerlab {

struct CorrelationSeries {
    std::vector<std::uint64_t> n;
    std::vector<double> value;
    std::vector<double> stderr;
    std::uint64_t members = 0;
};

/// Monte Carlo |E[φ·ψ∘T^n] - E[φ]E[ψ∘T^n]| over exact invariant-measure samples,
/// with bootstrap bands from resampling ensemble members.
inline CorrelationSeries corr_mc(const ReturnTimeSpec& spec, const TowerObservable& phi,
                                 const TowerObservable& psi, const std::vector<std::uint64_t>& n,
                                 std::uint64_t members, std::uint64_t seed, unsigned threads = 0)
{
    if (n.empty())
        throw ParameterError("n grid is empty");
    for (std::size_t i = 1; i < n.size(); ++i)
        if (n[i] <= n[i - 1])
            throw ParameterError("n grid must be strictly increasing");
    const std::size_t G = n.size();
    // Row-major per member: a, b_0, ..., b_{G-1}.
    std::vector<double> rows(members * (G + 1));
    parallel_chunks(members, resolve_threads(threads),
                    [&](unsigned, std::uint64_t b, std::uint64_t e) {
        for (std::uint64_t m = b; m < e; ++m) {
            TowerPoint p = srb_point(spec, seed, m);
            double* row = &rows[m * (G + 1)];
            row[0] = phi(p);
            std::uint64_t t = 0;
            for (std::size_t k = 0; k < G; ++k) {
                for (; t < n[k]; ++t)
                    p.advance(spec);
                row[k + 1] = psi(p);
            }
        }
    });

    auto corr = [&](std::span<const std::uint64_t> idx, std::size_t k) {
        CompensatedSum sa, sb, sab;
        for (auto m : idx) {
            const double a = rows[m * (G + 1)], b = rows[m * (G + 1) + k + 1];
            sa.add(a);
            sb.add(b);
            sab.add(a * b);
        }
        const double N = static_cast<double>(idx.size());
        return std::abs(sab.value() / N - (sa.value() / N) * (sb.value() / N));
    };

    CorrelationSeries out;
    out.n = n;
    out.members = members;
    std::vector<std::uint64_t> all(members);
    for (std::uint64_t m = 0; m < members; ++m)
        all[m] = m;
    const auto boot = rng::tagged(seed, rng::Tag::bootstrap);
    for (std::size_t k = 0; k < G; ++k) {
        out.value.push_back(corr(all, k));
        out.stderr.push_back(bootstrap_stderr(
            members, rng::mix(boot, k),
            [&](std::span<const std::uint64_t> idx) { return corr(idx, k); }));
    }
    return out;
}

} // namespace towerlab
