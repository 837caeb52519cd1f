#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "towerlab/errors.hpp"
#include "towerlab/measures.hpp"
#include "towerlab/numerics.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats/bootstrap.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

/// Writes φ(x), φ(Fx), ..., φ(F^{len-1}x) for ensemble member `member`.
/// Must be a pure function of the member index.
using OrbitFiller = std::function<void(std::uint64_t member, std::span<double> out)>;

/// (1/n) Σ_{j<n} φ(F^j x) for a step function F.
template <class Point, class Step>
double birkhoff_average(Step&& step, const BasicObservable<Point>& phi, Point x, std::uint64_t n)
{
    if (n < 1)
        throw ParameterError("birkhoff_average needs n >= 1");
    CompensatedSum s;
    for (std::uint64_t j = 0; j < n; ++j) {
        s.add(phi(x));
        if (j + 1 < n)
            x = step(x);
    }
    return s.value() / static_cast<double>(n);
}

/// Tower orbits started from start(member).
inline OrbitFiller tower_orbits(std::shared_ptr<const ReturnTimeSpec> spec, TowerObservable phi,
                                std::function<TowerPoint(std::uint64_t)> start)
{
    return [spec, phi = std::move(phi), start = std::move(start)](std::uint64_t member,
                                                                  std::span<double> out) {
        TowerPoint p = start(member);
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] = phi(p);
            if (j + 1 < out.size())
                p.advance(*spec);
        }
    };
}

/// Tower orbits from the exact invariant-measure sampler.
inline OrbitFiller srb_tower_orbits(std::shared_ptr<const ReturnTimeSpec> spec,
                                    TowerObservable phi, std::uint64_t seed)
{
    auto s = spec;
    return tower_orbits(std::move(spec), std::move(phi),
                        [s, seed](std::uint64_t i) { return srb_point(*s, seed, i); });
}

/// Ambient orbits: start(member), then `burn_in` discarded steps.
template <class Step>
OrbitFiller ambient_orbits(Step step, AmbientObservable phi,
                           std::function<AmbientPoint(std::uint64_t)> start,
                           std::uint64_t burn_in = 0)
{
    return [step, phi = std::move(phi), start = std::move(start), burn_in](std::uint64_t member,
                                                                           std::span<double> out) {
        AmbientPoint a = start(member);
        for (std::uint64_t j = 0; j < burn_in; ++j)
            a = step(a);
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] = phi(a);
            if (j + 1 < out.size())
                a = step(a);
        }
    };
}

/// Uniform point on the reference unstable leaf {z = 0}.
inline std::function<AmbientPoint(std::uint64_t)> lebesgue_leaf(std::uint64_t seed, double lo = 0.0,
                                                                double hi = 1.0)
{
    const auto s = rng::tagged(seed, rng::Tag::ambient);
    return [s, lo, hi](std::uint64_t i) {
        return AmbientPoint{lo + (hi - lo) * rng::uniform(s, i), 0.0};
    };
}

struct MeanEstimate {
    double mean = 0.0;
    double stderr = 0.0; ///< batch-means standard error
};

/// Long control orbit average of φ with a batch-means error bar.
template <class Step>
MeanEstimate long_orbit_mean(Step&& step, const AmbientObservable& phi, AmbientPoint x,
                             std::uint64_t steps, std::uint64_t burn_in = 1000,
                             unsigned batches = 100)
{
    if (steps < batches)
        throw ParameterError("control orbit shorter than the batch count");
    for (std::uint64_t j = 0; j < burn_in; ++j)
        x = step(x);
    const std::uint64_t per = steps / batches;
    std::vector<double> means(batches);
    CompensatedSum total;
    for (unsigned b = 0; b < batches; ++b) {
        CompensatedSum s;
        for (std::uint64_t j = 0; j < per; ++j) {
            s.add(phi(x));
            x = step(x);
        }
        means[b] = s.value() / static_cast<double>(per);
        total.add(means[b]);
    }
    MeanEstimate e;
    e.mean = total.value() / batches;
    e.stderr = sample_stddev(means) / std::sqrt(static_cast<double>(batches));
    return e;
}

} // namespace towerlab
