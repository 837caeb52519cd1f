#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "towerlab/errors.hpp"
#include "towerlab/numerics.hpp"
#include "towerlab/return_time_spec.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

/// P(R > n) under the base measure.
inline double tail(const ReturnTimeSpec& spec, std::uint64_t n)
{
    CompensatedSum s;
    for (const auto& b : spec.branches())
        if (b.return_time > n)
            s.add(b.p);
    return s.value();
}

/// tail(0), ..., tail(n_max).
inline std::vector<double> tail_series(const ReturnTimeSpec& spec, std::uint64_t n_max)
{
    std::vector<double> out(n_max + 1);
    for (std::uint64_t n = 0; n <= n_max; ++n)
        out[n] = tail(spec, n);
    return out;
}

/// Invariant probability of the tower: base weighted by c = 1/E[R], level ℓ of
/// mass c·P(R > ℓ).
struct TowerMeasure {
    double kac_norm = 1.0;
    std::vector<double> level_mass;
};

/// Build the level masses. `kac_override` replaces c (fault injection only).
inline TowerMeasure level_masses(const ReturnTimeSpec& spec, double kac_override = 0.0)
{
    TowerMeasure m;
    // Compensated E[R] = Σ_ℓ P(R > ℓ), accumulated smallest-first.
    const auto top = spec.max_return_time();
    std::vector<double> tails(top);
    for (std::uint32_t l = 0; l < top; ++l)
        tails[l] = tail(spec, l);
    CompensatedSum er;
    for (std::uint32_t l = top; l-- > 0;)
        er.add(tails[l]);
    m.kac_norm = kac_override > 0.0 ? kac_override : 1.0 / er.value();
    m.level_mass.resize(top);
    for (std::uint32_t l = 0; l < top; ++l)
        m.level_mass[l] = m.kac_norm * tails[l];
    return m;
}

/// Base density of the invariant measure w.r.t. the base reference measure
/// (constant c in the affine model).
inline double density_floor_check(const ReturnTimeSpec& spec)
{
    const double c = level_masses(spec).kac_norm;
    if (!(c > 0.0))
        throw ParameterError("nonpositive base density");
    return c;
}

/// The index-th point of the exact invariant-measure sampler for `seed`.
/// Column ∝ p_i R_i, level uniform under the roof, all other symbols i.i.d. p.
inline TowerPoint srb_point(const ReturnTimeSpec& spec, std::uint64_t seed, std::uint64_t index)
{
    const Symbol col =
        spec.column_sampler().draw(rng::uniform(rng::tagged(seed, rng::Tag::column), index));
    const auto r = spec.return_time(col);
    auto level = static_cast<std::uint32_t>(
        rng::uniform(rng::tagged(seed, rng::Tag::level), index) * r);
    if (level >= r)
        level = r - 1;
    const auto stream = rng::mix(rng::tagged(seed, rng::Tag::point), index);
    return TowerPoint::with_random_tail(spec, stream, {col}, {}, TowerPoint::kUnboundedPast,
                                       level);
}

inline std::vector<TowerPoint> srb_sample(const ReturnTimeSpec& spec, std::uint64_t seed,
                                          std::uint64_t count)
{
    if (count < 1)
        throw ParameterError("srb_sample needs count >= 1");
    std::vector<TowerPoint> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i)
        out.push_back(srb_point(spec, seed, i));
    return out;
}

/// Invariant mass of the cylinder {level = ℓ, future starts with w}; zero when
/// the level is not below the roof of w[0].
inline double cylinder_mass(const ReturnTimeSpec& spec, double kac_norm, std::uint32_t level,
                            std::span<const Symbol> word)
{
    if (word.empty())
        throw ParameterError("cylinder word must be nonempty");
    if (level >= spec.return_time(word[0]))
        return 0.0;
    double m = kac_norm;
    for (Symbol a : word)
        m *= spec.probability(a);
    return m;
}

} // namespace towerlab
