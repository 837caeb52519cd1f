#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "towerlab/errors.hpp"
#include "towerlab/return_time_spec.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

/// Point of an ambient realization: base coordinate x and fibre coordinate z
/// (z unused by one-dimensional systems).
struct AmbientPoint {
    double x = 0.0;
    double z = 0.0;

    friend bool operator==(const AmbientPoint&, const AmbientPoint&) = default;
};

/// Declared norm data of an observable. Values are upper bounds supplied by
/// whoever built the observable; `beta_norm` gives empirical lower bounds.
struct NormData {
    double beta = 0.5;            ///< base of the dynamical metric for beta_seminorm
    double beta_seminorm = 0.0;   ///< |φ|_β
    double sup_norm = 0.0;        ///< ‖φ‖_∞
    double holder_exponent = 1.0; ///< η, ambient observables only
    double holder_constant = 0.0; ///< Hölder seminorm for exponent η

    double beta_norm() const noexcept { return beta_seminorm + sup_norm; }
    double holder_norm() const noexcept { return holder_constant + sup_norm; }
};

/// Real function on points of one kind together with its norm metadata.
template <class Point>
class BasicObservable {
  public:
    using point_type = Point;
    using function_type = std::function<double(const Point&)>;

    BasicObservable() = default;
    BasicObservable(std::string name, function_type f, NormData norms)
        : name_(std::move(name)), f_(std::move(f)), norms_(norms)
    {
    }

    double operator()(const Point& p) const { return f_(p); }

    const std::string& name() const noexcept { return name_; }
    const NormData& norms() const noexcept { return norms_; }
    const function_type& function() const noexcept { return f_; }

    /// φ + c with unchanged seminorm.
    BasicObservable shifted(double c) const
    {
        NormData n = norms_;
        n.sup_norm += std::abs(c);
        auto f = f_;
        return BasicObservable(name_ + "+const", [f, c](const Point& p) { return f(p) + c; }, n);
    }

  private:
    std::string name_;
    function_type f_;
    NormData norms_;
};

using TowerObservable = BasicObservable<TowerPoint>;
using AmbientObservable = BasicObservable<AmbientPoint>;

// ---------------------------------------------------------------------------
// Built-in tower observables.

inline TowerObservable constant_observable(double c, double beta = 0.5)
{
    return TowerObservable("constant", [c](const TowerPoint&) { return c; },
                           {beta, 0.0, std::abs(c)});
}

/// 1 on level ℓ, 0 elsewhere. Depends on the level only, so |φ|_β = 1.
inline TowerObservable level_indicator(std::uint32_t level, double beta = 0.5)
{
    return TowerObservable(
        "level_indicator", [level](const TowerPoint& p) { return p.level() == level ? 1.0 : 0.0; },
        {beta, 1.0, 1.0});
}

/// Indicator of {level = ℓ, future begins with `word`}. |φ|_β ≤ β^{-(|w|-1)}.
inline TowerObservable cylinder_indicator(std::uint32_t level, std::vector<Symbol> word,
                                          double beta = 0.5)
{
    const double semi = std::pow(beta, -static_cast<double>(word.size() > 0 ? word.size() - 1 : 0));
    return TowerObservable(
        "cylinder_indicator",
        [level, word = std::move(word)](const TowerPoint& p) {
            if (p.level() != level)
                return 0.0;
            for (std::size_t k = 0; k < word.size(); ++k)
                if (p.future(k) != word[k])
                    return 0.0;
            return 1.0;
        },
        {beta, semi, 1.0});
}

/// 1 / future[0]. Depends on the current element of the partition only.
inline TowerObservable inverse_first_symbol(double beta = 0.5)
{
    return TowerObservable(
        "inverse_first_symbol",
        [](const TowerPoint& p) { return 1.0 / static_cast<double>(p.future(0)); },
        {beta, 1.0, 1.0});
}

/// β^{s(p, ref)} for a fixed reference point, with the comparison cut at `horizon`.
inline TowerObservable distance_to(TowerPoint ref, double beta, std::uint64_t horizon)
{
    return TowerObservable(
        "distance_to_reference",
        [ref = std::move(ref), beta, horizon](const TowerPoint& p) {
            return dyn_distance(p, ref, beta, horizon);
        },
        {beta, 1.0, 1.0});
}

/// Σ_{k<terms} β^k·L(future[k]) with L the left branch endpoint in [0,1).
/// Agreement of the first n symbols caps the difference at β^n/(1-β).
inline TowerObservable itinerary_series(const ReturnTimeSpec& spec, double beta,
                                        std::uint64_t terms)
{
    Symbol top = 0;
    for (const auto& b : spec.branches())
        top = std::max(top, b.index);
    std::vector<double> left(top + 1, 0.0);
    for (const auto& b : spec.branches())
        left[b.index] = spec.left_endpoint(b.index);
    const double bound = 1.0 / (1.0 - beta);
    return TowerObservable(
        "itinerary_series",
        [left = std::move(left), beta, terms](const TowerPoint& p) {
            double v = 0.0, w = 1.0;
            for (std::uint64_t k = 0; k < terms; ++k) {
                const Symbol a = p.future(k);
                v += w * (a < left.size() ? left[a] : 0.0);
                w *= beta;
            }
            return v;
        },
        {beta, bound, bound});
}

// ---------------------------------------------------------------------------
// Norm estimation.

struct NormEstimate {
    double seminorm = 0.0; ///< sup over pairs of |φ(y)-φ(z)|/β^{s(y,z)}
    double sup = 0.0;      ///< sup over sampled points of |φ|
};

/// Empirical lower bounds of |φ|_β and ‖φ‖_∞ from sampled pairs. A pair with
/// infinite separation and different values gives an infinite seminorm.
inline NormEstimate beta_norm(const TowerObservable& phi,
                              std::span<const std::pair<TowerPoint, TowerPoint>> pairs,
                              double beta, std::uint64_t horizon)
{
    if (pairs.empty())
        throw ParameterError("beta_norm needs at least one pair");
    NormEstimate e;
    for (const auto& [y, z] : pairs) {
        const double fy = phi(y), fz = phi(z);
        e.sup = std::max({e.sup, std::abs(fy), std::abs(fz)});
        const double d = std::abs(fy - fz);
        if (d == 0.0)
            continue;
        const auto s = separation_time(y, z, horizon);
        if (s.is_infinite()) {
            e.seminorm = std::numeric_limits<double>::infinity();
            continue;
        }
        e.seminorm = std::max(e.seminorm, d / std::pow(beta, static_cast<double>(s.value())));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Discretisation φ_k.

/// Element of the join Q_n: the level at time 0 and the branch symbols visited
/// during the first n steps.
struct QElement {
    std::uint32_t level = 0;
    std::vector<Symbol> word;

    friend bool operator==(const QElement&, const QElement&) = default;
};

/// Number of steps j in [1, n] at which T^j p sits on level 0.
inline std::uint64_t base_visits(const ReturnTimeSpec& spec, const TowerPoint& p, std::uint64_t n)
{
    std::uint64_t count = 0;
    std::uint64_t k = 0;
    std::uint64_t level = p.level();
    for (std::uint64_t j = 1; j <= n; ++j) {
        if (++level >= spec.return_time(p.future(k))) {
            ++k;
            level = 0;
            ++count;
        }
    }
    return count;
}

inline QElement q_element(const ReturnTimeSpec& spec, const TowerPoint& p, std::uint64_t n)
{
    if (n < 1)
        throw ParameterError("Q_n needs n >= 1");
    QElement q;
    q.level = p.level();
    const auto r = base_visits(spec, p, n - 1);
    q.word.reserve(r + 1);
    for (std::uint64_t k = 0; k <= r; ++k)
        q.word.push_back(p.future(k));
    return q;
}

/// Representative t of a Q-element: its symbols followed by the shared tail
/// stream t, empty past.
inline TowerPoint q_representative(const ReturnTimeSpec& spec, const QElement& q,
                                   std::uint64_t tail_seed, std::uint64_t t)
{
    return TowerPoint::with_random_tail(spec, rng::mix(tail_seed, t), q.word, {}, 0, q.level);
}

inline constexpr std::uint64_t kDefaultTailSeed = 0x7a11'5eed'0000'0001ULL;

/// φ_k(p) = min of φ over `inf_samples` representatives of p's Q_{2k} element.
/// Representatives share their tails across elements, so φ_k depends on the
/// element only and the minimum is attained at a concrete point.
inline TowerObservable discretize(const TowerObservable& phi, std::uint64_t k,
                                  const ReturnTimeSpec& spec, std::uint64_t inf_samples,
                                  std::uint64_t tail_seed = kDefaultTailSeed)
{
    if (k < 1)
        throw ParameterError("discretize needs k >= 1");
    if (inf_samples == 0)
        throw ParameterError("discretize needs inf_samples >= 1");
    auto spec_copy = std::make_shared<const ReturnTimeSpec>(spec);
    return TowerObservable(
        phi.name() + "_k" + std::to_string(k),
        [phi, k, spec_copy, inf_samples, tail_seed](const TowerPoint& p) {
            const auto q = q_element(*spec_copy, p, 2 * k);
            double m = std::numeric_limits<double>::infinity();
            for (std::uint64_t t = 0; t < inf_samples; ++t)
                m = std::min(m, phi(q_representative(*spec_copy, q, tail_seed, t)));
            return m;
        },
        phi.norms());
}

/// |φ|_β·β^{b_{2k}(p)}, the uniform-convergence bound for |φ - φ_k| at p.
inline double discretize_error_bound(const TowerObservable& phi, std::uint64_t k,
                                     const ReturnTimeSpec& spec, const TowerPoint& p)
{
    const auto b = base_visits(spec, p, 2 * k);
    return phi.norms().beta_seminorm * std::pow(phi.norms().beta, static_cast<double>(b));
}

} // namespace towerlab
