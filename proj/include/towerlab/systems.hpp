#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "towerlab/errors.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/return_time_spec.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

// ---------------------------------------------------------------------------
// Intermittent interval map (Liverani-Saussol-Vaienti form).

/// f(x) = x(1 + 2^γ x^γ) on [0, 1/2), 2x - 1 on [1/2, 1]. γ = 0 is the doubling map.
class IntermittentMap {
  public:
    explicit IntermittentMap(double gamma) : gamma_(gamma), scale_(std::pow(2.0, gamma))
    {
        if (!(gamma >= 0.0 && gamma < 1.0))
            throw ParameterError("intermittent gamma must lie in [0,1)");
    }

    double gamma() const noexcept { return gamma_; }

    double step(double x) const noexcept
    {
        if (x < 0.5)
            return left_branch(x);
        return 2.0 * x - 1.0;
    }

    /// Left branch formula, also used as the left limit at x = 1/2.
    double left_branch(double x) const noexcept
    {
        return x * (1.0 + scale_ * std::pow(x, gamma_));
    }

    double derivative(double x) const noexcept
    {
        if (x < 0.5)
            return 1.0 + (1.0 + gamma_) * scale_ * std::pow(x, gamma_);
        return 2.0;
    }

    /// Inverse of the left branch, [0,1] -> [0,1/2].
    double left_inverse(double y) const
    {
        if (y <= 0.0)
            return 0.0;
        if (y >= 1.0)
            return 0.5;
        if (gamma_ == 0.0)
            return 0.5 * y;
        const double g = gamma_, s = scale_;
        auto f = [y, g, s](double x) {
            const double xg = x > 0.0 ? std::pow(x, g) : 0.0;
            return std::make_pair(x * (1.0 + s * xg) - y, 1.0 + (1.0 + g) * s * xg);
        };
        const double guess = y / (1.0 + s * std::pow(y, g));
        std::uintmax_t iters = 200;
        return boost::math::tools::newton_raphson_iterate(f, guess, 0.0, 0.5,
                                                          std::numeric_limits<double>::digits - 2,
                                                          iters);
    }

    /// Inverse of the right branch, [0,1] -> [1/2,1].
    static double right_inverse(double y) noexcept { return 0.5 * (y + 1.0); }

  private:
    double gamma_;
    double scale_;
};

/// First-return partition of Y = [1/2, 1]. Branch n is
/// [(a_n + 1)/2, (a_{n-1} + 1)/2) with a_0 = 1, a_1 = 1/2 and a_n the left
/// preimage of a_{n-1}; it returns after n steps and has normalised length
/// a_{n-1} - a_n. Lengths beyond the last kept branch are folded into it.
struct InducingScheme {
    double domain_lo = 0.5;
    double domain_hi = 1.0;
    std::vector<double> thresholds; ///< a_0, a_1, ..., a_{r_max}
    std::uint32_t r_max = 0;
    double truncation_mass = 0.0;   ///< a_{r_max}, the folded Leb_Y-mass
    double markov_defect = 0.0;     ///< max |f^n(endpoint) - {1/2, 1}| over branches

    double branch_lo(std::uint32_t n) const { return 0.5 * (thresholds[n] + 1.0); }
    double branch_hi(std::uint32_t n) const { return 0.5 * (thresholds[n - 1] + 1.0); }

    /// Normalised branch length; the last branch carries the folded tail.
    double branch_mass(std::uint32_t n) const
    {
        return n < r_max ? thresholds[n - 1] - thresholds[n] : thresholds[r_max - 1];
    }

    /// Leb_Y{R > n} = a_n for n < r_max.
    double tail(std::uint32_t n) const { return n < r_max ? thresholds[n] : 0.0; }

    /// Export as a tower base: symbol n, p_n = branch mass, R_n = n.
    ReturnTimeSpec to_spec(double beta_s = 0.5) const
    {
        std::vector<Branch> b;
        for (std::uint32_t n = 1; n <= r_max; ++n)
            b.push_back({n, branch_mass(n), n});
        return ReturnTimeSpec(std::move(b), 0.5, beta_s, truncation_mass);
    }
};

/// Compute the first-return branches up to r_max. Stops early (with the
/// remaining mass reported as truncation) once consecutive thresholds are no
/// longer resolved in double precision.
inline InducingScheme build_inducing(const IntermittentMap& map, std::uint32_t r_max)
{
    if (r_max < 1)
        throw ParameterError("r_max must be >= 1");
    InducingScheme s;
    s.thresholds = {1.0, 0.5};
    std::uint32_t n = 1;
    while (n < r_max) {
        const double prev = s.thresholds.back();
        const double next = map.left_inverse(prev);
        if (!(prev - next > 64.0 * std::numeric_limits<double>::epsilon() * prev))
            break;
        s.thresholds.push_back(next);
        ++n;
    }
    s.r_max = n;
    s.thresholds.resize(n + 1);
    s.truncation_mass = s.thresholds[n];

    // Markov check: f^n maps branch n onto [0,1), so the left endpoint lands
    // on 1/2 and the right endpoint (as a left limit) on 1.
    double defect = 0.0;
    for (std::uint32_t k = 1; k < n; ++k) {
        double lo = s.branch_lo(k), hi = 2.0 * s.branch_hi(k) - 1.0;
        for (std::uint32_t j = 0; j < k; ++j)
            lo = map.step(lo);
        for (std::uint32_t j = 1; j < k; ++j)
            hi = map.left_branch(hi);
        defect = std::max({defect, std::abs(lo - 0.5), std::abs(hi - 1.0)});
    }
    s.markov_defect = defect;
    return s;
}

/// log (f^n)'(x).
inline double log_derivative(const IntermittentMap& map, double x, std::uint32_t n)
{
    double acc = 0.0;
    for (std::uint32_t j = 0; j < n; ++j) {
        acc += std::log(map.derivative(x));
        x = map.step(x);
    }
    return acc;
}

/// Tower over the inducing scheme with ambient projection π(x, ℓ) = f^ℓ(x).
class IntermittentRealization {
  public:
    IntermittentRealization(IntermittentMap map, std::uint32_t r_max, std::uint32_t depth = 64)
        : map_(map), scheme_(build_inducing(map, r_max)), spec_(scheme_.to_spec()), depth_(depth)
    {
    }

    const IntermittentMap& map() const noexcept { return map_; }
    const InducingScheme& scheme() const noexcept { return scheme_; }
    const ReturnTimeSpec& spec() const noexcept { return spec_; }

    /// Point of Y whose first-return itinerary starts with future[0..depth).
    /// Pulls a reference point back through the inverse branches; each inverse
    /// contracts by at least 1/2, so the depth sets the accuracy.
    double embed(const TowerPoint& p) const
    {
        double y = 0.75;
        for (std::uint32_t k = depth_; k-- > 0;)
            y = branch_inverse(p.future(k), y);
        return y;
    }

    /// π(x, ℓ) = f^ℓ(x).
    AmbientPoint project(const TowerPoint& p) const
    {
        double x = embed(p);
        for (std::uint32_t l = 0; l < p.level(); ++l)
            x = map_.step(x);
        return {x, 0.0};
    }

    AmbientPoint step(const AmbientPoint& a) const { return {map_.step(a.x), 0.0}; }

  private:
    /// The point of branch n mapped to y by f^n.
    double branch_inverse(Symbol n, double y) const
    {
        for (Symbol j = 1; j < n; ++j)
            y = map_.left_inverse(y);
        return IntermittentMap::right_inverse(y);
    }

    IntermittentMap map_;
    InducingScheme scheme_;
    ReturnTimeSpec spec_;
    std::uint32_t depth_;
};

// ---------------------------------------------------------------------------
// Solenoid-type skew product on [0,1) x [0,1).

struct SolenoidParams {
    std::uint32_t m = 3;     ///< base degree
    double kappa = 0.0;      ///< base nonlinearity, 0 <= κ < m - 1
    double lambda_s = 0.5;   ///< fibre contraction
    double amplitude = 0.0;  ///< Hölder coupling amplitude A
    double holder_eta = 0.5; ///< exponent of the coupling |sin πx|^η
};

/// f(x, z) = (g(x), frac(λ_s z + (1-λ_s)·d(x)/m + A|sin πx|^η)) with
/// g(x) = m x + κ/(2π) sin 2πx mod 1 and d(x) = floor(m x) the branch digit
/// of the linear part. E^{cu} is horizontal, E^{ss} vertical.
class Solenoid {
  public:
    explicit Solenoid(SolenoidParams p) : p_(p)
    {
        if (p.m < 2)
            throw ParameterError("solenoid base degree must be >= 2");
        if (!(p.kappa >= 0.0) || !(p.m - p.kappa > 1.0))
            throw ParameterError("solenoid base must be expanding: need m - kappa > 1");
        if (!(p.lambda_s > 0.0 && p.lambda_s < 1.0))
            throw ParameterError("solenoid lambda_s must lie in (0,1)");
        if (!(p.lambda_s / (p.m - p.kappa) < 1.0))
            throw ParameterError("solenoid splitting is not dominated");
        if (!(p.holder_eta > 0.0 && p.holder_eta <= 1.0))
            throw ParameterError("solenoid coupling exponent must lie in (0,1]");
        if (!(p.amplitude >= 0.0))
            throw ParameterError("solenoid coupling amplitude must be >= 0");
    }

    const SolenoidParams& params() const noexcept { return p_; }

    double base(double x) const noexcept
    {
        const double y = p_.m * x + p_.kappa / (2.0 * std::numbers::pi) *
                                        std::sin(2.0 * std::numbers::pi * x);
        return frac(y);
    }

    double base_derivative(double x) const noexcept
    {
        return p_.m + p_.kappa * std::cos(2.0 * std::numbers::pi * x);
    }

    std::uint32_t digit(double x) const noexcept
    {
        const auto d = static_cast<std::uint32_t>(p_.m * x);
        return std::min(d, p_.m - 1);
    }

    double coupling(double x) const noexcept
    {
        return p_.amplitude == 0.0
                   ? 0.0
                   : p_.amplitude * std::pow(std::abs(std::sin(std::numbers::pi * x)), p_.holder_eta);
    }

    double fibre(double x, double z) const noexcept
    {
        return frac(p_.lambda_s * z + (1.0 - p_.lambda_s) * digit(x) / p_.m + coupling(x));
    }

    AmbientPoint step(const AmbientPoint& a) const noexcept
    {
        return {base(a.x), fibre(a.x, a.z)};
    }

    /// Contraction/expansion product; < 1 by construction.
    double domination() const noexcept { return p_.lambda_s / (p_.m - p_.kappa); }

    static double frac(double y) noexcept
    {
        double f = y - std::floor(y);
        return f >= 1.0 ? 0.0 : f;
    }

  private:
    SolenoidParams p_;
};

/// Tower of the linear solenoid (κ = 0): m branches of mass 1/m, R ≡ 1,
/// beta_u = 1/m, beta_s = λ_s. The future encodes x in base m; z is obtained
/// by running the fibre recursion along the past, which for an unbounded past
/// is truncated where λ_s^K drops below 1e-20.
class SolenoidRealization {
  public:
    explicit SolenoidRealization(Solenoid sol, std::uint32_t depth = 0)
        : sol_(sol), spec_(make_spec(sol)),
          digits_(depth ? depth : static_cast<std::uint32_t>(std::ceil(
                                      60.0 * std::log(2.0) / std::log(double(sol.params().m))))),
          past_cap_(static_cast<std::uint32_t>(std::ceil(std::log(1e-20) /
                                                         std::log(sol.params().lambda_s))))
    {
        if (sol.params().kappa != 0.0)
            throw ParameterError("tower realization needs a linear solenoid base (kappa = 0)");
    }

    const Solenoid& system() const noexcept { return sol_; }
    const ReturnTimeSpec& spec() const noexcept { return spec_; }
    std::uint32_t past_cap() const noexcept { return past_cap_; }

    AmbientPoint project(const TowerPoint& p) const
    {
        const auto m = static_cast<double>(sol_.params().m);
        const std::uint64_t past = std::min<std::uint64_t>(p.past_length(), past_cap_);
        // x_0 from future digits; x_{-j} prepends past[j-1] to the digits of x_{-(j-1)}.
        std::vector<double> xs(past + 1);
        double x = 0.0;
        for (std::uint64_t k = digits_; k-- > 0;)
            x = (x + (p.future(k) - 1)) / m;
        xs[0] = x;
        for (std::uint64_t j = 1; j <= past; ++j)
            xs[j] = (xs[j - 1] + (p.past(j - 1) - 1)) / m;
        double z = 0.0;
        for (std::uint64_t j = past; j >= 1; --j)
            z = sol_.fibre(xs[j], z);
        return {xs[0], z};
    }

    AmbientPoint step(const AmbientPoint& a) const noexcept { return sol_.step(a); }

  private:
    static ReturnTimeSpec make_spec(const Solenoid& s)
    {
        return uniform_spec(s.params().m, 1, s.params().lambda_s);
    }

    Solenoid sol_;
    ReturnTimeSpec spec_;
    std::uint32_t digits_;
    std::uint32_t past_cap_;
};

// ---------------------------------------------------------------------------
// Catalog.

using System = std::variant<ReturnTimeSpec, IntermittentMap, Solenoid>;

inline AmbientPoint ambient_step(const IntermittentMap& m, const AmbientPoint& a)
{
    return {m.step(a.x), 0.0};
}

inline AmbientPoint ambient_step(const Solenoid& s, const AmbientPoint& a) { return s.step(a); }

inline AmbientPoint ambient_step(const System& sys, const AmbientPoint& a)
{
    if (const auto* m = std::get_if<IntermittentMap>(&sys))
        return ambient_step(*m, a);
    if (const auto* s = std::get_if<Solenoid>(&sys))
        return ambient_step(*s, a);
    throw ParameterError("abstract towers have no ambient step");
}

/// φ = log ‖(Df^N|E^{cu})^{-1}‖ = -log |(f^N)'| along the expanding direction.
inline AmbientObservable cu_derivative_observable(const IntermittentMap& map, std::uint32_t n)
{
    if (n < 1)
        throw ParameterError("N must be >= 1");
    return AmbientObservable(
        "cu_derivative",
        [map, n](const AmbientPoint& a) {
            double x = a.x, acc = 0.0;
            for (std::uint32_t j = 0; j < n; ++j) {
                const double d = map.derivative(x);
                if (!(d > 0.0) || !std::isfinite(d))
                    throw SingularPoint("derivative undefined at x = " + std::to_string(x));
                acc -= std::log(d);
                x = map.step(x);
            }
            return acc;
        },
        {0.5, 0.0, n * std::log(2.0), map.gamma() > 0.0 ? map.gamma() : 1.0, 0.0});
}

inline AmbientObservable cu_derivative_observable(const Solenoid& sol, std::uint32_t n)
{
    if (n < 1)
        throw ParameterError("N must be >= 1");
    const auto& p = sol.params();
    return AmbientObservable(
        "cu_derivative",
        [sol, n](const AmbientPoint& a) {
            double x = a.x, acc = 0.0;
            for (std::uint32_t j = 0; j < n; ++j) {
                const double d = sol.base_derivative(x);
                if (!(d > 0.0) || !std::isfinite(d))
                    throw SingularPoint("derivative undefined at x = " + std::to_string(x));
                acc -= std::log(d);
                x = sol.base(x);
            }
            return acc;
        },
        {0.5, 0.0, n * std::max(std::abs(std::log(p.m - p.kappa)), std::log(p.m + p.kappa)), 1.0,
         0.0});
}

inline AmbientObservable cu_derivative_observable(const System& sys, std::uint32_t n)
{
    if (const auto* m = std::get_if<IntermittentMap>(&sys))
        return cu_derivative_observable(*m, n);
    if (const auto* s = std::get_if<Solenoid>(&sys))
        return cu_derivative_observable(*s, n);
    throw ParameterError("abstract towers have no derivative");
}

} // namespace towerlab
