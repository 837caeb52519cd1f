#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "towerlab/errors.hpp"
#include "towerlab/numerics.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

/// Anything with `spec()` and `project(TowerPoint) -> AmbientPoint`.
template <class R>
concept Realization = requires(const R& r, const TowerPoint& p) {
    { r.spec() } -> std::convertible_to<const ReturnTimeSpec&>;
    { r.project(p) } -> std::convertible_to<AmbientPoint>;
};

/// φ̃ = φ∘π.
template <Realization R>
TowerObservable lift(const AmbientObservable& phi, std::shared_ptr<const R> real)
{
    NormData n = phi.norms();
    n.beta = real->spec().beta_u();
    n.beta_seminorm = 0.0; // unknown in the β-metric; see the bridge bound
    return TowerObservable(
        phi.name() + "_lift", [phi, real](const TowerPoint& p) { return phi(real->project(p)); },
        n);
}

/// φ̃ = ψ + χ - χ∘T with ψ constant on stable leaves.
struct MNDecomposition {
    TowerObservable phi_lift;
    TowerObservable psi;
    TowerObservable chi;
    std::uint64_t j_max = 0;
    double residual_bound = 0.0; ///< bound on |φ̃ - (ψ + χ - χ∘T)|
    double chi_sup_bound = 0.0;  ///< bound on ‖χ‖_∞
    double beta_prime = 0.0;     ///< max(β_u, β_s)^{η/2}
};

/// Envelope of the j-th term |φ̃(T^j p) - φ̃(T^j p̂)| ≤ H·(diam·β_s^j)^η.
inline double mn_term_envelope(const NormData& n, double beta_s, double diam, std::uint64_t j)
{
    return n.holder_constant *
           std::pow(diam * std::pow(beta_s, static_cast<double>(j)), n.holder_exponent);
}

/// Coboundary decomposition of a lifted Hölder observable. χ is the truncated
/// series Σ_{j≤J} [φ̃(T^j p) - φ̃(T^j p̂)] with p̂ the empty-past point of p's
/// stable leaf; ψ(p) = φ̃(p̂) + χ(T p̂), which depends on p̂ only. The identity
/// residual equals the first dropped term, φ̃(T^{J+1}p) - φ̃(T^{J+1}p̂).
/// Without `j_max`, J is the least index with residual bound below 1e-8.
/// Terms outside 2x the Hölder envelope raise NonContractingFiber.
template <Realization R>
MNDecomposition mn_decompose(const AmbientObservable& phi, std::shared_ptr<const R> real,
                             std::optional<std::uint64_t> j_max = std::nullopt,
                             double stable_diameter = 1.0)
{
    const auto& n = phi.norms();
    const double bs = real->spec().beta_s();
    if (!(n.holder_exponent > 0.0 && n.holder_exponent <= 1.0))
        throw ParameterError("Hölder exponent must lie in (0,1]");
    if (!(n.holder_constant >= 0.0))
        throw ParameterError("Hölder constant must be >= 0");

    std::uint64_t J = 0;
    if (j_max) {
        J = *j_max;
    } else {
        while (mn_term_envelope(n, bs, stable_diameter, J + 1) >= 1e-8) {
            if (++J > 100000)
                throw NonContractingFiber("no truncation depth reaches the 1e-8 residual target");
        }
    }

    MNDecomposition d;
    d.j_max = J;
    d.residual_bound = mn_term_envelope(n, bs, stable_diameter, J + 1);
    d.chi_sup_bound = n.holder_constant * std::pow(stable_diameter, n.holder_exponent) /
                      (1.0 - std::pow(bs, n.holder_exponent));
    d.beta_prime = std::pow(std::max(real->spec().beta_u(), bs), n.holder_exponent / 2.0);
    d.phi_lift = lift(phi, real);

    auto spec = std::make_shared<const ReturnTimeSpec>(real->spec());
    const double diam = stable_diameter;
    auto chi_fn = [phi, real, spec, J, n, bs, diam](const TowerPoint& p) {
        TowerPoint x = p;
        TowerPoint y = quotient_project(p);
        CompensatedSum s;
        for (std::uint64_t j = 0; j <= J; ++j) {
            const double term = phi(real->project(x)) - phi(real->project(y));
            const double env = mn_term_envelope(n, bs, diam, j);
            if (std::abs(term) > 2.0 * env + 1e-12)
                throw NonContractingFiber("coboundary term " + std::to_string(j) + " = " +
                                          format_real(term) + " exceeds envelope " +
                                          format_real(env));
            s.add(term);
            x.advance(*spec);
            y.advance(*spec);
        }
        return s.value();
    };

    NormData chi_norms{real->spec().beta_u(), 0.0, d.chi_sup_bound, n.holder_exponent,
                       n.holder_constant};
    d.chi = TowerObservable(phi.name() + "_chi", chi_fn, chi_norms);

    auto psi_fn = [phi, real, spec, chi_fn](const TowerPoint& p) {
        const TowerPoint base = quotient_project(p);
        return phi(real->project(base)) + chi_fn(tower_step(*spec, base));
    };
    NormData psi_norms{d.beta_prime, 0.0, n.sup_norm + 2.0 * d.chi_sup_bound, n.holder_exponent,
                       n.holder_constant};
    d.psi = TowerObservable(phi.name() + "_psi", psi_fn, psi_norms);
    return d;
}

/// |φ̃(p) - (ψ(p) + χ(p) - χ(Tp))|.
inline double mn_identity_residual(const MNDecomposition& d, const ReturnTimeSpec& spec,
                                   const TowerPoint& p)
{
    return std::abs(d.phi_lift(p) - (d.psi(p) + d.chi(p) - d.chi(tower_step(spec, p))));
}

} // namespace towerlab
