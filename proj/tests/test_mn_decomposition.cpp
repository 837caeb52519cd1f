#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "towerlab/measures.hpp"
#include "towerlab/mn_decomposition.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats/birkhoff.hpp"
#include "towerlab/stats/deviations.hpp"
#include "towerlab/systems.hpp"

using namespace towerlab;

namespace {

std::shared_ptr<const SolenoidRealization> linear_solenoid(std::uint32_t m, double lambda)
{
    return std::make_shared<const SolenoidRealization>(Solenoid({m, 0.0, lambda, 0.0, 0.5}));
}

AmbientObservable stable_coordinate()
{
    return AmbientObservable("z", [](const AmbientPoint& a) { return a.z; }, {0.5, 0.0, 1.0, 1.0, 1.0});
}

AmbientObservable mixed_observable()
{
    return AmbientObservable(
        "cos_sqrt",
        [](const AmbientPoint& a) {
            return std::cos(2 * std::numbers::pi * a.x) + std::sqrt(std::abs(a.z - 0.25));
        },
        {0.5, 0.0, 2.0, 0.5, 2 * std::numbers::pi + 1});
}

/// Realization whose fibre coordinate records whether the past is unbounded,
/// so lifted differences never contract.
struct FrozenFibre {
    ReturnTimeSpec s = uniform_spec(2);
    const ReturnTimeSpec& spec() const { return s; }
    AmbientPoint project(const TowerPoint& p) const { return {0.0, p.has_unbounded_past() ? 1.0 : 0.0}; }
};

} // namespace

TEST(MNDecomposition, StableCoordinateOracle)
{
    const double lam = 0.5;
    const auto real = linear_solenoid(3, lam);
    const auto d = mn_decompose(stable_coordinate(), real, std::uint64_t{60});
    const double geo = (1 - std::pow(lam, 61)) / (1 - lam);
    for (std::uint64_t i = 0; i < 500; ++i) {
        const auto p = srb_point(real->spec(), 3, i);
        const double z = real->project(p).z;
        EXPECT_NEAR(d.chi(p), z * geo, 1e-12);
        // ψ sees only p̂ (z = 0); its step gets fibre value (1-λ)·digit/m.
        const double left = real->spec().left_endpoint(p.future(0));
        EXPECT_NEAR(d.psi(p), left * (1 - std::pow(lam, 61)), 1e-12);
        EXPECT_LT(mn_identity_residual(d, real->spec(), p), 1e-8);
        EXPECT_NEAR(mn_identity_residual(d, real->spec(), p), std::pow(lam, 61) * z, 1e-15);
    }
    EXPECT_LT(d.residual_bound, 1e-8);
}

TEST(MNDecomposition, LeafConstantObservableHasZeroChi)
{
    const auto real = linear_solenoid(3, 0.5);
    const AmbientObservable phi("cos_x", [](const AmbientPoint& a) { return std::cos(2 * std::numbers::pi * a.x); },
                                {0.5, 0.0, 1.0, 1.0, 2 * std::numbers::pi});
    const auto d = mn_decompose(phi, real);
    for (std::uint64_t i = 0; i < 300; ++i) {
        const auto p = srb_point(real->spec(), 4, i);
        EXPECT_EQ(d.chi(p), 0.0);
        EXPECT_EQ(d.psi(p), d.phi_lift(p));
    }
}

TEST(MNDecomposition, AutoDepthMeetsTarget)
{
    const auto real = linear_solenoid(3, 0.5);
    const auto phi = mixed_observable();
    const auto d = mn_decompose(phi, real);
    EXPECT_LT(d.residual_bound, 1e-8);
    EXPECT_GE(mn_term_envelope(phi.norms(), 0.5, 1.0, d.j_max), 1e-8);
    EXPECT_NEAR(d.chi_sup_bound, (2 * std::numbers::pi + 1) / (1 - std::sqrt(0.5)), 1e-12);
    EXPECT_NEAR(d.beta_prime, std::pow(0.5, 0.25), 1e-15);
}

TEST(MNDecomposition, IdentityResidualWithinBound)
{
    const auto real = linear_solenoid(3, 0.5);
    const auto d = mn_decompose(mixed_observable(), real);
    for (std::uint64_t i = 0; i < 2000; ++i) {
        const auto p = srb_point(real->spec(), 5, i);
        ASSERT_LE(mn_identity_residual(d, real->spec(), p), d.residual_bound + 1e-14);
        ASSERT_LE(std::abs(d.chi(p)), d.chi_sup_bound);
    }
}

TEST(MNDecomposition, PsiConstantOnStableLeaves)
{
    const auto real = linear_solenoid(3, 0.5);
    const auto d = mn_decompose(mixed_observable(), real);
    const auto& spec = real->spec();
    for (std::uint64_t leaf = 0; leaf < 5; ++leaf) {
        const auto base = srb_point(spec, 6, leaf);
        std::vector<Symbol> fut;
        for (std::uint64_t k = 0; k < 80; ++k)
            fut.push_back(base.future(k));
        CompensatedSum s, s2;
        for (std::uint64_t i = 0; i < 100; ++i) {
            const auto q = TowerPoint::with_random_tail(spec, rng::mix(leaf, i), {}, {}, 0, 0);
            std::vector<Symbol> past;
            for (std::uint64_t k = 0; k < 80; ++k)
                past.push_back(q.future(k));
            const auto p = TowerPoint::from_symbols(fut, 1, past, base.level());
            const double v = d.psi(p);
            s.add(v);
            s2.add(v * v);
        }
        const double mean = s.value() / 100;
        EXPECT_LT(s2.value() / 100 - mean * mean, 1e-12);
    }
}

TEST(MNDecomposition, DivergenceDetected)
{
    const auto real = std::make_shared<const FrozenFibre>();
    const auto d = mn_decompose(stable_coordinate(), real, std::uint64_t{10});
    const auto p = srb_point(real->spec(), 1, 0);
    EXPECT_THROW(d.chi(p), NonContractingFiber);
    EXPECT_THROW(mn_decompose(AmbientObservable("bad", [](const AmbientPoint&) { return 0.0; },
                                                {0.5, 0.0, 0.0, 0.0, 1.0}),
                              real),
                 ParameterError);
}

TEST(MNDecomposition, HolderBridge)
{
    // Same-level, same-past pairs: |φ̃(y) - φ̃(z)| ≤ C·(β^{η/2})^{s(y,z)}, with C
    // fitted on one batch and held on another; the Hölder constant is an upper bound.
    const auto real = linear_solenoid(3, 0.5);
    const auto phi = mixed_observable();
    const auto lifted = lift(phi, real);
    const auto& spec = real->spec();
    const double bp = std::pow(spec.beta_u(), phi.norms().holder_exponent / 2);
    auto batch = [&](std::uint64_t seed, double C, std::size_t& violations) {
        double worst = 0.0;
        for (std::uint64_t i = 0; i < 2000; ++i) {
            const auto a = srb_point(spec, seed, i);
            const auto k = 1 + rng::mix(seed, i) % 12;
            std::vector<Symbol> fa, fb, past;
            for (std::uint64_t j = 0; j < 60; ++j) {
                fa.push_back(a.future(j));
                past.push_back(a.future(j + 100));
            }
            fb = fa;
            fb[k] = fa[k] == 1 ? 2 : 1;
            const auto y = TowerPoint::from_symbols(fa, 1, past, 0);
            const auto z = TowerPoint::from_symbols(fb, 3, past, 0);
            const auto s = separation_time(y, z, 200);
            const double diff = std::abs(lifted(y) - lifted(z));
            const double r = diff / std::pow(bp, static_cast<double>(s.value()));
            worst = std::max(worst, r);
            if (C > 0 && r > C)
                ++violations;
        }
        return worst;
    };
    std::size_t v = 0;
    const double C = batch(11, 0.0, v);
    EXPECT_LE(C, phi.norms().holder_constant);
    batch(12, 2 * C, v);
    EXPECT_EQ(v, 0u);
}

TEST(MNDecomposition, BirkhoffIdentity)
{
    const auto real = linear_solenoid(3, 0.5);
    const auto d = mn_decompose(mixed_observable(), real);
    const auto& spec = real->spec();
    for (std::uint64_t i = 0; i < 40; ++i) {
        TowerPoint p = srb_point(spec, 8, i);
        CompensatedSum a, b;
        for (std::uint64_t n = 1; n <= 100; ++n) {
            a.add(d.phi_lift(p));
            b.add(d.psi(p));
            const double gap = std::abs(a.value() - b.value()) / n;
            ASSERT_LE(gap, 2 * d.chi_sup_bound / n + d.residual_bound);
            p.advance(spec);
        }
    }
}

TEST(MNDecomposition, MaximalDeviationComparison)
{
    // Once n > 4‖χ‖/ε, every orbit with a deviation above ε for φ̃ has one
    // above ε/2 for ψ at the same time, so the counts are ordered.
    const auto real = linear_solenoid(3, 0.5);
    const auto d = mn_decompose(stable_coordinate(), real);
    const auto spec = std::make_shared<const ReturnTimeSpec>(real->spec());
    const double eps = 0.06;
    const auto n0 = static_cast<std::uint64_t>(std::floor(4 * d.chi_sup_bound / eps)) + 1;
    DeviationOptions o;
    o.epsilon = eps;
    o.mean = 1.0 / 3.0;
    o.n = {n0, n0 + 30, n0 + 60};
    o.j_max = n0 + 80;
    o.members = 400;
    o.seed = 9;
    const auto f = deviation_series(srb_tower_orbits(spec, d.phi_lift, 21), o);
    o.epsilon = eps / 2;
    const auto g = deviation_series(srb_tower_orbits(spec, d.psi, 21), o);
    EXPECT_GT(f.mld_count[0], 0u);
    for (std::size_t i = 0; i < o.n.size(); ++i)
        EXPECT_LE(f.mld_count[i], g.mld_count[i]) << "n = " << o.n[i];

    // Orbit-by-orbit.
    std::vector<double> u(o.j_max), v(o.j_max), du(o.j_max), dv(o.j_max);
    const auto fu = srb_tower_orbits(spec, d.phi_lift, 21);
    const auto fv = srb_tower_orbits(spec, d.psi, 21);
    for (std::uint64_t m = 0; m < o.members; ++m) {
        fu(m, u);
        fv(m, v);
        running_deviation(u, o.mean, du);
        running_deviation(v, o.mean, dv);
        for (std::uint64_t j = n0; j <= o.j_max; ++j)
            if (du[j - 1] > eps) {
                ASSERT_GT(dv[j - 1], eps / 2) << "member " << m << " j " << j;
            }
    }
}
