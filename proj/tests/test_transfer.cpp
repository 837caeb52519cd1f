#include <gtest/gtest.h>

#include <cmath>

#include "towerlab/measures.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats/correlation.hpp"
#include "towerlab/stats/fit.hpp"
#include "towerlab/transfer.hpp"

using namespace towerlab;

namespace {

Eigen::VectorXd random_vector(std::size_t n, std::uint64_t seed)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        v[static_cast<Eigen::Index>(i)] = 2.0 * rng::uniform(seed, i) - 1.0;
    return v;
}

/// ∫φ·(ψ∘T̄) dν̄ by enumerating depth-(d+1) cells, independent of the matrix.
double pullback_integral(const CylinderBasis& basis, const Eigen::VectorXd& phi,
                         const Eigen::VectorXd& psi)
{
    const auto& spec = basis.spec();
    const auto d = basis.depth();
    const auto B = spec.size();
    std::vector<std::vector<std::size_t>> ws{{}};
    for (std::uint32_t k = 0; k <= d; ++k) {
        std::vector<std::vector<std::size_t>> next;
        for (const auto& w : ws)
            for (std::size_t a = 0; a < B; ++a) {
                auto v = w;
                v.push_back(a);
                next.push_back(v);
            }
        ws = std::move(next);
    }
    auto find = [&](std::uint32_t level, const std::vector<std::size_t>& w) {
        std::vector<Symbol> sym;
        for (auto pos : w)
            sym.push_back(spec.branches()[pos].index);
        return basis.cell_of(TowerPoint::from_symbols(sym, spec.branches()[0].index, {}, level));
    };
    double total = 0.0;
    for (const auto& w : ws) {
        double mass = basis.kac_norm();
        for (auto pos : w)
            mass *= spec.branches()[pos].p;
        const auto R = spec.branches()[w[0]].return_time;
        const std::vector<std::size_t> head(w.begin(), w.begin() + d);
        const std::vector<std::size_t> tail(w.begin() + 1, w.end());
        for (std::uint32_t l = 0; l < R; ++l) {
            const auto src = find(l, head);
            const auto dst = l + 1 < R ? find(l + 1, head) : find(0, tail);
            total += mass * phi[static_cast<Eigen::Index>(src)] * psi[static_cast<Eigen::Index>(dst)];
        }
    }
    return total;
}

} // namespace

TEST(BuildOperator, TrivialTower)
{
    const auto op = build_operator(single_branch_spec(1), 1);
    ASSERT_EQ(op.matrix().rows(), 1);
    EXPECT_EQ(op.matrix().coeff(0, 0), 1.0);
}

TEST(BuildOperator, TwoBranchHandComputation)
{
    const auto op = build_operator(uniform_spec(2), 1);
    const auto& b = op.basis();
    const auto v = b.sample(cylinder_indicator(0, {1}));
    const auto lv = op.apply(v);
    for (Eigen::Index i = 0; i < lv.size(); ++i)
        EXPECT_DOUBLE_EQ(lv[i], 0.5);
}

TEST(BuildOperator, CellCountAndMasses)
{
    const ReturnTimeSpec spec({{1, 0.5, 1}, {2, 0.3, 2}, {3, 0.2, 3}}, 0.5, 0.5);
    const auto op = build_operator(spec, 3);
    EXPECT_EQ(op.basis().size(), 6u * 9u);
    CompensatedSum s;
    for (double m : op.basis().masses())
        s.add(m);
    EXPECT_NEAR(s.value(), 1.0, 1e-12);
    for (std::size_t i = 0; i < op.basis().size(); ++i) {
        const auto p = op.basis().cell_point(i);
        EXPECT_EQ(op.basis().cell_of(p), i);
    }
}

TEST(BuildOperator, SizeCapSuggestsDepth)
{
    const auto spec = uniform_spec(8);
    try {
        build_operator(spec, 7, 100000);
        FAIL();
    } catch (const SizeError& e) {
        EXPECT_EQ(e.suggested_depth(), 5); // 8^5 = 32768 <= 1e5 < 8^6
    }
    try {
        build_operator(polynomial_spec(3.0, 1000), 1, 1000);
        FAIL();
    } catch (const SizeError& e) {
        EXPECT_EQ(e.suggested_depth(), 0);
    }
}

TEST(BuildOperator, PositiveRowStochastic)
{
    const auto op = build_operator(geometric_spec(6), 3);
    const auto& M = op.matrix();
    for (Eigen::Index r = 0; r < M.outerSize(); ++r) {
        double row = 0.0;
        for (decltype(op)::Matrix::InnerIterator it(M, r); it; ++it) {
            EXPECT_GE(it.value(), 0.0);
            row += it.value();
        }
        EXPECT_NEAR(row, 1.0, 1e-14);
    }
}

TEST(BuildOperator, Duality)
{
    const ReturnTimeSpec spec({{1, 0.4, 1}, {2, 0.35, 2}, {3, 0.25, 4}}, 0.5, 0.5);
    for (std::uint32_t d = 1; d <= 4; ++d) {
        const auto op = build_operator(spec, d);
        for (std::uint64_t t = 0; t < 12; ++t) {
            const auto phi = random_vector(op.basis().size(), rng::mix(d, 2 * t));
            const auto psi = random_vector(op.basis().size(), rng::mix(d, 2 * t + 1));
            const double lhs = op.basis().integrate(op.apply(phi).cwiseProduct(psi));
            EXPECT_NEAR(lhs, pullback_integral(op.basis(), phi, psi), 1e-10);
        }
    }
}

TEST(TransferInvariants, MassPositivitySupLq)
{
    const auto op = build_operator(polynomial_spec(2.5, 40), 2);
    const auto& b = op.basis();
    Eigen::VectorXd phi = random_vector(b.size(), 3).cwiseAbs();
    const double mass = b.integrate(phi);
    const double sup = phi.cwiseAbs().maxCoeff();
    Eigen::VectorXd v = phi;
    for (int n = 1; n <= 60; ++n) {
        v = op.apply(v);
        ASSERT_NEAR(b.integrate(v), mass, 1e-12);
        ASSERT_GE(v.minCoeff(), 0.0);
        ASSERT_LE(v.cwiseAbs().maxCoeff(), sup + 1e-15);
    }
    const Eigen::VectorXd centered_phi = centered(b, phi);
    const double csup = centered_phi.cwiseAbs().maxCoeff();
    const auto D = l1_decay(op, phi, 30);
    for (std::uint64_t n : {0u, 1u, 5u, 30u})
        for (double q : {2.0, 4.0})
            EXPECT_LE(centered_lq_moment(op, phi, n, q),
                      std::pow(csup, q - 1.0) * D[n] * (1 + 1e-12) + 1e-300);
}

TEST(L1Decay, Examples)
{
    const auto unit = build_operator(uniform_spec(2), 1);
    const auto zero = l1_decay(unit, unit.basis().sample(constant_observable(7.0)), 5);
    for (double x : zero)
        EXPECT_NEAR(x, 0.0, 1e-15);
    const auto first = l1_decay(unit, unit.basis().sample(cylinder_indicator(0, {1})), 5);
    EXPECT_NEAR(first[0], 0.5, 1e-15);
    for (std::size_t n = 1; n < first.size(); ++n)
        EXPECT_EQ(first[n], 0.0);
}

TEST(L1Decay, GeometricTowerIsExponential)
{
    const auto op = build_operator(geometric_spec(60), 1);
    const auto D = l1_decay(op, op.basis().sample(level_indicator(0)), 40);
    for (std::size_t n = 1; n < D.size(); ++n)
        EXPECT_LE(D[n], D[n - 1] * (1 + 1e-12));
    std::vector<std::uint64_t> n;
    for (std::uint64_t k = 5; k <= 40; ++k)
        n.push_back(k);
    const std::vector<double> y(D.begin() + 5, D.begin() + 41);
    const auto fit = fit_rate(n, y, RateClass::exponential);
    EXPECT_GE(fit.r_squared, 0.99);
    EXPECT_GT(fit.tau, 0.0);
}

TEST(CorrExact, Examples)
{
    const auto op = build_operator(uniform_spec(2), 2);
    const auto& b = op.basis();
    const auto phi = b.sample(cylinder_indicator(0, {1, 2}));
    const auto one = b.sample(constant_observable(1.0));
    for (double c : corr_exact(op, phi, one, 6))
        EXPECT_NEAR(c, 0.0, 1e-15);
    const auto psi = b.sample(cylinder_indicator(0, {2, 2}));
    const auto c = corr_exact(op, phi, psi, 6);
    EXPECT_GT(c[0], 0.0);
    for (std::size_t n = 2; n < c.size(); ++n)
        EXPECT_NEAR(c[n], 0.0, 1e-15);
}

TEST(CorrExact, BoundedByDecayTimesSup)
{
    const auto op = build_operator(geometric_spec(12), 2);
    const auto& b = op.basis();
    const auto phi = random_vector(b.size(), 41);
    const auto psi = random_vector(b.size(), 42);
    const auto D = l1_decay(op, phi, 50);
    const auto C = corr_exact(op, phi, psi, 50);
    const double sup = psi.cwiseAbs().maxCoeff();
    for (std::size_t n = 0; n < D.size(); ++n)
        EXPECT_LE(C[n], sup * D[n] * (1 + 1e-12) + 1e-300);
}

TEST(CorrExact, MonteCarloCrossCheck)
{
    const auto spec = geometric_spec(30);
    const auto op = build_operator(spec, 1);
    const auto phi = level_indicator(0);
    const auto psi = cylinder_indicator(0, {1});
    const std::vector<std::uint64_t> n{1, 2, 3, 4, 6};
    const auto exact = corr_exact(op, op.basis().sample(phi), op.basis().sample(psi), 6);
    const auto mc = corr_mc(spec, phi, psi, n, 40000, 5, 1);
    for (std::size_t k = 0; k < n.size(); ++k)
        EXPECT_NEAR(mc.value[k], exact[n[k]], 3 * mc.stderr[k] + 1e-3) << n[k];
}
