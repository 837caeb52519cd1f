#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "towerlab/measures.hpp"

using namespace towerlab;

TEST(Tail, UnitReturnTimes)
{
    const auto spec = uniform_spec(3);
    EXPECT_DOUBLE_EQ(tail(spec, 0), 1.0);
    for (std::uint64_t n = 1; n < 10; ++n)
        EXPECT_EQ(tail(spec, n), 0.0);
}

TEST(Tail, GeometricClosedForm)
{
    const auto spec = geometric_spec(60);
    for (std::uint64_t n = 0; n < 60; ++n)
        EXPECT_NEAR(tail(spec, n), std::ldexp(1.0, -static_cast<int>(n)), 1e-16) << n;
    EXPECT_EQ(tail(spec, 60), 0.0);
}

TEST(Tail, PolynomialTelescopes)
{
    for (double alpha : {2.0, 3.0}) {
        const auto spec = polynomial_spec(alpha, 200);
        for (std::uint64_t n = 0; n < 200; ++n)
            EXPECT_NEAR(tail(spec, n), std::pow(n + 1.0, -alpha), 1e-14) << n;
    }
}

TEST(Tail, MonotoneAndVanishesAtTop)
{
    const ReturnTimeSpec spec({{1, 0.1, 4}, {2, 0.6, 1}, {3, 0.3, 7}}, 0.5, 0.5);
    for (std::uint64_t n = 1; n <= 8; ++n)
        EXPECT_LE(tail(spec, n), tail(spec, n - 1));
    EXPECT_EQ(tail(spec, spec.max_return_time()), 0.0);
}

TEST(LevelMasses, Examples)
{
    const auto one = level_masses(single_branch_spec(1));
    EXPECT_EQ(one.kac_norm, 1.0);
    ASSERT_EQ(one.level_mass.size(), 1u);
    EXPECT_EQ(one.level_mass[0], 1.0);

    const auto geo = level_masses(geometric_spec(50));
    EXPECT_NEAR(geo.kac_norm, 0.5, 1e-14);
    for (std::size_t l = 0; l < 45; ++l)
        EXPECT_NEAR(geo.level_mass[l], std::ldexp(1.0, -static_cast<int>(l) - 1), 1e-15);
}

TEST(LevelMasses, PolynomialDirectSummation)
{
    const std::uint32_t r = 300;
    const auto m = level_masses(polynomial_spec(3.0, r));
    long double z = 0;
    for (std::uint32_t l = r; l-- > 0;)
        z += std::pow(static_cast<long double>(l + 1), -3.0L);
    const double c = static_cast<double>(1.0L / z);
    EXPECT_NEAR(m.kac_norm, c, 1e-15);
    for (std::uint32_t l = 0; l < r; ++l)
        EXPECT_NEAR(m.level_mass[l], c * std::pow(l + 1.0, -3.0), 1e-15);
}

TEST(LevelMasses, KacIdentityAndMonotonicity)
{
    for (const auto& spec : {geometric_spec(40), polynomial_spec(2.0, 500), polynomial_spec(3.0, 500),
                             ReturnTimeSpec({{1, 0.1, 4}, {2, 0.6, 1}, {3, 0.3, 7}}, 0.5, 0.5)}) {
        const auto m = level_masses(spec);
        CompensatedSum s;
        for (double x : m.level_mass)
            s.add(x);
        EXPECT_NEAR(s.value(), 1.0, 1e-12);
        EXPECT_DOUBLE_EQ(m.level_mass[0], m.kac_norm);
        for (std::size_t l = 1; l < m.level_mass.size(); ++l)
            EXPECT_LE(m.level_mass[l], m.level_mass[l - 1]);
        EXPECT_NEAR(m.kac_norm, 1.0 / spec.mean_return_time(), 1e-13);
    }
}

TEST(DensityFloor, Examples)
{
    EXPECT_EQ(density_floor_check(single_branch_spec(1)), 1.0);
    EXPECT_NEAR(density_floor_check(geometric_spec(50)), 0.5, 1e-14);
    EXPECT_GT(density_floor_check(polynomial_spec(1.5, 1000)), 0.0);
}

TEST(SrbSample, TrivialTower)
{
    const auto pts = srb_sample(single_branch_spec(1), 4, 100);
    for (const auto& p : pts) {
        EXPECT_EQ(p.level(), 0u);
        EXPECT_EQ(p.future(0), 1u);
    }
    EXPECT_THROW(srb_sample(single_branch_spec(1), 4, 0), ParameterError);
}

TEST(SrbSample, LevelZeroFrequency)
{
    const auto spec = geometric_spec(40);
    const std::uint64_t n = 100000;
    std::uint64_t zero = 0;
    for (std::uint64_t i = 0; i < n; ++i)
        zero += srb_point(spec, 2024, i).level() == 0;
    const double p = 0.5, sigma = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(static_cast<double>(zero) / n, p, 3 * sigma);
}

TEST(SrbSample, PushForwardMatchesLevelMasses)
{
    const auto spec = geometric_spec(30);
    const auto m = level_masses(spec);
    const std::uint64_t n = 100000;
    const std::size_t bins = 8; // levels 0..6 and a lumped tail
    std::vector<double> observed(bins, 0.0), expected(bins, 0.0);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto q = tower_step(spec, srb_point(spec, 77, i));
        observed[std::min<std::size_t>(q.level(), bins - 1)] += 1.0;
    }
    for (std::size_t l = 0; l < m.level_mass.size(); ++l)
        expected[std::min(l, bins - 1)] += m.level_mass[l] * n;
    double chi2 = 0.0;
    for (std::size_t b = 0; b < bins; ++b)
        chi2 += (observed[b] - expected[b]) * (observed[b] - expected[b]) / expected[b];
    const boost::math::chi_squared dist(bins - 1);
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.99));
}

TEST(SrbSample, ColumnLawProportionalToPR)
{
    const ReturnTimeSpec spec({{1, 0.5, 1}, {2, 0.25, 2}, {3, 0.25, 6}}, 0.5, 0.5);
    const std::uint64_t n = 60000;
    std::map<Symbol, double> count;
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto p = srb_point(spec, 5, i);
        ASSERT_LT(p.level(), spec.return_time(p.future(0)));
        count[p.future(0)] += 1.0;
    }
    const double z = 0.5 + 0.5 + 1.5;
    const double probs[] = {0.5 / z, 0.5 / z, 1.5 / z};
    double chi2 = 0.0;
    for (Symbol a = 1; a <= 3; ++a) {
        const double e = probs[a - 1] * n;
        chi2 += (count[a] - e) * (count[a] - e) / e;
    }
    EXPECT_LT(chi2, boost::math::quantile(boost::math::chi_squared(2), 0.99));
}

TEST(InvariantMeasure, CylinderIndicatorsExact)
{
    // ∫φ∘T̄ dν̄ = ∫φ dν̄ for depth-d cylinder indicators, by enumerating depth-(d+1) cells.
    const ReturnTimeSpec spec({{1, 0.5, 1}, {2, 0.3, 2}, {3, 0.2, 3}}, 0.5, 0.5);
    const double c = level_masses(spec).kac_norm;
    const int d = 3;
    std::vector<std::vector<Symbol>> words{{}};
    for (int k = 0; k <= d; ++k) {
        std::vector<std::vector<Symbol>> next;
        for (const auto& w : words)
            for (Symbol a = 1; a <= 3; ++a) {
                auto v = w;
                v.push_back(a);
                next.push_back(v);
            }
        words = next;
    }
    for (Symbol a = 1; a <= 3; ++a)
        for (Symbol b = 1; b <= 3; ++b)
            for (Symbol e = 1; e <= 3; ++e)
                for (std::uint32_t lvl = 0; lvl < spec.return_time(a); ++lvl) {
                    const std::vector<Symbol> target{a, b, e};
                    const double direct = cylinder_mass(spec, c, lvl, target);
                    double pulled = 0.0;
                    for (const auto& w : words) // depth d+1
                        for (std::uint32_t l = 0; l < spec.return_time(w[0]); ++l) {
                            std::uint32_t nl;
                            std::vector<Symbol> img;
                            if (l + 1 < spec.return_time(w[0])) {
                                nl = l + 1;
                                img.assign(w.begin(), w.begin() + d);
                            } else {
                                nl = 0;
                                img.assign(w.begin() + 1, w.end());
                            }
                            if (nl == lvl && img == target)
                                pulled += cylinder_mass(spec, c, l, w);
                        }
                    EXPECT_NEAR(pulled, direct, 1e-10);
                }
}
