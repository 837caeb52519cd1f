#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "towerlab/measures.hpp"
#include "towerlab/stats/birkhoff.hpp"
#include "towerlab/stats/fit.hpp"
#include "towerlab/stats/tails.hpp"
#include "towerlab/systems.hpp"

using namespace towerlab;

namespace {

std::vector<std::uint64_t> range(std::uint64_t lo, std::uint64_t hi, std::uint64_t step = 1)
{
    std::vector<std::uint64_t> n;
    for (auto k = lo; k <= hi; k += step)
        n.push_back(k);
    return n;
}

template <class F>
std::vector<double> eval(const std::vector<std::uint64_t>& n, F f)
{
    std::vector<double> y;
    for (auto k : n)
        y.push_back(f(static_cast<double>(k)));
    return y;
}

} // namespace

TEST(ExpansionTime, HandCases)
{
    EXPECT_EQ(expansion_time(std::vector<double>(10, -1.0), -1.0), 1u);
    // Averages 0, 0, -1/3, -1/2, ...: the last one above -1/2 is at k = 3.
    EXPECT_EQ(expansion_time(std::vector<double>{0, 0, -1, -1, -1, -1}, -1.0), 4u);
    EXPECT_EQ(expansion_time(std::vector<double>{0, 0, 0}, -1.0), 4u);
}

TEST(ExpansionTime, NotExpandingRejected)
{
    const OrbitFiller zero = [](std::uint64_t, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    ExpansionTimeOptions o;
    o.n = {1, 2};
    o.lambda = 0.0;
    EXPECT_THROW(expansion_time_tail(zero, o), NotExpanding);
    o.lambda = 0.3;
    EXPECT_THROW(expansion_time_tail(zero, o), NotExpanding);
}

TEST(ExpansionTime, UniformlyExpandingIsImmediate)
{
    for (const System& sys : {System(IntermittentMap(0.0)), System(Solenoid({3, 0.0, 0.5, 0.0, 0.5}))}) {
        const auto phi = cu_derivative_observable(sys, 1);
        const double lambda = phi({0.3, 0.0});
        const auto orbits = ambient_orbits([sys](const AmbientPoint& a) { return ambient_step(sys, a); },
                                           phi, lebesgue_leaf(1));
        ExpansionTimeOptions o;
        o.lambda = lambda;
        o.n = range(1, 50);
        o.margin = 50;
        o.members = 300;
        const auto t = expansion_time_tail(orbits, o);
        for (double v : t.value)
            EXPECT_EQ(v, 0.0);
        EXPECT_EQ(t.censored, 0u);
    }
}

TEST(ExpansionTime, IntermittentTailDecays)
{
    const IntermittentMap lsv(0.5);
    const auto phi = cu_derivative_observable(lsv, 1);
    const auto step = [lsv](const AmbientPoint& a) { return AmbientPoint{lsv.step(a.x), 0}; };
    const double lambda = long_orbit_mean(step, phi, {0.3, 0}, 1000000).mean;
    ExpansionTimeOptions o;
    o.lambda = lambda;
    o.n = range(5, 200, 5);
    o.margin = 200;
    o.members = 4000;
    o.seed = 2;
    const auto t = expansion_time_tail(ambient_orbits(step, phi, lebesgue_leaf(2)), o);
    for (std::size_t i = 1; i < t.value.size(); ++i)
        EXPECT_LE(t.value[i], t.value[i - 1]);
    EXPECT_GT(t.value.front(), 0.0);
    const auto fit = fit_rate(t.n, t.value, RateClass::polynomial);
    EXPECT_GT(fit.alpha, 0.0);
}

TEST(RecurrenceTail, AbstractTowerIsExact)
{
    const auto spec = polynomial_spec(2.0, 100);
    const auto n = range(1, 120, 7);
    const auto t = recurrence_tail_estimate(spec, n);
    for (std::size_t i = 0; i < n.size(); ++i) {
        EXPECT_EQ(t.value[i], tail(spec, n[i]));
        EXPECT_EQ(t.stderr[i], 0.0);
    }
}

TEST(RecurrenceTail, DoublingMapIsGeometric)
{
    const auto n = range(1, 10);
    const auto t = recurrence_tail_estimate(IntermittentMap(0.0), n, 40000, 40, 3);
    for (std::size_t i = 0; i < n.size(); ++i) {
        const double p = std::ldexp(1.0, -static_cast<int>(n[i]));
        EXPECT_NEAR(t.value[i], p, 4 * std::sqrt(p * (1 - p) / 40000.0) + 1e-12) << n[i];
    }
}

TEST(RecurrenceTail, IntermittentAgreesWithInducing)
{
    const IntermittentMap lsv(0.5);
    const auto n = range(2, 40, 2);
    const auto t = recurrence_tail_estimate(lsv, n, 40000, 200, 4);
    const auto s = build_inducing(lsv, 500);
    for (std::size_t i = 0; i < n.size(); ++i) {
        EXPECT_NEAR(t.value[i], s.tail(static_cast<std::uint32_t>(n[i])),
                    4 * t.stderr[i] + 4.0 / 40000) << n[i];
        if (i > 0) {
            EXPECT_LE(t.value[i], t.value[i - 1]);
        }
    }
    const auto fit = fit_rate(n, t.value, RateClass::polynomial);
    EXPECT_GT(fit.alpha, 0.0);
    EXPECT_GT(t.censored, 0u);
    EXPECT_THROW(recurrence_tail_estimate(lsv, n, 10, 10, 4), ParameterError);
}

TEST(FitRate, ExactFamilies)
{
    const auto n = range(2, 200);
    const auto p = fit_rate(n, eval(n, [](double x) { return std::pow(x, -3.0); }));
    EXPECT_EQ(p.cls, RateClass::polynomial);
    EXPECT_NEAR(p.alpha, 3.0, 1e-6);

    const auto e = fit_rate(n, eval(n, [](double x) { return std::exp(-0.5 * x); }));
    EXPECT_EQ(e.cls, RateClass::exponential);
    EXPECT_NEAR(e.tau, 0.5, 1e-6);
    EXPECT_EQ(e.theta_prime, 0.5);

    const auto s = fit_rate(n, eval(n, [](double x) { return std::exp(-std::sqrt(x)); }));
    EXPECT_EQ(s.cls, RateClass::stretched);
    EXPECT_NEAR(s.theta, 0.5, kStretchedGridStep);
    EXPECT_DOUBLE_EQ(s.theta_prime, s.theta / (s.theta + 1));
    for (const auto& f : {p, e, s}) {
        EXPECT_GE(f.r_squared, 0.0);
        EXPECT_LE(f.r_squared, 1.0);
        EXPECT_TRUE(f.warnings.empty());
    }
}

TEST(FitRate, HintRangeAndTrimming)
{
    const auto n = range(1, 100);
    auto y = eval(n, [](double x) { return 2.0 * std::pow(x, -1.5); });
    y[50] = 0.0;
    y[60] = -1.0;
    const auto f = fit_rate(n, y, RateClass::polynomial, 10, 80);
    EXPECT_NEAR(f.alpha, 1.5, 1e-9);
    EXPECT_NEAR(std::exp(f.log_c), 2.0, 1e-9);
    EXPECT_EQ(f.n_lo, 10u);
    EXPECT_EQ(f.n_hi, 80u);
    EXPECT_EQ(f.points, 69u);
    ASSERT_EQ(f.warnings.size(), 1u);
    EXPECT_THROW(fit_rate(n, std::vector<double>(100, 0.0)), ParameterError);
    EXPECT_THROW(fit_rate(n, std::vector<double>(3, 1.0)), ParameterError);
    EXPECT_EQ(parse_rate_class(to_string(RateClass::stretched)), RateClass::stretched);
    EXPECT_THROW(parse_rate_class("linear"), ParameterError);
}

TEST(BoundCheck, Examples)
{
    const auto n = range(1, 50);
    const auto env = eval(n, [](double x) { return envelope(RateClass::exponential, 0.2, 1.0, x); });
    const auto same = bound_check(n, env, RateClass::exponential, 0.2);
    EXPECT_NEAR(same.fitted_c, 1.0, 1e-12);
    EXPECT_EQ(same.violations, 0u);
    const auto zero = bound_check(n, std::vector<double>(n.size(), 0.0), RateClass::polynomial, 2.0);
    EXPECT_EQ(zero.fitted_c, 0.0);
    EXPECT_EQ(zero.violations, 0u);
    const auto half = eval(n, [](double x) { return 0.5 * std::exp(-0.3 * std::sqrt(x)); });
    const auto b = bound_check(n, half, RateClass::stretched, 0.3, 0.5);
    EXPECT_NEAR(b.fitted_c, 0.5, 1e-12);
}

TEST(BoundCheck, GeometricTowerMaximalDeviation)
{
    const auto spec = std::make_shared<const ReturnTimeSpec>(geometric_spec(40));
    DeviationOptions o;
    o.epsilon = 0.15;
    o.mean = level_masses(*spec).level_mass[0];
    o.n = range(5, 60, 5);
    o.j_max = 300;
    o.members = 5000;
    const auto d = deviation_series(srb_tower_orbits(spec, level_indicator(0), 7), o);
    std::vector<std::uint64_t> n;
    std::vector<double> y;
    for (std::size_t i = 0; i < d.n.size(); ++i)
        if (d.mld_count[i] >= 25) {
            n.push_back(d.n[i]);
            y.push_back(d.mld[i]);
        }
    ASSERT_GE(n.size(), 3u);
    const auto f = fit_rate(n, y, RateClass::exponential);
    const auto b = bound_check(n, y, RateClass::exponential, f.tau);
    EXPECT_TRUE(std::isfinite(b.fitted_c));
    EXPECT_GT(b.fitted_c, 0.0);
    EXPECT_EQ(b.violations, 0u);
}
