#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "towerlab/io.hpp"
#include "towerlab/measures.hpp"
#include "towerlab/mn_decomposition.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats/birkhoff.hpp"
#include "towerlab/stats/deviations.hpp"
#include "towerlab/stats/fit.hpp"
#include "towerlab/stats/tails.hpp"
#include "towerlab/systems.hpp"
#include "towerlab/transfer.hpp"

namespace towerlab {

struct CriterionRow {
    std::string id;
    std::string name;
    double measured = 0.0;
    std::string relation; ///< "<=" or ">="
    double tolerance = 0.0;
    bool pass = false;
    double seconds = 0.0;     ///< wall time of the criterion group
    double time_limit = 0.0;  ///< group budget in seconds (full level)
    std::string detail;
};

struct AcceptanceOptions {
    bool full = true;
    bool tamper_kac = false;
    unsigned threads = 0;
    std::uint64_t seed = 20240611;
    std::filesystem::path out = "acceptance_run";
};

struct AcceptanceReport {
    std::string level;
    std::vector<CriterionRow> rows;

    bool all_pass() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const CriterionRow& r) { return r.pass; });
    }

    nlohmann::ordered_json json() const
    {
        nlohmann::ordered_json j;
        j["level"] = level;
        j["all_pass"] = all_pass();
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            nlohmann::ordered_json e;
            e["criterion"] = r.id;
            e["name"] = r.name;
            e["measured"] = r.measured;
            e["relation"] = r.relation;
            e["tolerance"] = r.tolerance;
            e["verdict"] = r.pass ? "PASS" : "FAIL";
            e["seconds"] = r.seconds;
            e["time_limit"] = r.time_limit;
            e["detail"] = r.detail;
            arr.push_back(e);
        }
        j["criteria"] = arr;
        return j;
    }
};

/// One machine-readable line per criterion row.
inline std::string format_row(const CriterionRow& r)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-4s %-4s measured=%-24s %s %-8.6g time=%.2fs/%.0fs  ",
                  r.pass ? "PASS" : "FAIL", r.id.c_str(), format_real(r.measured).c_str(),
                  r.relation.c_str(), r.tolerance, r.seconds, r.time_limit);
    return std::string(buf) + r.name + (r.detail.empty() ? "" : "  [" + r.detail + "]");
}

namespace acceptance_detail {

using Clock = std::chrono::steady_clock;

inline double since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Suite {
    const AcceptanceOptions& opt;
    ArtifactWriter writer;
    std::vector<CriterionRow> rows;
    /// Every deviation series computed by the suite, for the ordering check.
    std::vector<std::pair<std::string, DeviationSeries>> deviation_log;

    explicit Suite(const AcceptanceOptions& o) : opt(o), writer(o.out) {}

    std::uint64_t seed(std::uint64_t k) const { return rng::mix(opt.seed, k); }

    void add(std::string id, std::string name, double measured, std::string rel, double tol,
             std::string detail = {})
    {
        const bool ok = rel == "<=" ? measured <= tol : measured >= tol;
        CriterionRow r{std::move(id), std::move(name), measured, std::move(rel), tol, ok, 0.0, 0.0,
                       std::move(detail)};
        rows.push_back(std::move(r));
    }

    /// Stamp the group time on rows [first, end) and fail them if over budget.
    void close_group(std::size_t first, Clock::time_point t0, double limit)
    {
        const double s = since(t0);
        for (std::size_t i = first; i < rows.size(); ++i) {
            rows[i].seconds = s;
            rows[i].time_limit = limit;
            if (opt.full && s > limit) {
                rows[i].pass = false;
                rows[i].detail += (rows[i].detail.empty() ? "" : "; ") + std::string("over time budget");
            }
        }
    }
};

inline std::string fmt(double x) { return format_real(x); }

// ---------------------------------------------------------------------------
// 1. Structural exactness.

/// ∫φ·(ψ∘T̄) dν̄ for cylinder indicators by enumerating depth-(d+1) words.
inline double pullback_oracle(const ReturnTimeSpec& spec, double kac, const TowerObservable& phi,
                              const TowerObservable& psi, std::uint32_t d)
{
    const auto B = spec.size();
    std::vector<std::size_t> w(d + 1, 0);
    CompensatedSum total;
    while (true) {
        std::vector<Symbol> word;
        double mass = kac;
        for (auto pos : w) {
            word.push_back(spec.branches()[pos].index);
            mass *= spec.branches()[pos].p;
        }
        const auto R = spec.branches()[w[0]].return_time;
        for (std::uint32_t l = 0; l < R; ++l) {
            const auto x = TowerPoint::from_symbols(word, spec.branches()[0].index, {}, l);
            const double a = phi(x);
            if (a != 0.0)
                total.add(mass * a * psi(tower_step(spec, x)));
        }
        std::size_t k = 0;
        while (k < w.size() && ++w[k] == B)
            w[k++] = 0;
        if (k == w.size())
            break;
    }
    return total.value();
}

inline void criterion_structural(Suite& s)
{
    const auto t0 = Clock::now();
    const auto first = s.rows.size();

    // Duality on 50 random cylinder pairs of depth <= 4.
    {
        const ReturnTimeSpec spec({{1, 0.4, 1}, {2, 0.35, 2}, {3, 0.25, 4}}, 0.5, 0.5);
        const std::uint32_t D = 4;
        const auto op = build_operator(spec, D);
        const auto rs = s.seed(101);
        auto random_cylinder = [&](std::uint64_t k) {
            const auto len = 1 + rng::mix(rs, 3 * k) % D;
            std::vector<Symbol> word;
            for (std::uint64_t j = 0; j < len; ++j)
                word.push_back(spec.branches()[rng::mix(rs, 1000 * k + j) % spec.size()].index);
            const auto level =
                static_cast<std::uint32_t>(rng::mix(rs, 3 * k + 1) % spec.return_time(word[0]));
            return cylinder_indicator(level, word, spec.beta_u());
        };
        double worst = 0.0;
        for (std::uint64_t t = 0; t < 50; ++t) {
            const auto phi = random_cylinder(2 * t), psi = random_cylinder(2 * t + 1);
            const auto vphi = op.basis().sample(phi), vpsi = op.basis().sample(psi);
            const double lhs = op.basis().integrate(op.apply(vphi).cwiseProduct(vpsi));
            const double rhs = pullback_oracle(spec, op.basis().kac_norm(), phi, psi, D);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
        s.add("1a", "transfer duality |int(L phi) psi - int phi (psi o T)|", worst, "<=", 1e-10,
              "50 cylinder pairs, depth <= 4");
    }

    // Kac normalization.
    {
        const std::vector<std::pair<std::string, ReturnTimeSpec>> specs{
            {"geometric", geometric_spec(30)},
            {"alpha2", polynomial_spec(2.0, 1000)},
            {"alpha3", polynomial_spec(3.0, 1000)},
            {"uniform", uniform_spec(3, 2)},
            {"three_branch", ReturnTimeSpec({{1, 0.4, 1}, {2, 0.35, 2}, {3, 0.25, 4}}, 0.5, 0.5)}};
        double worst = 0.0;
        for (const auto& [name, spec] : specs) {
            const double c = level_masses(spec).kac_norm;
            const auto m = level_masses(spec, s.opt.tamper_kac ? 1.01 * c : 0.0);
            worst = std::max(worst, std::abs(compensated_sum(m.level_mass) - 1.0));
        }
        s.add("1b", "Kac normalization |sum m_l - 1|", worst, "<=", 1e-12,
              s.opt.tamper_kac ? "tampered Kac constant" : "5 towers");
    }

    // Quotient semiconjugacy, symbol-exact.
    {
        const auto spec = geometric_spec(30);
        std::uint64_t bad = 0;
        for (std::uint64_t i = 0; i < 10000; ++i) {
            const auto p = srb_point(spec, s.seed(102), i);
            const auto a = quotient_project(tower_step(spec, p));
            const auto b = quotient_step(spec, quotient_project(p));
            if (!same_point(a, b, 64))
                ++bad;
        }
        s.add("1c", "quotient semiconjugacy mismatches", double(bad), "<=", 0.0, "10^4 points");
    }

    // Ambient semiconjugacy for the intermittent realization.
    {
        const IntermittentRealization real(IntermittentMap(0.5), 200);
        double worst = 0.0;
        for (std::uint64_t i = 0; i < 10000; ++i) {
            const auto p = srb_point(real.spec(), s.seed(103), i);
            worst = std::max(worst, std::abs(real.project(tower_step(real.spec(), p)).x -
                                             real.step(real.project(p)).x));
        }
        s.add("1d", "ambient semiconjugacy |pi o T - f o pi|", worst, "<=", 1e-9,
              "intermittent gamma=0.5, 10^4 points");
    }
    s.close_group(first, t0, 10.0);
}

// ---------------------------------------------------------------------------
// 2-3. Discretisation.

struct NamedObservable {
    std::string name;
    TowerObservable phi;
};

inline std::vector<NamedObservable> discretisation_observables(const ReturnTimeSpec& spec,
                                                               std::uint64_t seed)
{
    const double b = spec.beta_u();
    return {{"inverse_first_symbol", inverse_first_symbol(b)},
            {"itinerary", itinerary_series(spec, b, 32)},
            {"distance", distance_to(srb_point(spec, seed, 0).without_past(), b, 200)}};
}

/// Point sharing the level and the first `shared` future symbols of y.
inline TowerPoint partner(const ReturnTimeSpec& spec, const TowerPoint& y, std::uint64_t shared,
                          std::uint64_t stream)
{
    std::vector<Symbol> head;
    for (std::uint64_t k = 0; k < shared; ++k)
        head.push_back(y.future(k));
    return TowerPoint::with_random_tail(spec, stream, head, {}, 0, shared ? y.level() : 0);
}

inline void criterion_ita(Suite& s)
{
    const auto t0 = Clock::now();
    const auto first = s.rows.size();
    const std::uint64_t pairs = 10000;
    std::uint64_t violations = 0, checked = 0;
    double worst_ratio = 0.0;
    const std::vector<std::pair<std::string, ReturnTimeSpec>> towers{
        {"geometric", geometric_spec(30)}, {"alpha3", polynomial_spec(3.0, 200)}};
    for (std::size_t t = 0; t < towers.size(); ++t) {
        const auto& spec = towers[t].second;
        for (const auto& obs : discretisation_observables(spec, s.seed(200 + t))) {
            const double semi = obs.phi.norms().beta_seminorm, beta = obs.phi.norms().beta;
            for (std::uint64_t k = 1; k <= 3; ++k) {
                const auto phik = discretize(obs.phi, k, spec, 4, s.seed(210 + t));
                const auto ps = s.seed(220 + 10 * t + k);
                for (std::uint64_t i = 0; i < pairs; ++i) {
                    const auto shared = rng::mix(ps, i) % 7;
                    auto y = srb_point(spec, ps, i);
                    if (shared == 0)
                        y = y.with_level(0);
                    const auto z = partner(spec, y, shared, rng::mix(ps ^ 0x5a5a, i));
                    const double d = std::abs(phik(y) - phik(z));
                    ++checked;
                    if (d == 0.0)
                        continue;
                    const auto sep = separation_time(y, z, 400);
                    if (sep.is_infinite()) {
                        ++violations;
                        continue;
                    }
                    const double r = d / std::pow(beta, double(sep.value()));
                    worst_ratio = std::max(worst_ratio, r / semi);
                    if (r > semi)
                        ++violations;
                }
            }
        }
    }
    s.add("2", "|phi_k|_beta <= |phi|_beta violations", double(violations), "<=", 0.0,
          std::to_string(checked) + " pairs; max ratio to |phi|_beta " + fmt(worst_ratio));
    s.close_group(first, t0, 30.0);
}

inline void criterion_uniconv(Suite& s)
{
    const auto t0 = Clock::now();
    const auto first = s.rows.size();
    const double slack = 1e-12;
    const std::uint64_t points = 2000;
    std::uint64_t violations = 0, monotone_bad = 0;
    std::string trend;
    const std::vector<std::pair<std::string, ReturnTimeSpec>> towers{
        {"unit_roof", uniform_spec(3)}, {"geometric", geometric_spec(30)}};
    for (std::size_t t = 0; t < towers.size(); ++t) {
        const auto& spec = towers[t].second;
        for (const auto& obs : discretisation_observables(spec, s.seed(300 + t))) {
            std::vector<double> max_err;
            for (std::uint64_t k = 1; k <= 5; ++k) {
                const auto phik = discretize(obs.phi, k, spec, 4, s.seed(310 + t));
                double worst = 0.0;
                for (std::uint64_t i = 0; i < points; ++i) {
                    const auto p = srb_point(spec, s.seed(320 + t), i);
                    const double err = std::abs(obs.phi(p) - phik(p));
                    worst = std::max(worst, err);
                    if (err > discretize_error_bound(obs.phi, k, spec, p) + slack)
                        ++violations;
                }
                max_err.push_back(worst);
            }
            if (t == 0) {
                // Strictly decreasing while positive; zero stays zero.
                for (std::size_t k = 1; k < max_err.size(); ++k)
                    if (max_err[k - 1] > 0.0 ? !(max_err[k] < max_err[k - 1]) : max_err[k] != 0.0)
                        ++monotone_bad;
                trend += (trend.empty() ? "" : "; ") + obs.name + " " + fmt(max_err.front()) +
                         " -> " + fmt(max_err.back());
            }
        }
    }
    s.add("3a", "|phi - phi_k| above beta^b_2k bound + slack", double(violations), "<=", 0.0,
          "slack 1e-12, k = 1..5, 2 towers x 3 observables");
    s.add("3b", "max error not strictly decreasing in k while positive (unit-roof tower)", double(monotone_bad), "<=", 0.0,
          trend);
    s.close_group(first, t0, 30.0);
}

// ---------------------------------------------------------------------------
// 4. Coboundary decomposition.

inline void criterion_mn(Suite& s)
{
    const auto t0 = Clock::now();
    const auto first = s.rows.size();
    const auto real = std::make_shared<const SolenoidRealization>(Solenoid({3, 0.0, 0.5, 0.0, 0.5}));
    const auto& spec = real->spec();
    const AmbientObservable phi(
        "cos_sqrt",
        [](const AmbientPoint& a) {
            return std::cos(2 * std::numbers::pi * a.x) + std::sqrt(std::abs(a.z - 0.25));
        },
        {0.5, 0.0, 2.0, 0.5, 2 * std::numbers::pi + 1});
    const auto d = mn_decompose(phi, real);

    double worst = 0.0;
    for (std::uint64_t i = 0; i < 1000; ++i)
        worst = std::max(worst, mn_identity_residual(d, spec, srb_point(spec, s.seed(400), i)));
    s.add("4a", "MN identity residual", worst, "<=", 1e-8,
          "j_max " + std::to_string(d.j_max) + ", declared bound " + fmt(d.residual_bound));

    double var = 0.0;
    for (std::uint64_t leaf = 0; leaf < 10; ++leaf) {
        const auto base = srb_point(spec, s.seed(401), leaf);
        std::vector<Symbol> fut;
        for (std::uint64_t k = 0; k < 80; ++k)
            fut.push_back(base.future(k));
        std::vector<double> v;
        for (std::uint64_t i = 0; i < 100; ++i) {
            const auto q = TowerPoint::with_random_tail(spec, rng::mix(s.seed(402), 100 * leaf + i),
                                                        {}, {}, 0, 0);
            std::vector<Symbol> past;
            for (std::uint64_t k = 0; k < 80; ++k)
                past.push_back(q.future(k));
            v.push_back(d.psi(TowerPoint::from_symbols(fut, 1, past, base.level())));
        }
        const double sd = sample_stddev(v);
        var = std::max(var, sd * sd);
    }
    s.add("4b", "stable-leaf variance of psi", var, "<=", 1e-12, "10 leaves x 100 pasts");

    // n·(|S_n phi/n - S_n psi/n| - residual_bound) / (2‖χ‖_∞) <= 1.
    double ratio = 0.0;
    for (std::uint64_t i = 0; i < 50; ++i) {
        TowerPoint p = srb_point(spec, s.seed(403), i);
        CompensatedSum a, b;
        for (std::uint64_t n = 1; n <= 200; ++n) {
            a.add(d.phi_lift(p));
            b.add(d.psi(p));
            const double gap = std::abs(a.value() - b.value()) / double(n);
            ratio = std::max(ratio, double(n) * std::max(0.0, gap - d.residual_bound) /
                                        (2 * d.chi_sup_bound));
            p.advance(spec);
        }
    }
    s.add("4c", "n |S_n phi/n - S_n psi/n| / 2|chi|_inf", ratio, "<=", 1.0,
          "50 orbits, n <= 200, |chi|_inf <= " + fmt(d.chi_sup_bound) + " (truncation residual removed)");
    s.close_group(first, t0, 60.0);
}

// ---------------------------------------------------------------------------
// 5-6. Rate recovery.

inline void criterion_tails(Suite& s)
{
    const auto t0 = Clock::now();
    const auto first = s.rows.size();
    for (double alpha : {2.0, 3.0}) {
        const auto spec = polynomial_spec(alpha, 4000);
        std::vector<std::uint64_t> n;
        for (std::uint64_t k = 100; k <= 2000; k += 10)
            n.push_back(k);
        const auto t = recurrence_tail_estimate(spec, n);
        s.writer.series("tails_alpha" + std::to_string(int(alpha)) + ".csv",
                        Series{t.n, t.value, t.stderr});
        const auto f = fit_rate(t.n, t.value, RateClass::polynomial);
        s.add(alpha == 2.0 ? "5a" : "5b", "tail exponent |alpha_fit - " + fmt(alpha) + "|",
              std::abs(f.alpha - alpha), "<=", 0.05,
              "alpha_fit " + fmt(f.alpha) + " on n in [100, 2000], R^2 " + fmt(f.r_squared));
    }
    {
        const auto spec = geometric_spec(60);
        std::vector<std::uint64_t> n;
        for (std::uint64_t k = 1; k <= 50; ++k)
            n.push_back(k);
        const auto t = recurrence_tail_estimate(spec, n);
        s.writer.series("tails_geometric.csv", Series{t.n, t.value, t.stderr});
        const auto f = fit_rate(t.n, t.value, RateClass::exponential);
        s.add("5c", "geometric tail rate |tau_fit/ln2 - 1|", std::abs(f.tau / std::numbers::ln2 - 1),
              "<=", 0.05, "tau_fit " + fmt(f.tau));
    }
    s.close_group(first, t0, 5.0);
}

inline void criterion_correlations(Suite& s)
{
    const auto t0 = Clock::now();
    const auto first = s.rows.size();
    {
        const auto spec = geometric_spec(40);
        const auto op = build_operator(spec, 2);
        const auto phi = op.basis().sample(cylinder_indicator(0, {1, 2}, spec.beta_u()));
        const auto D = l1_decay(op, phi, 40);
        const auto C = corr_exact(op, phi, phi, 40);
        s.writer.write("decay_geometric.csv", decay_csv(D, C));
        std::vector<std::uint64_t> n;
        std::vector<double> y;
        for (std::uint64_t k = 5; k <= 40; ++k) {
            n.push_back(k);
            y.push_back(D[k]);
        }
        const auto f = fit_rate(n, y, RateClass::exponential);
        s.add("6a", "geometric centered L1 decay, exponential R^2", f.r_squared, ">=", 0.99,
              "tau " + fmt(f.tau) + " on n in [5, 40]");
    }
    {
        const std::uint32_t r_max = 400;
        const auto spec = polynomial_spec(3.0, r_max);
        const auto op = build_operator(spec, 1);
        const auto phi = op.basis().sample(level_indicator(0, spec.beta_u()));
        const auto D = l1_decay(op, phi, r_max / 2);
        const auto C = corr_exact(op, phi, phi, r_max / 2);
        s.writer.write("decay_alpha3.csv", decay_csv(D, C));
        std::vector<std::uint64_t> n;
        std::vector<double> y;
        for (std::uint64_t k = 10; k <= r_max / 2; ++k) {
            n.push_back(k);
            y.push_back(D[k]);
        }
        const auto f = fit_rate(n, y, RateClass::polynomial);
        s.add("6b", "alpha=3 centered L1 decay exponent", f.alpha, ">=", 1.7,
              "R^2 " + fmt(f.r_squared) + " on n in [10, " + std::to_string(r_max / 2) + "]");
    }
    s.close_group(first, t0, 120.0);
}

// ---------------------------------------------------------------------------
// 7-8. ld/mld machinery.

/// ld(n) by enumerating every orbit path with its exact mass.
inline double ld_enumeration(const ReturnTimeSpec& spec,
                             const std::function<double(std::uint32_t, Symbol)>& phi, double eps,
                             std::uint64_t n)
{
    const double c = 1.0 / spec.mean_return_time();
    CompensatedSum mean_acc;
    for (const auto& b : spec.branches())
        for (std::uint32_t l = 0; l < b.return_time; ++l)
            mean_acc.add(c * b.p * phi(l, b.index));
    const double mean = mean_acc.value();
    CompensatedSum out;
    std::function<void(std::uint32_t, Symbol, double, double, std::uint64_t)> walk =
        [&](std::uint32_t l, Symbol a, double sum, double mass, std::uint64_t k) {
            sum += phi(l, a);
            if (k + 1 == n) {
                if (std::abs(sum / double(n) - mean) > eps)
                    out.add(mass);
                return;
            }
            if (l + 1 < spec.return_time(a))
                walk(l + 1, a, sum, mass, k + 1);
            else
                for (const auto& b : spec.branches())
                    walk(0, b.index, sum, mass * b.p, k + 1);
        };
    for (const auto& b : spec.branches())
        for (std::uint32_t l = 0; l < b.return_time; ++l)
            walk(l, b.index, 0.0, c * b.p, 0);
    return out.value();
}

inline void criterion_mld_machinery(Suite& s)
{
    const auto t0 = Clock::now();
    const auto first = s.rows.size();
    {
        const auto spec = std::make_shared<const ReturnTimeSpec>(geometric_spec(30));
        DeviationOptions o;
        o.epsilon = 0.1;
        o.mean = level_masses(*spec).level_mass[0];
        for (std::uint64_t k = 5; k <= 100; k += 5)
            o.n.push_back(k);
        o.j_max = 400;
        o.members = s.opt.full ? 20000 : 5000;
        o.threads = s.opt.threads;
        o.seed = s.seed(700);
        const auto d = deviation_series(srb_tower_orbits(spec, level_indicator(0), s.seed(701)), o);
        s.writer.series("ld_geometric.csv", Series{d.n, d.ld, d.ld_stderr});
        s.writer.series("mld_geometric_union.csv", Series{d.n, d.mld, d.mld_stderr});
        s.deviation_log.emplace_back("union", d);
        double excess = 0.0;
        for (std::size_t i = 0; i < d.n.size(); ++i)
            excess = std::max(excess, (d.mld[i] - d.ld_tail_sum(d.n[i])) /
                                          std::max(d.mld_stderr[i], 1e-300));
        s.add("7b", "union bound: max (mld - sum_{j>=n} ld) / stderr", excess, "<=", 2.0,
              std::to_string(o.members) + " members, j_max 400");
    }
    {
        const ReturnTimeSpec spec({{1, 0.6, 1}, {2, 0.4, 3}}, 0.5, 0.5);
        const auto phi = [](std::uint32_t l, Symbol a) { return a == 1 ? 1.0 : (l == 0 ? -0.5 : 0.25 * l); };
        double worst = 0.0;
        for (std::uint64_t n = 1; n <= 12; ++n)
            for (double eps : {0.05, 0.15, 0.3})
                worst = std::max(worst, std::abs(ld_exact(spec, phi, eps, n) -
                                                 ld_enumeration(spec, phi, eps, n)));
        s.add("7c", "exact ld vs cylinder enumeration, n <= 12", worst, "<=", 1e-12,
              "2-branch model, 3 values of epsilon");
    }
    s.close_group(first, t0, 180.0);
}

inline void criterion_mld_shape(Suite& s)
{
    const auto t0 = Clock::now();
    const auto first = s.rows.size();
    const auto spec = std::make_shared<const ReturnTimeSpec>(geometric_spec(40));
    DeviationOptions o;
    o.epsilon = 0.15;
    o.mean = level_masses(*spec).level_mass[0];
    for (std::uint64_t k = 5; k <= 300; k += 5)
        o.n.push_back(k);
    o.j_max = 600;
    o.members = s.opt.full ? 100000 : 20000;
    o.threads = s.opt.threads;
    o.seed = s.seed(800);
    const auto d = deviation_series(srb_tower_orbits(spec, level_indicator(0), s.seed(801)), o);
    s.writer.series("mld_geometric.csv", Series{d.n, d.mld, d.mld_stderr});
    s.deviation_log.emplace_back("shape", d);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < d.n.size(); ++i)
        if (d.mld_count[i] >= 25 && d.mld[i] < 0.9) {
            x.push_back(std::sqrt(double(d.n[i])));
            y.push_back(-std::log(d.mld[i]));
        }
    double r2 = 0.0;
    std::string detail;
    if (d.unstable) {
        detail = "sup not saturated at j_max";
    } else if (x.size() >= 3) {
        const auto f = least_squares(x, y);
        r2 = f.r_squared;
        detail = std::to_string(x.size()) + " stable points, n <= " +
                 std::to_string(static_cast<std::uint64_t>(x.back() * x.back() + 0.5)) +
                 ", slope " + fmt(f.slope) + ", theta' = 1/2";
    } else {
        detail = "fewer than 3 stable points";
    }
    s.add("8", "-log mld vs n^(1/2) regression R^2 (shape check)", r2, ">=", 0.95,
          detail + ", ensemble " + std::to_string(o.members));
    s.close_group(first, t0, 300.0);
}

// ---------------------------------------------------------------------------
// 9. Expansion-time chain on the solenoid.

inline void criterion_expansion_chain(Suite& s)
{
    const auto t0 = Clock::now();
    const auto first = s.rows.size();
    const Solenoid sol({2, 0.9, 0.3, 0.05, 0.5});
    const auto phi = cu_derivative_observable(sol, 1);
    const auto step = [sol](const AmbientPoint& a) { return sol.step(a); };
    const auto control = long_orbit_mean(step, phi, lebesgue_leaf(s.seed(900))(0),
                                         s.opt.full ? 10'000'000 : 1'000'000);
    const double lambda = control.mean;
    const double eps = -lambda / 5;
    const std::uint64_t n_max = 200, J = 400;
    const std::uint64_t members = s.opt.full ? 10000 : 2000;

    // Orbit-level inclusions {E > n} ⊂ {N_eps > n} ⊂ {sup_{j>=n} |S_j/j - λ| > eps}.
    {
        const auto orbits = ambient_orbits(step, phi, lebesgue_leaf(s.seed(901)));
        std::vector<double> v(J), dev(J), tail_sup(J + 1);
        std::uint64_t bad = 0, nontrivial = 0;
        for (std::uint64_t m = 0; m < members; ++m) {
            orbits(m, v);
            running_deviation(v, lambda, dev);
            tail_sup[J] = 0.0;
            for (std::uint64_t j = J; j >= 1; --j)
                tail_sup[j - 1] = std::max(tail_sup[j], dev[j - 1]);
            const auto E = expansion_time(v, lambda);
            const auto N = last_exceedance(dev, eps) + 1;
            for (std::uint64_t n = 1; n <= n_max; ++n) {
                if (E > n && !(N > n))
                    ++bad;
                if (N > n && !(tail_sup[n - 1] > eps))
                    ++bad;
            }
            nontrivial += N > 1;
        }
        s.add("9a", "orbit inclusions {E>n} in {N_eps>n} in {sup S_j > eps}: violations", double(bad),
              "<=", 0.0,
              std::to_string(members) + " orbits, n <= 200, lambda " + fmt(lambda) + " +- " +
                  fmt(control.stderr) + ", " + std::to_string(nontrivial) + " orbits with N_eps > 1");
    }

    // c·Leb{E > n} <= mld_mu(phi, eps, n) over the stable range.
    {
        std::vector<std::uint64_t> n;
        for (std::uint64_t k = 1; k <= n_max; ++k)
            n.push_back(k);
        ExpansionTimeOptions eo;
        eo.lambda = lambda;
        eo.n = n;
        eo.margin = J - n_max;
        eo.members = members;
        eo.threads = s.opt.threads;
        eo.seed = s.seed(902);
        const auto et = expansion_time_tail(ambient_orbits(step, phi, lebesgue_leaf(s.seed(903))), eo);
        s.writer.series("etime_solenoid.csv", Series{et.n, et.value, et.stderr});

        DeviationOptions o;
        o.epsilon = eps;
        o.mean = lambda;
        o.n = n;
        o.j_max = J;
        o.members = members;
        o.threads = s.opt.threads;
        o.seed = s.seed(904);
        const auto d = deviation_series(ambient_orbits(step, phi, lebesgue_leaf(s.seed(905)), 1000), o);
        s.writer.series("mld_solenoid.csv", Series{d.n, d.mld, d.mld_stderr});
        s.deviation_log.emplace_back("solenoid", d);

        const double c = density_floor_check(uniform_spec(2));
        std::uint64_t bad = 0, stable = 0, leb_positive = 0;
        for (std::size_t i = 0; i < n.size(); ++i) {
            if (d.unstable || d.mld_count[i] < 25)
                continue;
            ++stable;
            leb_positive += et.value[i] > 0.0;
            if (c * et.value[i] > d.mld[i])
                ++bad;
        }
        s.add("9b", "c Leb{E>n} <= mld(phi, eps, n): violations", double(bad), "<=", 0.0,
              "c = " + fmt(c) + ", " + std::to_string(stable) + " stable n, Leb{E>n} > 0 at " +
                  std::to_string(leb_positive) + " of them, censored " + std::to_string(et.censored) +
                  (d.unstable ? ", mld unstable" : ""));
    }
    s.close_group(first, t0, 300.0);
}

inline void criterion_ordering(Suite& s)
{
    std::uint64_t bad = 0, points = 0;
    for (const auto& [name, d] : s.deviation_log) {
        for (std::size_t i = 0; i < d.n.size(); ++i) {
            ++points;
            if (d.ld[i] > d.mld[i] || d.ld[i] < 0.0 || d.mld[i] > 1.0)
                ++bad;
            if (i > 0 && d.mld[i] > d.mld[i - 1])
                ++bad;
        }
    }
    s.add("7a", "ld <= mld and mld nonincreasing: violations", double(bad), "<=", 0.0,
          std::to_string(points) + " grid points over " + std::to_string(s.deviation_log.size()) +
              " experiments");
}

} // namespace acceptance_detail

/// Criteria 1-9. Artifacts are written under opt.out.
inline AcceptanceReport run_acceptance(const AcceptanceOptions& opt,
                                       const std::function<void(const CriterionRow&)>& on_row = {})
{
    using namespace acceptance_detail;
    Suite s(opt);
    criterion_structural(s);
    criterion_ita(s);
    criterion_uniconv(s);
    criterion_mn(s);
    criterion_tails(s);
    criterion_correlations(s);
    const auto t7 = Clock::now();
    criterion_mld_machinery(s);
    criterion_mld_shape(s);
    criterion_expansion_chain(s);
    const auto first7 = s.rows.size();
    criterion_ordering(s);
    s.rows[first7].seconds = since(t7);
    s.rows[first7].time_limit = 180.0;

    // Present rows in criterion order.
    std::stable_sort(s.rows.begin(), s.rows.end(), [](const CriterionRow& a, const CriterionRow& b) {
        const int na = std::stoi(a.id), nb = std::stoi(b.id);
        return na != nb ? na < nb : a.id < b.id;
    });
    if (on_row)
        for (const auto& r : s.rows)
            on_row(r);
    AcceptanceReport rep;
    rep.level = opt.full ? "full" : "quick";
    rep.rows = std::move(s.rows);
    return rep;
}

/// Names of regular files in a directory, sorted.
inline std::vector<std::string> csv_files(const std::filesystem::path& dir)
{
    std::vector<std::string> out;
    if (!std::filesystem::exists(dir))
        return out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv")
            out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string file_bytes(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Full verification: criteria 1-9 with one worker count, a second run with
/// another, and criterion 10 comparing every CSV artifact byte for byte.
inline AcceptanceReport run_verify(AcceptanceOptions opt,
                                   const std::function<void(const CriterionRow&)>& on_row = {})
{
    const auto base = opt.out;
    const auto t0 = acceptance_detail::Clock::now();
    opt.out = base / "run_a";
    opt.threads = 1;
    auto rep = run_acceptance(opt, on_row);
    opt.out = base / "run_b";
    opt.threads = std::max(3u, std::thread::hardware_concurrency());
    run_acceptance(opt);

    const auto a = csv_files(base / "run_a"), b = csv_files(base / "run_b");
    std::uint64_t mismatches = a == b ? 0 : 1;
    for (const auto& f : a)
        if (std::find(b.begin(), b.end(), f) != b.end() &&
            file_bytes(base / "run_a" / f) != file_bytes(base / "run_b" / f))
            ++mismatches;
    CriterionRow r;
    r.id = "10";
    r.name = "CSV artifacts differing between 1 and " + std::to_string(opt.threads) + " workers";
    r.measured = double(mismatches);
    r.relation = "<=";
    r.tolerance = 0.0;
    r.pass = mismatches == 0 && !a.empty();
    r.seconds = acceptance_detail::since(t0);
    r.time_limit = 2 * (opt.full ? 1800.0 : 120.0);
    r.detail = std::to_string(a.size()) + " files compared";
    if (on_row)
        on_row(r);
    rep.rows.push_back(r);
    return rep;
}

} // namespace towerlab
