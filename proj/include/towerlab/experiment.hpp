#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "towerlab/config.hpp"
#include "towerlab/io.hpp"
#include "towerlab/measures.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/stats/birkhoff.hpp"
#include "towerlab/stats/correlation.hpp"
#include "towerlab/stats/deviations.hpp"
#include "towerlab/stats/fit.hpp"
#include "towerlab/stats/tails.hpp"
#include "towerlab/systems.hpp"
#include "towerlab/transfer.hpp"

namespace towerlab {

struct RunOptions {
    std::filesystem::path out;
    unsigned threads = 0;
    bool allow_unstable = false;
};

struct RunResult {
    std::vector<std::string> files;
    std::vector<std::string> flags;
    bool unstable = false;
    nlohmann::ordered_json manifest;
};

inline constexpr std::uint32_t kEmbedDepth = 40;

/// The symbolic tower of a configured system: the abstract spec, the
/// inducing-scheme export of the intermittent map, or the full-branch base of
/// the solenoid (R ≡ 1).
inline ReturnTimeSpec tower_spec(const SystemConfig& s)
{
    if (s.kind == "geometric")
        return geometric_spec(s.r_max, s.beta_u, s.beta_s);
    if (s.kind == "polynomial")
        return polynomial_spec(s.alpha, s.r_max, s.beta_u, s.beta_s);
    if (s.kind == "uniform")
        return uniform_spec(s.count, s.return_time, s.beta_s);
    if (s.kind == "single")
        return single_branch_spec(s.return_time, s.beta_u, s.beta_s);
    if (s.kind == "file") {
        std::ifstream in(s.spec_file);
        if (!in)
            throw ParameterError("cannot open spec file '" + s.spec_file + "'");
        return read_spec(in);
    }
    if (s.kind == "intermittent")
        return build_inducing(IntermittentMap(s.gamma), s.r_max).to_spec(s.beta_s);
    if (s.kind == "solenoid") {
        static_cast<void>(Solenoid(s.solenoid)); // validates the parameters
        return uniform_spec(s.solenoid.m, 1, s.solenoid.lambda_s);
    }
    throw ParameterError("unknown system '" + s.kind + "'");
}

inline std::optional<System> ambient_system(const SystemConfig& s)
{
    if (s.kind == "intermittent")
        return System(IntermittentMap(s.gamma));
    if (s.kind == "solenoid")
        return System(Solenoid(s.solenoid));
    return std::nullopt;
}

inline double polynomial_value(const std::vector<Monomial>& p, double a, double b)
{
    CompensatedSum s;
    for (const auto& m : p)
        s.add(m.coef * std::pow(a, m.p0) * std::pow(b, m.p1));
    return s.value();
}

/// Bounds for a polynomial on [0,1]^2: sup ≤ Σ|c|, Lipschitz ≤ Σ|c|(p0 + p1).
inline NormData polynomial_norms(const std::vector<Monomial>& p, double beta)
{
    double sup = 0.0, lip = 0.0;
    for (const auto& m : p) {
        sup += std::abs(m.coef);
        lip += std::abs(m.coef) * (m.p0 + m.p1);
    }
    return {beta, lip, sup, 1.0, lip};
}

inline TowerObservable make_tower_observable(const ObservableConfig& o, const ReturnTimeSpec& spec)
{
    const double beta = spec.beta_u();
    if (o.kind == "level_indicator")
        return level_indicator(o.level, beta);
    if (o.kind == "cylinder_indicator")
        return cylinder_indicator(o.level, o.word, beta);
    if (o.kind == "inverse_first_symbol")
        return inverse_first_symbol(beta);
    if (o.kind == "itinerary")
        return itinerary_series(spec, beta, o.terms);
    if (o.kind == "constant")
        return constant_observable(o.value, beta);
    if (o.kind == "polynomial") {
        auto sp = std::make_shared<const ReturnTimeSpec>(spec);
        return TowerObservable(
            "polynomial",
            [sp, poly = o.polynomial](const TowerPoint& p) {
                const auto g = geometric_embed(*sp, p, kEmbedDepth);
                return polynomial_value(poly, g.u, g.s);
            },
            polynomial_norms(o.polynomial, beta));
    }
    throw ParameterError("observable '" + o.kind + "' is not defined on a tower");
}

inline AmbientObservable make_ambient_observable(const ObservableConfig& o, const System& sys)
{
    if (o.kind == "cu_derivative")
        return cu_derivative_observable(sys, o.steps);
    if (o.kind == "polynomial")
        return AmbientObservable(
            "polynomial",
            [poly = o.polynomial](const AmbientPoint& a) { return polynomial_value(poly, a.x, a.z); },
            polynomial_norms(o.polynomial, 0.5));
    if (o.kind == "constant")
        return AmbientObservable("constant", [v = o.value](const AmbientPoint&) { return v; },
                                 {0.5, 0.0, std::abs(o.value), 1.0, 0.0});
    throw ParameterError("observable '" + o.kind + "' is not defined on an ambient system");
}

/// ∫φ dν̄ exactly where a closed form exists.
inline std::optional<double> exact_tower_mean(const ObservableConfig& o, const ReturnTimeSpec& spec)
{
    const auto m = level_masses(spec);
    if (o.kind == "level_indicator")
        return o.level < m.level_mass.size() ? m.level_mass[o.level] : 0.0;
    if (o.kind == "cylinder_indicator") {
        for (auto a : o.word)
            if (!spec.contains(a))
                return 0.0;
        return cylinder_mass(spec, m.kac_norm, o.level, o.word);
    }
    if (o.kind == "constant")
        return o.value;
    if (o.kind == "inverse_first_symbol") {
        CompensatedSum s;
        for (const auto& b : spec.branches())
            s.add(m.kac_norm * b.p * b.return_time / static_cast<double>(b.index));
        return s.value();
    }
    return std::nullopt;
}

namespace detail {

struct Context {
    const ExperimentConfig& cfg;
    const RunOptions& opt;
    ArtifactWriter writer;
    RunResult result;
    std::uint64_t seed;
    unsigned threads;
    nlohmann::ordered_json details = nlohmann::ordered_json::object();

    Context(const ExperimentConfig& c, const RunOptions& o)
        : cfg(c), opt(o), writer(o.out), seed(*c.estimator.seed), threads(resolve_threads(o.threads))
    {
    }

    void flag(const std::string& f) { result.flags.push_back(f); }
};

inline Series to_series(const std::vector<std::uint64_t>& n, const std::vector<double>& v,
                        const std::vector<double>& se)
{
    return Series{n, v, se};
}

inline void write_fit(Context& ctx, const std::string& name, const std::vector<std::uint64_t>& n,
                      const std::vector<double>& y)
{
    try {
        const auto f = fit_rate(n, y, ctx.cfg.fit.cls, ctx.cfg.fit.n_lo, ctx.cfg.fit.n_hi);
        ctx.writer.json(name, fit_json(f));
        for (const auto& w : f.warnings)
            ctx.flag("fit_warning: " + w);
    } catch (const ParameterError& e) {
        nlohmann::ordered_json j;
        j["class"] = nullptr;
        j["error"] = e.what();
        ctx.writer.json(name, j);
        ctx.flag("fit_failed");
    }
}

struct MeanInfo {
    double mean = 0.0;
    double stderr = 0.0;
    bool exact = false;
};

inline MeanInfo tower_mean(Context& ctx, const ReturnTimeSpec& spec, const TowerObservable& phi)
{
    if (ctx.cfg.estimator.mean)
        return {*ctx.cfg.estimator.mean, 0.0, true};
    if (const auto m = exact_tower_mean(ctx.cfg.observable, spec))
        return {*m, 0.0, true};
    // i.i.d. exact samples of the invariant measure.
    const auto N = ctx.cfg.estimator.control_steps;
    const auto seed = rng::tagged(ctx.seed, rng::Tag::pairs);
    const auto vals = parallel_map<double>(N, ctx.threads, [&](std::uint64_t i) {
        return phi(srb_point(spec, seed, i));
    });
    const double mean = compensated_sum(vals) / static_cast<double>(N);
    return {mean, sample_stddev(vals) / std::sqrt(static_cast<double>(N)), false};
}

inline MeanInfo ambient_mean(Context& ctx, const System& sys, const AmbientObservable& phi)
{
    if (ctx.cfg.estimator.mean)
        return {*ctx.cfg.estimator.mean, 0.0, true};
    const auto start = lebesgue_leaf(rng::tagged(ctx.seed, rng::Tag::pairs))(0);
    const auto e = long_orbit_mean([&sys](const AmbientPoint& a) { return ambient_step(sys, a); },
                                   phi, start, ctx.cfg.estimator.control_steps);
    return {e.mean, e.stderr, false};
}

inline void record_mean(Context& ctx, const MeanInfo& m)
{
    ctx.details["mean"] = m.mean;
    ctx.details["mean_stderr"] = m.stderr;
    ctx.details["mean_exact"] = m.exact;
    if (!m.exact)
        ctx.flag("mean_estimated");
}

/// Orbit source and centering for ld/mld: exact invariant samples on abstract
/// towers, Lebesgue starts with burn-in on ambient systems.
inline std::pair<OrbitFiller, MeanInfo> deviation_orbits(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    if (const auto sys = ambient_system(cfg.system)) {
        const auto phi = make_ambient_observable(cfg.observable, *sys);
        const auto mean = ambient_mean(ctx, *sys, phi);
        const System s = *sys;
        auto orbits = ambient_orbits([s](const AmbientPoint& a) { return ambient_step(s, a); }, phi,
                                     lebesgue_leaf(ctx.seed), cfg.estimator.burn_in);
        ctx.details["ensemble"] = "lebesgue_with_burn_in";
        ctx.details["burn_in"] = cfg.estimator.burn_in;
        return {orbits, mean};
    }
    const auto spec = std::make_shared<const ReturnTimeSpec>(tower_spec(cfg.system));
    const auto phi = make_tower_observable(cfg.observable, *spec);
    const auto mean = tower_mean(ctx, *spec, phi);
    ctx.details["ensemble"] = "invariant_measure";
    return {srb_tower_orbits(spec, phi, ctx.seed), mean};
}

inline DeviationSeries deviations(Context& ctx)
{
    const auto& e = ctx.cfg.estimator;
    auto [orbits, mean] = deviation_orbits(ctx);
    record_mean(ctx, mean);
    DeviationOptions o;
    o.epsilon = e.epsilon;
    o.mean = mean.mean;
    o.n = e.n;
    o.j_max = e.j_max ? e.j_max : e.n.back();
    o.members = e.members;
    o.threads = ctx.threads;
    o.seed = ctx.seed;
    return deviation_series(orbits, o);
}

inline void run_tower(Context& ctx)
{
    const auto spec = tower_spec(ctx.cfg.system);
    const auto m = level_masses(spec);
    Series levels;
    for (std::size_t l = 0; l < m.level_mass.size(); ++l) {
        levels.n.push_back(l);
        levels.value.push_back(m.level_mass[l]);
        levels.stderr.push_back(0.0);
    }
    ctx.writer.series("levels.csv", levels);
    Series t;
    for (auto k : ctx.cfg.estimator.n) {
        t.n.push_back(k);
        t.value.push_back(tail(spec, k));
        t.stderr.push_back(0.0);
    }
    ctx.writer.series("tail.csv", t);
    ctx.writer.write("spec.txt", to_text(spec));
    ctx.details["kac_norm"] = m.kac_norm;
    ctx.details["mean_return_time"] = spec.mean_return_time();
    ctx.details["branches"] = spec.size();
}

inline void run_corr(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    const auto spec = tower_spec(cfg.system);
    const auto op = build_operator(spec, cfg.estimator.depth);
    const auto phi_obs = make_tower_observable(cfg.observable, spec);
    const auto psi_obs = make_tower_observable(cfg.psi ? *cfg.psi : cfg.observable, spec);
    if (cfg.observable.kind == "cylinder_indicator" && cfg.observable.word.size() > cfg.estimator.depth)
        ctx.flag("observable_deeper_than_cylinder_basis");
    if (cfg.observable.kind == "itinerary" || cfg.observable.kind == "polynomial")
        ctx.flag("observable_sampled_on_cells");
    const auto phi = op.basis().sample(phi_obs);
    const auto psi = op.basis().sample(psi_obs);
    const auto n_max = cfg.estimator.n.back();
    const auto D = l1_decay(op, phi, n_max);
    const auto C = corr_exact(op, phi, psi, n_max);
    ctx.writer.write("decay.csv", decay_csv(D, C));
    Series sd, sc;
    for (auto k : cfg.estimator.n) {
        sd.n.push_back(k);
        sd.value.push_back(D[k]);
        sd.stderr.push_back(0.0);
        sc.n.push_back(k);
        sc.value.push_back(C[k]);
        sc.stderr.push_back(0.0);
    }
    ctx.writer.series("decay_l1.csv", sd);
    ctx.writer.series("corr.csv", sc);
    const auto mc = corr_mc(spec, phi_obs, psi_obs, cfg.estimator.n, cfg.estimator.members, ctx.seed,
                            ctx.threads);
    ctx.writer.series("corr_mc.csv", to_series(mc.n, mc.value, mc.stderr));
    write_fit(ctx, "fit.json", sd.n, sd.value);
    ctx.details["cylinder_depth"] = cfg.estimator.depth;
    ctx.details["cells"] = op.basis().size();
}

inline void run_ld(Context& ctx)
{
    const auto d = deviations(ctx);
    ctx.writer.series("ld.csv", to_series(d.n, d.ld, d.ld_stderr));
    write_fit(ctx, "fit.json", d.n, d.ld);
}

inline void run_mld(Context& ctx)
{
    const auto d = deviations(ctx);
    ctx.writer.series("ld.csv", to_series(d.n, d.ld, d.ld_stderr));
    ctx.writer.series("mld.csv", to_series(d.n, d.mld, d.mld_stderr));
    write_fit(ctx, "fit.json", d.n, d.mld);
    ctx.details["j_max"] = d.j_max;
    ctx.details["last_change"] = d.last_change;
    if (d.unstable) {
        ctx.flag("mld_unstable: exceedances persist at j_max = " + std::to_string(d.j_max));
        ctx.result.unstable = true;
    }
}

inline void record_tail(Context& ctx, const TailSeries& t, const std::string& name)
{
    ctx.writer.series(name, to_series(t.n, t.value, t.stderr));
    write_fit(ctx, "fit.json", t.n, t.value);
    ctx.details["horizon"] = t.horizon;
    ctx.details["censored"] = t.censored;
    if (t.censored)
        ctx.flag("censored: " + std::to_string(t.censored) + " of " + std::to_string(t.members));
}

inline void run_tails(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    if (cfg.system.kind == "intermittent") {
        const auto& e = cfg.estimator;
        const auto horizon = e.horizon ? e.horizon : e.n.back();
        const auto t = recurrence_tail_estimate(IntermittentMap(cfg.system.gamma), e.n, e.members,
                                                horizon, ctx.seed, ctx.threads);
        record_tail(ctx, t, "tails.csv");
        ctx.details["ensemble"] = "lebesgue_on_inducing_domain";
        return;
    }
    record_tail(ctx, recurrence_tail_estimate(tower_spec(cfg.system), cfg.estimator.n), "tails.csv");
    ctx.details["ensemble"] = "exact";
}

inline void run_etime(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    const auto sys = ambient_system(cfg.system);
    if (!sys)
        throw ParameterError("etime needs an ambient system (intermittent or solenoid)");
    const auto phi = make_ambient_observable(cfg.observable, *sys);
    const auto mean = ambient_mean(ctx, *sys, phi);
    record_mean(ctx, mean);
    ExpansionTimeOptions o;
    o.lambda = mean.mean;
    o.n = cfg.estimator.n;
    o.margin = cfg.estimator.margin;
    o.members = cfg.estimator.members;
    o.threads = ctx.threads;
    o.seed = ctx.seed;
    const System s = *sys;
    const auto t = expansion_time_tail(
        ambient_orbits([s](const AmbientPoint& a) { return ambient_step(s, a); }, phi,
                       lebesgue_leaf(ctx.seed)),
        o);
    record_tail(ctx, t, "etime.csv");
    ctx.details["margin"] = o.margin;
}

inline void run_fit(Context& ctx)
{
    if (ctx.cfg.fit.input.empty())
        throw ParameterError("fit.input: a series CSV is required");
    const auto s = read_series_csv(ctx.cfg.fit.input);
    write_fit(ctx, "fit.json", s.n, s.value);
}

} // namespace detail

/// Run one subcommand and write its artifacts plus manifest.json.
inline RunResult run_experiment(const std::string& command, const ExperimentConfig& cfg,
                                const RunOptions& opt)
{
    validate_config(cfg);
    detail::Context ctx(cfg, opt);
    if (command == "tower")
        detail::run_tower(ctx);
    else if (command == "corr")
        detail::run_corr(ctx);
    else if (command == "ld")
        detail::run_ld(ctx);
    else if (command == "mld")
        detail::run_mld(ctx);
    else if (command == "tails")
        detail::run_tails(ctx);
    else if (command == "etime")
        detail::run_etime(ctx);
    else if (command == "fit")
        detail::run_fit(ctx);
    else
        throw ParameterError("unknown subcommand '" + command + "'");

    std::uint32_t r_max = 1;
    double truncation = 0.0;
    if (command != "fit") {
        const auto spec = tower_spec(cfg.system);
        r_max = spec.max_return_time();
        truncation = spec.truncation_mass();
    }
    if (truncation > 0.0)
        ctx.flag("truncated_tail_folded_into_r_max");
    nlohmann::ordered_json m;
    m["config_hash"] = hex64(fnv1a64(canonical_text(cfg)));
    m["r_max"] = r_max;
    m["truncation_mass"] = truncation;
    m["flags"] = ctx.result.flags;
    m["command"] = command;
    m["seed"] = ctx.seed;
    m["system"] = cfg.system.kind;
    m["observable"] = cfg.observable.kind;
    m["details"] = ctx.details;
    auto files = ctx.writer.files();
    files.push_back("manifest.json");
    m["files"] = files;
    ctx.writer.json("manifest.json", m);
    ctx.result.files = ctx.writer.files();
    ctx.result.manifest = m;
    return ctx.result;
}

} // namespace towerlab
