#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "towerlab/errors.hpp"
#include "towerlab/numerics.hpp"
#include "towerlab/return_time_spec.hpp"
#include "towerlab/stats/fit.hpp"
#include "towerlab/systems.hpp"

namespace towerlab {

/// One term c·v1^k1·v2^k2 of a polynomial in two coordinates.
struct Monomial {
    double coef = 0.0;
    std::uint32_t p0 = 0; ///< power of the first coordinate (x or u)
    std::uint32_t p1 = 0; ///< power of the second coordinate (z or s)

    friend bool operator==(const Monomial&, const Monomial&) = default;
};

struct SystemConfig {
    std::string kind = "geometric"; ///< geometric|polynomial|uniform|single|file|intermittent|solenoid
    std::uint32_t r_max = 200;
    double alpha = 3.0;
    std::uint32_t count = 2;
    std::uint32_t return_time = 1;
    double beta_u = 0.5;
    double beta_s = 0.5;
    double gamma = 0.5;
    SolenoidParams solenoid;
    std::string spec_file;
};

struct ObservableConfig {
    std::string kind = "level_indicator"; ///< level_indicator|cylinder_indicator|inverse_first_symbol|itinerary|constant|polynomial|cu_derivative
    std::uint32_t level = 0;
    std::vector<Symbol> word;
    std::uint32_t steps = 1;      ///< N for cu_derivative
    std::uint32_t terms = 32;     ///< truncation of itinerary series
    double value = 0.0;           ///< constant observable
    std::vector<Monomial> polynomial;
};

struct EstimatorConfig {
    double epsilon = 0.1;
    std::vector<std::uint64_t> n;
    std::uint64_t j_max = 0; ///< 0: use the largest n
    std::uint64_t members = 1000;
    std::optional<std::uint64_t> seed;
    std::uint32_t depth = 1;
    std::uint64_t burn_in = 1000;
    std::uint64_t margin = 0;
    std::uint64_t horizon = 0; ///< recurrence horizon; 0: largest n
    std::uint64_t control_steps = 10'000'000;
    std::optional<double> mean;
};

struct FitConfig {
    std::optional<RateClass> cls; ///< empty: automatic
    std::uint64_t n_lo = 0;
    std::uint64_t n_hi = std::numeric_limits<std::uint64_t>::max();
    std::string input;            ///< series CSV for the fit subcommand
};

struct ExperimentConfig {
    SystemConfig system;
    ObservableConfig observable;
    std::optional<ObservableConfig> psi; ///< second observable for corr; defaults to observable
    EstimatorConfig estimator;
    FitConfig fit;
    std::string output_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty())
                out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty())
        out.push_back(cur);
    return out;
}

inline std::uint64_t to_u64(const std::string& s)
{
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ParameterError("expected a nonnegative integer, got '" + s + "'");
    return v;
}

inline std::uint32_t to_u32(const std::string& s)
{
    const auto v = to_u64(s);
    if (v > std::numeric_limits<std::uint32_t>::max())
        throw ParameterError("integer '" + s + "' is out of range");
    return static_cast<std::uint32_t>(v);
}

inline double to_real(const std::string& s)
{
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ParameterError("expected a real number, got '" + s + "'");
    return v;
}

/// n grid: a list of integers and lo:hi:step ranges.
inline std::vector<std::uint64_t> to_grid(const std::string& s)
{
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(s)) {
        const auto c1 = item.find(':');
        if (c1 == std::string::npos) {
            out.push_back(to_u64(item));
            continue;
        }
        const auto c2 = item.find(':', c1 + 1);
        const auto lo = to_u64(item.substr(0, c1));
        const auto hi = to_u64(item.substr(c1 + 1, c2 == std::string::npos ? std::string::npos
                                                                            : c2 - c1 - 1));
        const auto step = c2 == std::string::npos ? 1 : to_u64(item.substr(c2 + 1));
        if (step == 0)
            throw ParameterError("range step must be >= 1");
        for (auto k = lo; k <= hi; k += step)
            out.push_back(k);
    }
    return out;
}

/// "x^2*z - 0.5*z + 1" over variables (v0, v1).
inline std::vector<Monomial> to_polynomial(const std::string& text, char v0, char v1)
{
    std::vector<Monomial> out;
    std::string s;
    for (char c : text)
        if (c != ' ' && c != '\t')
            s.push_back(c);
    if (s.empty())
        throw ParameterError("empty polynomial");
    std::size_t i = 0;
    while (i < s.size()) {
        double sign = 1.0;
        if (s[i] == '+' || s[i] == '-') {
            sign = s[i] == '-' ? -1.0 : 1.0;
            ++i;
        }
        // A sign right after the 'e' of a number like 1e-3 does not end the term.
        std::size_t j = i;
        while (j < s.size()) {
            if ((s[j] == '+' || s[j] == '-') &&
                !(j >= i + 2 && (s[j - 1] == 'e' || s[j - 1] == 'E') &&
                  (std::isdigit(static_cast<unsigned char>(s[j - 2])) || s[j - 2] == '.')))
                break;
            ++j;
        }
        const std::string term = s.substr(i, j - i);
        if (term.empty())
            throw ParameterError("malformed polynomial '" + text + "'");
        Monomial m{sign, 0, 0};
        std::size_t k = 0;
        while (k <= term.size()) {
            const auto star = term.find('*', k);
            const std::string f = term.substr(k, star == std::string::npos ? std::string::npos : star - k);
            if (f.empty())
                throw ParameterError("malformed polynomial '" + text + "'");
            if (f[0] == v0 || f[0] == v1) {
                std::uint32_t p = 1;
                if (f.size() > 1) {
                    if (f[1] != '^')
                        throw ParameterError("malformed factor '" + f + "'");
                    p = to_u32(f.substr(2));
                }
                (f[0] == v0 ? m.p0 : m.p1) += p;
            } else {
                m.coef *= to_real(f);
            }
            if (star == std::string::npos)
                break;
            k = star + 1;
        }
        out.push_back(m);
        i = j;
    }
    return out;
}

inline std::string polynomial_text(const std::vector<Monomial>& p, char v0, char v1)
{
    std::string s;
    for (const auto& m : p) {
        if (s.empty())
            s += m.coef < 0 ? "-" : "";
        else
            s += m.coef < 0 ? " - " : " + ";
        s += format_real(std::abs(m.coef));
        if (m.p0)
            s += std::string("*") + v0 + "^" + std::to_string(m.p0);
        if (m.p1)
            s += std::string("*") + v1 + "^" + std::to_string(m.p1);
    }
    return s;
}

inline bool is_ambient(const std::string& kind) { return kind == "intermittent" || kind == "solenoid"; }

} // namespace detail

/// Parse the sectioned key=value format. Comments start with '#'. Every key
/// must be known in its section; errors carry the line number and key.
inline ExperimentConfig parse_config(std::istream& in)
{
    using Setter = std::function<void(const std::string&)>;
    ExperimentConfig c;
    ObservableConfig psi;
    bool has_psi = false;
    bool poly_seen = false, psi_poly_seen = false;
    std::string poly_text, psi_poly_text;

    auto observable_table = [](ObservableConfig& o, std::string& poly, bool& seen) {
        return std::map<std::string, Setter>{
            {"kind", [&o](const std::string& v) { o.kind = v; }},
            {"level", [&o](const std::string& v) { o.level = detail::to_u32(v); }},
            {"word",
             [&o](const std::string& v) {
                 o.word.clear();
                 for (const auto& t : detail::split_list(v))
                     o.word.push_back(detail::to_u32(t));
             }},
            {"steps", [&o](const std::string& v) { o.steps = detail::to_u32(v); }},
            {"terms", [&o](const std::string& v) { o.terms = detail::to_u32(v); }},
            {"value", [&o](const std::string& v) { o.value = detail::to_real(v); }},
            {"polynomial",
             [&poly, &seen](const std::string& v) {
                 poly = v;
                 seen = true;
             }},
        };
    };

    std::map<std::string, std::map<std::string, Setter>> tables;
    auto& sys = c.system;
    tables["system"] = {
        {"kind", [&](const std::string& v) { sys.kind = v; }},
        {"r_max", [&](const std::string& v) { sys.r_max = detail::to_u32(v); }},
        {"alpha", [&](const std::string& v) { sys.alpha = detail::to_real(v); }},
        {"count", [&](const std::string& v) { sys.count = detail::to_u32(v); }},
        {"return_time", [&](const std::string& v) { sys.return_time = detail::to_u32(v); }},
        {"beta_u", [&](const std::string& v) { sys.beta_u = detail::to_real(v); }},
        {"beta_s", [&](const std::string& v) { sys.beta_s = detail::to_real(v); }},
        {"gamma", [&](const std::string& v) { sys.gamma = detail::to_real(v); }},
        {"m", [&](const std::string& v) { sys.solenoid.m = detail::to_u32(v); }},
        {"kappa", [&](const std::string& v) { sys.solenoid.kappa = detail::to_real(v); }},
        {"lambda_s", [&](const std::string& v) { sys.solenoid.lambda_s = detail::to_real(v); }},
        {"amplitude", [&](const std::string& v) { sys.solenoid.amplitude = detail::to_real(v); }},
        {"eta", [&](const std::string& v) { sys.solenoid.holder_eta = detail::to_real(v); }},
        {"spec_file", [&](const std::string& v) { sys.spec_file = v; }},
    };
    tables["observable"] = observable_table(c.observable, poly_text, poly_seen);
    tables["psi"] = observable_table(psi, psi_poly_text, psi_poly_seen);
    auto& est = c.estimator;
    tables["estimator"] = {
        {"epsilon", [&](const std::string& v) { est.epsilon = detail::to_real(v); }},
        {"n", [&](const std::string& v) { est.n = detail::to_grid(v); }},
        {"j_max", [&](const std::string& v) { est.j_max = detail::to_u64(v); }},
        {"members", [&](const std::string& v) { est.members = detail::to_u64(v); }},
        {"seed", [&](const std::string& v) { est.seed = detail::to_u64(v); }},
        {"depth", [&](const std::string& v) { est.depth = detail::to_u32(v); }},
        {"burn_in", [&](const std::string& v) { est.burn_in = detail::to_u64(v); }},
        {"margin", [&](const std::string& v) { est.margin = detail::to_u64(v); }},
        {"horizon", [&](const std::string& v) { est.horizon = detail::to_u64(v); }},
        {"control_steps", [&](const std::string& v) { est.control_steps = detail::to_u64(v); }},
        {"mean", [&](const std::string& v) { est.mean = detail::to_real(v); }},
    };
    tables["fit"] = {
        {"class",
         [&](const std::string& v) {
             if (v == "auto")
                 c.fit.cls.reset();
             else
                 c.fit.cls = parse_rate_class(v);
         }},
        {"n_lo", [&](const std::string& v) { c.fit.n_lo = detail::to_u64(v); }},
        {"n_hi", [&](const std::string& v) { c.fit.n_hi = detail::to_u64(v); }},
        {"input", [&](const std::string& v) { c.fit.input = v; }},
    };
    tables["output"] = {
        {"dir", [&](const std::string& v) { c.output_dir = v; }},
    };

    std::string section;
    std::set<std::string> seen;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("unterminated section header", no);
            section = detail::trim(line.substr(1, line.size() - 2));
            if (!tables.count(section))
                throw ParseError("unknown section [" + section + "]", no);
            if (section == "psi")
                has_psi = true;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key = value", no);
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (section.empty())
            throw ParseError("key '" + key + "' appears before any section", no);
        const auto& table = tables[section];
        const auto it = table.find(key);
        if (it == table.end())
            throw ParseError("unknown key '" + key + "' in [" + section + "]", no);
        if (!seen.insert(section + "." + key).second)
            throw ParseError("duplicate key '" + key + "' in [" + section + "]", no);
        if (value.empty())
            throw ParseError("empty value for '" + key + "' in [" + section + "]", no);
        try {
            it->second(value);
        } catch (const Error& e) {
            throw ParseError(section + "." + key + ": " + e.what(), no);
        }
    }

    const bool ambient = detail::is_ambient(c.system.kind);
    if (poly_seen)
        c.observable.polynomial = ambient ? detail::to_polynomial(poly_text, 'x', 'z')
                                          : detail::to_polynomial(poly_text, 'u', 's');
    if (psi_poly_seen)
        psi.polynomial = ambient ? detail::to_polynomial(psi_poly_text, 'x', 'z')
                                 : detail::to_polynomial(psi_poly_text, 'u', 's');
    if (has_psi)
        c.psi = psi;
    return c;
}

inline ExperimentConfig parse_config(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParameterError("cannot open config '" + path + "'");
    return parse_config(in);
}

/// Check the invariants that do not depend on the subcommand.
inline void validate_config(const ExperimentConfig& c)
{
    static const std::set<std::string> systems{"geometric", "polynomial", "uniform", "single",
                                               "file",      "intermittent", "solenoid"};
    static const std::set<std::string> observables{"level_indicator", "cylinder_indicator",
                                                   "inverse_first_symbol", "itinerary",
                                                   "constant", "polynomial", "cu_derivative"};
    if (!systems.count(c.system.kind))
        throw ParameterError("system.kind: unknown system '" + c.system.kind + "'");
    for (const auto* o : {&c.observable, c.psi ? &*c.psi : nullptr}) {
        if (!o)
            continue;
        if (!observables.count(o->kind))
            throw ParameterError("observable.kind: unknown observable '" + o->kind + "'");
        if (o->kind == "polynomial" && o->polynomial.empty())
            throw ParameterError("observable.polynomial: required for kind = polynomial");
        if (o->kind == "cylinder_indicator" && o->word.empty())
            throw ParameterError("observable.word: required for kind = cylinder_indicator");
    }
    if (c.system.kind == "file" && c.system.spec_file.empty())
        throw ParameterError("system.spec_file: required for kind = file");
    if (!c.estimator.seed)
        throw ParameterError("estimator.seed: a seed is mandatory (config or --seed)");
    const auto& n = c.estimator.n;
    if (n.empty())
        throw ParameterError("estimator.n: the n grid is empty");
    for (std::size_t i = 1; i < n.size(); ++i)
        if (n[i] <= n[i - 1])
            throw ParameterError("estimator.n: the n grid must be strictly increasing");
    if (n.front() < 1)
        throw ParameterError("estimator.n: grid values must be >= 1");
    if (c.estimator.members < 100)
        throw ParameterError("estimator.members: ensemble must have at least 100 members");
    if (!(c.estimator.epsilon > 0.0))
        throw ParameterError("estimator.epsilon: must be > 0");
    if (c.estimator.j_max != 0 && c.estimator.j_max < n.back())
        throw ParameterError("estimator.j_max: must be >= the largest n");
}

namespace detail {

inline void write_observable(std::ostream& out, const ObservableConfig& o, bool ambient)
{
    out << "kind = " << o.kind << "\n";
    out << "level = " << o.level << "\n";
    if (!o.word.empty()) {
        out << "word =";
        for (auto a : o.word)
            out << " " << a;
        out << "\n";
    }
    out << "steps = " << o.steps << "\n";
    out << "terms = " << o.terms << "\n";
    out << "value = " << format_real(o.value) << "\n";
    if (!o.polynomial.empty())
        out << "polynomial = "
            << polynomial_text(o.polynomial, ambient ? 'x' : 'u', ambient ? 'z' : 's') << "\n";
}

} // namespace detail

/// Canonical text of a configuration: every field in a fixed order, reals with
/// 17 significant digits. Parsing it gives back the same configuration.
inline std::string canonical_text(const ExperimentConfig& c)
{
    std::ostringstream out;
    const auto& s = c.system;
    const bool ambient = detail::is_ambient(s.kind);
    out << "[system]\n";
    out << "kind = " << s.kind << "\n";
    out << "r_max = " << s.r_max << "\n";
    out << "alpha = " << format_real(s.alpha) << "\n";
    out << "count = " << s.count << "\n";
    out << "return_time = " << s.return_time << "\n";
    out << "beta_u = " << format_real(s.beta_u) << "\n";
    out << "beta_s = " << format_real(s.beta_s) << "\n";
    out << "gamma = " << format_real(s.gamma) << "\n";
    out << "m = " << s.solenoid.m << "\n";
    out << "kappa = " << format_real(s.solenoid.kappa) << "\n";
    out << "lambda_s = " << format_real(s.solenoid.lambda_s) << "\n";
    out << "amplitude = " << format_real(s.solenoid.amplitude) << "\n";
    out << "eta = " << format_real(s.solenoid.holder_eta) << "\n";
    if (!s.spec_file.empty())
        out << "spec_file = " << s.spec_file << "\n";
    out << "[observable]\n";
    detail::write_observable(out, c.observable, ambient);
    if (c.psi) {
        out << "[psi]\n";
        detail::write_observable(out, *c.psi, ambient);
    }
    const auto& e = c.estimator;
    out << "[estimator]\n";
    out << "epsilon = " << format_real(e.epsilon) << "\n";
    if (!e.n.empty()) {
        out << "n =";
        for (auto k : e.n)
            out << " " << k;
        out << "\n";
    }
    out << "j_max = " << e.j_max << "\n";
    out << "members = " << e.members << "\n";
    if (e.seed)
        out << "seed = " << *e.seed << "\n";
    out << "depth = " << e.depth << "\n";
    out << "burn_in = " << e.burn_in << "\n";
    out << "margin = " << e.margin << "\n";
    out << "horizon = " << e.horizon << "\n";
    out << "control_steps = " << e.control_steps << "\n";
    if (e.mean)
        out << "mean = " << format_real(*e.mean) << "\n";
    out << "[fit]\n";
    out << "class = " << (c.fit.cls ? to_string(*c.fit.cls) : "auto") << "\n";
    out << "n_lo = " << c.fit.n_lo << "\n";
    out << "n_hi = " << c.fit.n_hi << "\n";
    if (!c.fit.input.empty())
        out << "input = " << c.fit.input << "\n";
    out << "[output]\n";
    out << "dir = " << c.output_dir << "\n";
    return out.str();
}

} // namespace towerlab
