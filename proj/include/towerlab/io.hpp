#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "towerlab/errors.hpp"
#include "towerlab/numerics.hpp"
#include "towerlab/stats/fit.hpp"

namespace towerlab {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// A series in the fixed n,value,stderr layout.
struct Series {
    std::vector<std::uint64_t> n;
    std::vector<double> value;
    std::vector<double> stderr;
};

inline std::string series_csv(const Series& s)
{
    if (s.n.size() != s.value.size() || s.n.size() != s.stderr.size())
        throw ParameterError("series columns differ in length");
    std::string out = "n,value,stderr\n";
    for (std::size_t i = 0; i < s.n.size(); ++i)
        out += std::to_string(s.n[i]) + "," + format_real(s.value[i]) + "," +
               format_real(s.stderr[i]) + "\n";
    return out;
}

/// Transfer decay table n,D,Corr.
inline std::string decay_csv(const std::vector<double>& d, const std::vector<double>& corr)
{
    if (d.size() != corr.size())
        throw ParameterError("decay columns differ in length");
    std::string out = "n,D,Corr\n";
    for (std::size_t i = 0; i < d.size(); ++i)
        out += std::to_string(i) + "," + format_real(d[i]) + "," + format_real(corr[i]) + "\n";
    return out;
}

/// Parse an n,value,stderr CSV (stderr column optional).
inline Series read_series_csv(std::istream& in)
{
    Series s;
    std::string line;
    std::size_t no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (!header) {
            if (line.rfind("n,value", 0) != 0)
                throw ParseError("expected header 'n,value,stderr'", no);
            header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() < 2 || cells.size() > 3)
            throw ParseError("expected 2 or 3 columns", no);
        try {
            s.n.push_back(std::stoull(cells[0]));
            s.value.push_back(std::stod(cells[1]));
            s.stderr.push_back(cells.size() == 3 ? std::stod(cells[2]) : 0.0);
        } catch (const std::exception&) {
            throw ParseError("malformed number", no);
        }
    }
    if (!header)
        throw ParseError("empty series file");
    return s;
}

inline Series read_series_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParameterError("cannot open series '" + path + "'");
    return read_series_csv(in);
}

inline nlohmann::ordered_json fit_json(const RateFit& f)
{
    nlohmann::ordered_json j;
    j["class"] = to_string(f.cls);
    nlohmann::ordered_json p;
    switch (f.cls) {
    case RateClass::polynomial: p["alpha"] = f.alpha; break;
    case RateClass::exponential: p["tau"] = f.tau; break;
    case RateClass::stretched:
        p["tau"] = f.tau;
        p["theta"] = f.theta;
        break;
    }
    p["log_c"] = f.log_c;
    j["params"] = p;
    j["theta_prime"] = f.theta_prime;
    j["r_squared"] = f.r_squared;
    j["fit_range"] = {f.n_lo, f.n_hi};
    j["points"] = f.points;
    j["warnings"] = f.warnings;
    return j;
}

/// JSON text with reals printed at 17 significant digits.
inline std::string json_text(const nlohmann::ordered_json& j)
{
    std::string out;
    auto emit = [&](auto&& self, const nlohmann::ordered_json& v, int indent) -> void {
        const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
        const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
        if (v.is_object()) {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first)
                    out += ",\n";
                first = false;
                out += inner + nlohmann::json(it.key()).dump() + ": ";
                self(self, it.value(), indent + 1);
            }
            out += "\n" + pad + "}";
        } else if (v.is_array()) {
            if (v.empty()) {
                out += "[]";
                return;
            }
            out += "[";
            bool first = true;
            for (const auto& e : v) {
                if (!first)
                    out += ", ";
                first = false;
                self(self, e, indent + 1);
            }
            out += "]";
        } else if (v.is_number_float()) {
            const double x = v.get<double>();
            out += std::isfinite(x) ? format_real(x) : "null";
        } else {
            out += v.dump();
        }
    };
    emit(emit, j, 0);
    out += "\n";
    return out;
}

/// Writes files under one output directory and remembers their names.
class ArtifactWriter {
  public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir))
    {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }
    const std::vector<std::string>& files() const noexcept { return files_; }

    void write(const std::string& name, const std::string& text)
    {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out)
            throw Error("cannot write '" + (dir_ / name).string() + "'");
        out << text;
        files_.push_back(name);
    }

    void series(const std::string& name, const Series& s) { write(name, series_csv(s)); }
    void json(const std::string& name, const nlohmann::ordered_json& j) { write(name, json_text(j)); }

  private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

} // namespace towerlab
