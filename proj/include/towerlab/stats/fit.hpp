#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "towerlab/errors.hpp"
#include "towerlab/numerics.hpp"

namespace towerlab {

enum class RateClass { polynomial, exponential, stretched };

inline const char* to_string(RateClass c)
{
    switch (c) {
    case RateClass::polynomial: return "polynomial";
    case RateClass::exponential: return "exponential";
    case RateClass::stretched: return "stretched";
    }
    return "?";
}

inline RateClass parse_rate_class(const std::string& s)
{
    if (s == "polynomial")
        return RateClass::polynomial;
    if (s == "exponential")
        return RateClass::exponential;
    if (s == "stretched")
        return RateClass::stretched;
    throw ParameterError("unknown rate class '" + s + "'");
}

/// Fitted decay y ≈ C·n^{-α}, C·e^{-τn} or C·e^{-τ n^θ}.
struct RateFit {
    RateClass cls = RateClass::exponential;
    double alpha = 0.0;
    double tau = 0.0;
    double theta = 1.0;
    double theta_prime = 0.5; ///< θ/(θ+1); θ = 1 for exponential
    double log_c = 0.0;
    double r_squared = 0.0;
    std::uint64_t n_lo = 0;
    std::uint64_t n_hi = 0;
    std::size_t points = 0;
    std::vector<std::string> warnings;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares of y on x.
inline LineFit least_squares(std::span<const double> x, std::span<const double> y)
{
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2)
        throw ParameterError("line fit needs at least two points");
    const double mx = compensated_sum(x) / n, my = compensated_sum(y) / n;
    CompensatedSum sxx, sxy, syy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx.add((x[i] - mx) * (x[i] - mx));
        sxy.add((x[i] - mx) * (y[i] - my));
        syy.add((y[i] - my) * (y[i] - my));
    }
    LineFit f;
    if (sxx.value() == 0.0)
        throw ParameterError("line fit needs distinct abscissae");
    f.slope = sxy.value() / sxx.value();
    f.intercept = my - f.slope * mx;
    CompensatedSum res;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        res.add(r * r);
    }
    f.r_squared = syy.value() > 0.0 ? std::clamp(1.0 - res.value() / syy.value(), 0.0, 1.0)
                                    : (res.value() == 0.0 ? 1.0 : 0.0);
    return f;
}

inline constexpr double kStretchedGridStep = 0.01;
inline constexpr double kSimplerClassMargin = 0.02;

/// Fit a decay class on points with n in [n_lo, n_hi]. Nonpositive values are
/// trimmed with a warning. Without a hint, stretched is chosen only when its
/// R² beats both simple classes by more than 0.02; otherwise the better of
/// exponential and polynomial wins.
inline RateFit fit_rate(std::span<const std::uint64_t> n, std::span<const double> y,
                        std::optional<RateClass> hint = std::nullopt, std::uint64_t n_lo = 0,
                        std::uint64_t n_hi = std::numeric_limits<std::uint64_t>::max())
{
    if (n.size() != y.size())
        throw ParameterError("fit_rate: n and value lengths differ");
    RateFit out;
    std::vector<double> ln, nn, ly;
    std::size_t trimmed = 0;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] < n_lo || n[i] > n_hi || n[i] == 0)
            continue;
        if (!(y[i] > 0.0) || !std::isfinite(y[i])) {
            ++trimmed;
            continue;
        }
        nn.push_back(static_cast<double>(n[i]));
        ln.push_back(std::log(static_cast<double>(n[i])));
        ly.push_back(std::log(y[i]));
    }
    if (trimmed)
        out.warnings.push_back("trimmed " + std::to_string(trimmed) + " nonpositive values");
    if (nn.size() < 2)
        throw ParameterError("fit_rate needs at least two positive points in range");
    out.points = nn.size();
    out.n_lo = static_cast<std::uint64_t>(nn.front());
    out.n_hi = static_cast<std::uint64_t>(nn.back());

    const LineFit poly = least_squares(ln, ly);
    const LineFit expo = least_squares(nn, ly);
    LineFit best_str = expo;
    double best_theta = 1.0;
    std::vector<double> nt(nn.size());
    for (int k = 1; k <= 100; ++k) {
        const double th = k * kStretchedGridStep;
        for (std::size_t i = 0; i < nn.size(); ++i)
            nt[i] = std::pow(nn[i], th);
        const LineFit f = least_squares(nt, ly);
        if (f.r_squared > best_str.r_squared) {
            best_str = f;
            best_theta = th;
        }
    }

    RateClass cls;
    if (hint) {
        cls = *hint;
    } else {
        const double simple = std::max(poly.r_squared, expo.r_squared);
        if (best_str.r_squared > simple + kSimplerClassMargin && best_theta < 1.0)
            cls = RateClass::stretched;
        else
            cls = expo.r_squared >= poly.r_squared ? RateClass::exponential : RateClass::polynomial;
    }
    out.cls = cls;
    switch (cls) {
    case RateClass::polynomial:
        out.alpha = -poly.slope;
        out.log_c = poly.intercept;
        out.r_squared = poly.r_squared;
        out.theta = 0.0;
        out.theta_prime = 0.0;
        break;
    case RateClass::exponential:
        out.tau = -expo.slope;
        out.log_c = expo.intercept;
        out.r_squared = expo.r_squared;
        out.theta = 1.0;
        out.theta_prime = 0.5;
        break;
    case RateClass::stretched:
        out.tau = -best_str.slope;
        out.theta = best_theta;
        out.theta_prime = best_theta / (best_theta + 1.0);
        out.log_c = best_str.intercept;
        out.r_squared = best_str.r_squared;
        break;
    }
    if ((cls == RateClass::polynomial && !(out.alpha > 0.0)) ||
        (cls != RateClass::polynomial && !(out.tau > 0.0)))
        out.warnings.push_back("fitted rate parameter is not positive");
    return out;
}

/// Envelope value for a class and parameters.
inline double envelope(RateClass cls, double rate, double theta, double n)
{
    switch (cls) {
    case RateClass::polynomial: return std::pow(n, -rate);
    case RateClass::exponential: return std::exp(-rate * n);
    case RateClass::stretched: return std::exp(-rate * std::pow(n, theta));
    }
    return 0.0;
}

struct BoundCheck {
    double fitted_c = 0.0;
    std::size_t violations = 0;
};

/// Smallest C with series(n) ≤ C·envelope(n) over the points.
inline BoundCheck bound_check(std::span<const std::uint64_t> n, std::span<const double> y,
                              RateClass cls, double rate, double theta = 1.0)
{
    BoundCheck b;
    for (std::size_t i = 0; i < n.size(); ++i)
        b.fitted_c = std::max(b.fitted_c, y[i] / envelope(cls, rate, theta, double(n[i])));
    for (std::size_t i = 0; i < n.size(); ++i)
        if (y[i] > b.fitted_c * envelope(cls, rate, theta, double(n[i])))
            ++b.violations;
    return b;
}

} // namespace towerlab
