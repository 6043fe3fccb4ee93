#pragma once

// Scalar special functions used by the closed-form densities: erf, gamma at
// integer and half-integer arguments, and the incomplete gamma functions.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "nratio/error.hpp"

namespace nratio::special {

/// erf with the far tail clamped to +-1 beyond |x| >= 6.
inline double erf(double x) {
    if (std::isnan(x))
        throw NonFinite("erf: NaN argument");
    if (x >= 6.0)
        return 1.0;
    if (x <= -6.0)
        return -1.0;
    return std::erf(x);
}

inline double erfc(double x) {
    if (std::isnan(x))
        throw NonFinite("erfc: NaN argument");
    return std::erfc(x);
}

/// Argument of the gamma function restricted to positive integers and
/// half-integers, stored as twice its value so it is always exact.
class GammaArg {
public:
    explicit constexpr GammaArg(int twice_value) : twice_(twice_value) {
        if (twice_value < 1)
            throw InvalidArgument("GammaArg requires twice_value >= 1");
    }

    static constexpr GammaArg integer(int n) { return GammaArg(2 * n); }
    /// n + 1/2
    static constexpr GammaArg half_integer(int n) { return GammaArg(2 * n + 1); }

    constexpr int twice_value() const noexcept { return twice_; }
    constexpr double value() const noexcept { return 0.5 * twice_; }
    constexpr bool is_integer() const noexcept { return twice_ % 2 == 0; }

private:
    int twice_;
};

/// Gamma by the recurrence Gamma(s+1) = s Gamma(s) from Gamma(1) = 1 or Gamma(1/2) = sqrt(pi).
/// Overflows to +inf for s above ~171; use log_gamma there.
inline double gamma(GammaArg g) {
    double s = g.is_integer() ? 1.0 : 0.5;
    double value = g.is_integer() ? 1.0 : std::sqrt(std::numbers::pi);
    const double target = g.value();
    while (s < target) {
        value *= s;
        s += 1.0;
    }
    return value;
}

inline double log_gamma(GammaArg g) {
    if (g.twice_value() <= 60)
        return std::log(gamma(g));
    return std::lgamma(g.value());
}

namespace detail {

inline void check_inc_gamma_args(double s, double x, const char* who) {
    if (!std::isfinite(s) || std::isnan(x))
        throw NonFinite(std::string(who) + ": non-finite argument");
    if (!(s > 0.0))
        throw InvalidArgument(std::string(who) + ": shape must be positive");
    if (x < 0.0)
        throw InvalidArgument(std::string(who) + ": x must be nonnegative");
}

// sum_{n>=0} x^n / (s (s+1) ... (s+n)); gamma(s, x) = x^s e^{-x} * this.
inline double lower_series(double s, double x) {
    double term = 1.0 / s;
    double sum = term;
    for (int n = 1; n < 100000; ++n) {
        term *= x / (s + n);
        sum += term;
        if (term < sum * 1e-17)
            break;
    }
    return sum;
}

// Continued fraction for Gamma(s, x) e^{x} x^{-s} (modified Lentz).
inline double upper_fraction(double s, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - s;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny)
            d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16)
            break;
    }
    return h;
}

} // namespace detail

/// ln gamma(s, x) where gamma(s, x) = int_0^x e^{-z} z^{s-1} dz.
/// Series below x = s + 1, continued fraction for the complement above.
inline double log_lower_inc_gamma(double s, double x) {
    detail::check_inc_gamma_args(s, x, "lower_inc_gamma");
    if (x == 0.0)
        return -std::numeric_limits<double>::infinity();
    if (std::isinf(x))
        return std::lgamma(s);
    if (x < s + 1.0)
        return s * std::log(x) - x + std::log(detail::lower_series(s, x));
    const double log_upper = s * std::log(x) - x + std::log(detail::upper_fraction(s, x));
    const double q = std::exp(log_upper - std::lgamma(s));
    return std::lgamma(s) + std::log1p(-q);
}

inline double lower_inc_gamma(double s, double x) { return std::exp(log_lower_inc_gamma(s, x)); }

/// ln Gamma(n, x) for integer n >= 1, from the finite sum
/// Gamma(n, x) = (n-1)! e^{-x} sum_{k<n} x^k / k!.
inline double log_upper_inc_gamma_int(int n, double x) {
    detail::check_inc_gamma_args(n, x, "upper_inc_gamma");
    if (std::isinf(x))
        return -std::numeric_limits<double>::infinity();
    if (x == 0.0)
        return std::lgamma(static_cast<double>(n));
    const double lx = std::log(x);
    double peak = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k)
        peak = std::max(peak, k * lx - std::lgamma(k + 1.0));
    double sum = 0.0;
    for (int k = 0; k < n; ++k)
        sum += std::exp(k * lx - std::lgamma(k + 1.0) - peak);
    return std::lgamma(static_cast<double>(n)) - x + peak + std::log(sum);
}

} // namespace nratio::special
