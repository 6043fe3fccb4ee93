#pragma once

// Closed-form density of the normal-ratio distribution.
//
// Along the ray X = z W, W = (1, y), the joint density of (z, Y) is
//     c |z|^{p-1} exp(-(zW - mu)' Sigma^{-1} (zW - mu) / 2).
// Completing the square in z gives the center b and spread a; substituting
// u = (z - b) / a turns the z-integral into Gaussian moments of (a u + b)^{p-1}.
// For odd p the power is a polynomial and only even moments survive. For even
// p the absolute value splits the line at u = -b/a, leaving half-line odd
// moments and truncated even moments that reduce to incomplete gamma values.
//
// Every summand is positive and carried as a logarithm.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <numbers>
#include <span>
#include <thread>
#include <vector>

#include "nratio/error.hpp"
#include "nratio/linalg.hpp"
#include "nratio/model.hpp"
#include "nratio/special.hpp"

namespace nratio {

/// Per-point coefficients of the z-integral.
struct Intermediates {
    Vector w;               ///< ray direction (1, y)
    double quad_coef;       ///< M = W' S^{-1} W
    double lin_coef;        ///< K = -2 W' S^{-1} mu
    double const_coef;      ///< L = mu' S^{-1} mu + 1
    double spread;          ///< a = L/M - K^2/(4 M^2), always >= 1/M
    double center;          ///< b = -K / (2 M)
    double log_norm_const;  ///< ln c = -(p/2) ln(2 pi) - ln|S| / 2
};

namespace detail {

/// Accumulates sum_i sign_i exp(log_i) without leaving the log domain.
class LogSum {
public:
    void add(double log_mag, int sign = 1) {
        if (log_mag == -std::numeric_limits<double>::infinity())
            return;
        terms_.push_back({log_mag, sign});
    }

    /// ln of the (positive) total; -inf when every term vanished.
    double log_total() const {
        if (terms_.empty())
            return -std::numeric_limits<double>::infinity();
        double peak = terms_.front().log_mag;
        for (const auto& t : terms_)
            peak = std::max(peak, t.log_mag);
        double pos = 0.0, neg = 0.0;
        for (const auto& t : terms_)
            (t.sign > 0 ? pos : neg) += std::exp(t.log_mag - peak);
        const double net = pos - neg;
        if (net < 0.0)
            throw NumericalFailure("signed log-sum is negative");
        return peak + std::log(net);
    }

private:
    struct Term {
        double log_mag;
        int sign;
    };
    std::vector<Term> terms_;
};

/// Exact binomial coefficient for small n.
inline double binomial(int n, int k) {
    if (k < 0 || k > n)
        return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i)
        c = c * (n - k + i) / i;
    return c;
}

inline void check_coefs(double quad_coef, double spread) {
    if (!(quad_coef > 0.0) || !(spread > 0.0))
        throw InvalidArgument("moment coefficients must be positive");
}

/// ln(M a^2 / 2), the Gaussian rate in u.
inline double log_rate(double quad_coef, double spread) {
    return std::log(0.5 * quad_coef) + 2.0 * std::log(spread);
}

/// ln of power^n with 0^0 = 1.
inline double log_pow(double base_abs, int n) { return n == 0 ? 0.0 : n * std::log(base_abs); }

} // namespace detail

inline Intermediates intermediates(const NormalRatioModel& model, const RatioPoint& point) {
    check_point(model, point);
    const auto& sigma = model.sigma();
    const auto& wm = model.whitened_mean();

    Intermediates out;
    out.w = point.ray();
    const Vector wv = sigma.solve_lower(out.w);
    const double m = dot(wv, wv);
    const double w_mu = dot(wv, wm);
    const double mu_mu = dot(wm, wm);
    out.quad_coef = m;
    out.lin_coef = -2.0 * w_mu;
    out.const_coef = mu_mu + 1.0;
    out.center = -out.lin_coef / (2.0 * m);

    // M a = 1 + |L^{-1}mu - proj_W(L^{-1}mu)|^2, which is L - K^2/(4M) without the cancellation.
    const double proj = w_mu / m;
    double resid = 0.0;
    for (std::size_t i = 0; i < wm.size(); ++i) {
        const double r = wm[i] - proj * wv[i];
        resid += r * r;
    }
    out.spread = (1.0 + resid) / m;
    out.log_norm_const = -0.5 * static_cast<double>(model.p()) * std::log(2.0 * std::numbers::pi) -
                         0.5 * sigma.log_det();
    return out;
}

/// ln of int_R exp(-M a^2 u^2 / 2) u^{2j} du = (M a^2 / 2)^{-(j + 1/2)} Gamma(j + 1/2).
inline double log_gaussian_even_moment(double quad_coef, double spread, int j) {
    detail::check_coefs(quad_coef, spread);
    return -(0.5 + j) * detail::log_rate(quad_coef, spread) + special::log_gamma(special::GammaArg::half_integer(j));
}

inline double gaussian_even_moment(double quad_coef, double spread, int j) {
    return std::exp(log_gaussian_even_moment(quad_coef, spread, j));
}

/// ln of int_0^inf exp(-M a^2 u^2 / 2) u^{2i-1} du = (M a^2 / 2)^{-i} Gamma(i) / 2.
inline double log_halfline_odd_moment(double quad_coef, double spread, int i) {
    detail::check_coefs(quad_coef, spread);
    if (i < 1)
        throw InvalidArgument("halfline_odd_moment needs i >= 1");
    return -i * detail::log_rate(quad_coef, spread) + special::log_gamma(special::GammaArg::integer(i)) -
           std::numbers::ln2;
}

inline double halfline_odd_moment(double quad_coef, double spread, int i) {
    return std::exp(log_halfline_odd_moment(quad_coef, spread, i));
}

/// ln of int_0^cutoff exp(-M a^2 u^2 / 2) u^{2i} du.
/// i = 0 goes through erf(d); i >= 1 through gamma(i + 1/2, d^2), d = sqrt(M a^2 / 2) cutoff.
inline double log_truncated_even_moment(double quad_coef, double spread, double cutoff, int i) {
    detail::check_coefs(quad_coef, spread);
    if (!(cutoff >= 0.0) || i < 0)
        throw InvalidArgument("truncated_even_moment needs cutoff >= 0 and i >= 0");
    const double lr = detail::log_rate(quad_coef, spread);
    const double d = std::exp(0.5 * lr) * cutoff;
    if (i == 0) {
        if (d == 0.0)
            return -std::numeric_limits<double>::infinity();
        return -0.5 * lr + std::log(0.5 * std::sqrt(std::numbers::pi) * special::erf(d));
    }
    return -(0.5 + i) * lr - std::numbers::ln2 + special::log_lower_inc_gamma(i + 0.5, d * d);
}

inline double truncated_even_moment(double quad_coef, double spread, double cutoff, int i) {
    return std::exp(log_truncated_even_moment(quad_coef, spread, cutoff, i));
}

/// ln of int_cutoff^inf exp(-M a^2 u^2 / 2) u^{2i-1} du
///   = halfline_odd_moment - (M a^2 / 2)^{-i} gamma(i, d^2) / 2
///   = (M a^2 / 2)^{-i} Gamma(i, d^2) / 2,
/// evaluated through the upper incomplete gamma so the tail keeps full relative precision.
inline double log_truncated_odd_moment(double quad_coef, double spread, double cutoff, int i) {
    detail::check_coefs(quad_coef, spread);
    if (!(cutoff >= 0.0) || i < 1)
        throw InvalidArgument("truncated_odd_moment needs cutoff >= 0 and i >= 1");
    const double lr = detail::log_rate(quad_coef, spread);
    const double d = std::exp(0.5 * lr) * cutoff;
    return -i * lr - std::numbers::ln2 + special::log_upper_inc_gamma_int(i, d * d);
}

inline double truncated_odd_moment(double quad_coef, double spread, double cutoff, int i) {
    return std::exp(log_truncated_odd_moment(quad_coef, spread, cutoff, i));
}

namespace detail {

/// ln int_R exp(-M a^2 u^2 / 2) (a u + b)^{p-1} du for odd p: only even powers of u survive.
inline double log_odd_p_integral(const Intermediates& in, int p) {
    const int n = p - 1;
    const double a = in.spread, b = in.center;
    LogSum sum;
    for (int j = 0; j <= n / 2; ++j) {
        const int b_pow = n - 2 * j;
        if (b == 0.0 && b_pow > 0)
            continue;
        sum.add(std::log(binomial(n, b_pow)) + 2 * j * std::log(a) + log_pow(std::abs(b), b_pow) +
                log_gaussian_even_moment(in.quad_coef, a, j));
    }
    return sum.log_total();
}

/// ln int_R exp(-M a^2 u^2 / 2) |a u + b|^{p-1} du for even p and b != 0.
///
/// The b < 0 and b > 0 branches differ only by the reflection u -> -u, which
/// maps |a u + b| to |a u + |b||, so both are assembled from |b| with the
/// split point |b| / a. The powers of b are kept nonnegative, so no b^{-k}
/// factor appears and small |b| is safe.
inline double log_even_p_split_integral(const Intermediates& in, int p) {
    const int n = p - 1;
    const double a = in.spread, abs_b = std::abs(in.center);
    const double cutoff = abs_b / a;
    LogSum sum;
    // Odd powers of u: twice the tail beyond the split point.
    for (int i = 1; i <= p / 2; ++i) {
        const int b_pow = p - 2 * i;
        sum.add(std::numbers::ln2 + std::log(binomial(n, b_pow)) + (2 * i - 1) * std::log(a) +
                log_pow(abs_b, b_pow) + log_truncated_odd_moment(in.quad_coef, a, cutoff, i));
    }
    // Even powers of u: twice the mass between 0 and the split point.
    for (int i = 0; i <= (p - 2) / 2; ++i) {
        const int b_pow = p - 1 - 2 * i;
        sum.add(std::numbers::ln2 + std::log(binomial(n, b_pow)) + 2 * i * std::log(a) + log_pow(abs_b, b_pow) +
                log_truncated_even_moment(in.quad_coef, a, cutoff, i));
    }
    return sum.log_total();
}

/// Even p with b = 0: int_R |a u|^{p-1} exp(-M a^2 u^2 / 2) du = 2 a^{p-1} * halfline_odd_moment(p/2).
inline double log_even_p_central_integral(const Intermediates& in, int p) {
    return std::numbers::ln2 + (p - 1) * std::log(in.spread) + log_halfline_odd_moment(in.quad_coef, in.spread, p / 2);
}

} // namespace detail

/// |b| at or below this multiple of a is treated as the central case for even p.
inline constexpr double central_threshold = 1e-14;

/// ln g(y) for the normal-ratio density.
inline double log_density(const NormalRatioModel& model, const RatioPoint& point) {
    const Intermediates in = intermediates(model, point);
    const int p = static_cast<int>(model.p());

    // c a exp(1/2 - M a / 2)
    const double log_prefactor =
        in.log_norm_const + std::log(in.spread) + 0.5 - 0.5 * in.quad_coef * in.spread;

    double log_integral;
    if (p % 2 == 1)
        log_integral = detail::log_odd_p_integral(in, p);
    else if (std::abs(in.center) <= central_threshold * in.spread)
        log_integral = detail::log_even_p_central_integral(in, p);
    else
        log_integral = detail::log_even_p_split_integral(in, p);
    return log_prefactor + log_integral;
}

inline double density(const NormalRatioModel& model, const RatioPoint& point) {
    const double lg = log_density(model, point);
    if (lg < std::log(std::numeric_limits<double>::denorm_min()))
        return 0.0;
    return std::exp(lg);
}

/// Evaluates log_density at every point; each point is independent, so the
/// result does not depend on the number of threads.
inline std::vector<double> log_density_batch(const NormalRatioModel& model, std::span<const RatioPoint> points,
                                             unsigned threads = 1) {
    std::vector<double> out(points.size());
    if (threads <= 1 || points.size() < 2 * threads) {
        for (std::size_t i = 0; i < points.size(); ++i)
            out[i] = log_density(model, points[i]);
        return out;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (points.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                const std::size_t lo = t * chunk, hi = std::min(points.size(), lo + chunk);
                for (std::size_t i = lo; i < hi; ++i)
                    out[i] = log_density(model, points[i]);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    pool.clear();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

} // namespace nratio
