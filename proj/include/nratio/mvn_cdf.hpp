#pragma once

// Normal probabilities: univariate Phi, the bivariate CDF, and a randomized
// quasi-Monte Carlo CDF for three or more dimensions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nratio/error.hpp"
#include "nratio/linalg.hpp"
#include "nratio/random.hpp"
#include "nratio/special.hpp"

namespace nratio {

inline double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Phi(x) = erfc(-x / sqrt 2) / 2, which keeps full relative precision in the lower tail.
inline double std_normal_cdf(double x) {
    if (std::isnan(x))
        throw NonFinite("std_normal_cdf: NaN argument");
    return 0.5 * special::erfc(-x / std::numbers::sqrt2);
}

/// Inverse of Phi (Wichura, AS 241), followed by one Newton step against erfc.
inline double normal_quantile(double prob) {
    if (!(prob >= 0.0 && prob <= 1.0))
        throw InvalidArgument("normal_quantile: probability outside [0, 1]");
    if (prob == 0.0)
        return -std::numeric_limits<double>::infinity();
    if (prob == 1.0)
        return std::numeric_limits<double>::infinity();
    const double q = prob - 0.5;
    double x;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        x = q *
            (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                 45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
              133.14166789178437745) * r + 3.387132872796366608) /
            (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                 21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
              42.313330701600911252) * r + 1.0);
    } else {
        double r = q < 0.0 ? prob : 1.0 - prob;
        r = std::sqrt(-std::log(r));
        if (r <= 5.0) {
            r -= 1.6;
            x = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                     1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                  4.6303378461565452959) * r + 1.42343711074968357734) /
                (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) *
                         r + 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) *
                     r + 2.05319162663775882187) * r + 1.0);
        } else {
            r -= 5.0;
            x = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) *
                         r + 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) *
                     r + 5.4637849111641143699) * r + 6.6579046435011037772) /
                (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) *
                         r + 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) *
                     r + 0.59983220655588793769) * r + 1.0);
        }
        if (q < 0.0)
            x = -x;
    }
    const double pdf = std_normal_pdf(x);
    if (pdf > 0.0)
        x -= (std_normal_cdf(x) - prob) / pdf;
    return x;
}

namespace detail {

/// Positive Gauss-Legendre nodes and weights on [-1, 1] for even n, by Newton iteration.
struct GaussLegendreHalf {
    std::vector<double> x;
    std::vector<double> w;
};

inline GaussLegendreHalf gauss_legendre_half(int n) {
    GaussLegendreHalf out;
    for (int i = 1; i <= n / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-17)
                break;
        }
        out.x.push_back(z);
        out.w.push_back(2.0 / ((1.0 - z * z) * dp * dp));
    }
    return out;
}

inline const GaussLegendreHalf& legendre_rule(int n) {
    static const GaussLegendreHalf r6 = gauss_legendre_half(6);
    static const GaussLegendreHalf r12 = gauss_legendre_half(12);
    static const GaussLegendreHalf r20 = gauss_legendre_half(20);
    return n == 6 ? r6 : (n == 12 ? r12 : r20);
}

/// P(X > h, Y > k) for a standard bivariate normal with correlation r
/// (Drezner-Wesolowsky single-integral form as refined by Genz).
inline double bvn_upper(double h, double k, double r) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double phi_mh = std_normal_cdf(-h), phi_mk = std_normal_cdf(-k);
    if (r == 0.0)
        return phi_mh * phi_mk;
    const auto& rule = legendre_rule(std::abs(r) < 0.3 ? 6 : (std::abs(r) < 0.75 ? 12 : 20));
    double hk = h * k;
    double bvn = 0.0;
    if (std::abs(r) < 0.925) {
        const double hs = 0.5 * (h * h + k * k);
        const double asr = 0.5 * std::asin(r);
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            for (double xi : {1.0 - rule.x[i], 1.0 + rule.x[i]}) {
                const double sn = std::sin(asr * xi);
                bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        return bvn * asr / two_pi + phi_mh * phi_mk;
    }
    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    if (std::abs(r) < 1.0) {
        const double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        const double bs = (h - k) * (h - k);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 16.0;
        double asr = -0.5 * (bs / as + hk);
        if (asr > -100.0)
            bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
        if (hk > -100.0) {
            const double b = std::sqrt(bs);
            const double sp = std::sqrt(two_pi) * std_normal_cdf(-b / a);
            bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a *= 0.5;
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            for (double xi : {1.0 - rule.x[i], 1.0 + rule.x[i]}) {
                const double xs = (a * xi) * (a * xi);
                const double asr_i = -0.5 * (bs / xs + hk);
                if (asr_i <= -100.0)
                    continue;
                const double rs = std::sqrt(1.0 - xs);
                const double sp = 1.0 + c * xs * (1.0 + d * xs);
                const double ep = std::exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                bvn += a * rule.w[i] * std::exp(asr_i) * (ep - sp);
            }
        }
        bvn = -bvn / two_pi;
    }
    if (r > 0.0)
        return bvn + std_normal_cdf(-std::max(h, k));
    if (h >= k)
        return -bvn;
    const double l = h < 0.0 ? std_normal_cdf(k) - std_normal_cdf(h) : std_normal_cdf(-h) - std_normal_cdf(-k);
    return l - bvn;
}

} // namespace detail

/// P(Z1 <= h, Z2 <= k) for a standard bivariate normal with correlation rho.
/// Arguments are put in a canonical order first, so the result is exactly symmetric in (h, k).
inline double bvn_cdf(double h, double k, double rho) {
    if (std::isnan(h) || std::isnan(k) || std::isnan(rho))
        throw NonFinite("bvn_cdf: NaN argument");
    if (!(std::abs(rho) < 1.0))
        throw InvalidArgument("bvn_cdf: correlation must lie in (-1, 1)");
    if (h > k)
        std::swap(h, k);
    if (h == -std::numeric_limits<double>::infinity())
        return 0.0;
    if (k == std::numeric_limits<double>::infinity())
        return std_normal_cdf(h);
    return std::clamp(detail::bvn_upper(-h, -k, rho), 0.0, 1.0);
}

enum class MvnMethod { univariate, bivariate, qmc };

inline const char* to_string(MvnMethod m) {
    switch (m) {
    case MvnMethod::univariate: return "univariate";
    case MvnMethod::bivariate: return "bivariate";
    case MvnMethod::qmc: return "qmc";
    }
    return "?";
}

struct MvnProbability {
    double value = 0.0;
    double error_estimate = 0.0;
    MvnMethod method = MvnMethod::univariate;
};

struct QmcOptions {
    std::size_t n_points = std::size_t{1} << 14;  ///< lattice points per shift
    std::size_t n_shifts = 12;
    std::uint64_t seed = 0x5EED;
};

namespace detail {

inline constexpr std::array<int, 30> lattice_primes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                                       31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
                                                       73, 79, 83, 89, 97, 101, 103, 107, 109, 113};

/// Lower Cholesky factor with variables reordered so that the most
/// constraining limits are integrated first (Genz-Bretz prioritization).
struct OrderedProblem {
    Matrix chol;
    Vector upper;  // centered upper limits in the new order
};

inline OrderedProblem order_variables(const Matrix& cov, Vector upper) {
    const std::size_t d = upper.size();
    Matrix c = cov;
    Matrix l(d, d);
    Vector expect(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        std::size_t best = k;
        double best_prob = std::numeric_limits<double>::infinity();
        for (std::size_t i = k; i < d; ++i) {
            double var = c(i, i), shift = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                var -= l(i, j) * l(i, j);
                shift += l(i, j) * expect[j];
            }
            if (!(var > 0.0))
                throw NotPositiveDefinite("covariance is not positive definite");
            const double prob = std_normal_cdf((upper[i] - shift) / std::sqrt(var));
            if (prob < best_prob) {
                best_prob = prob;
                best = i;
            }
        }
        if (best != k) {
            std::swap(upper[k], upper[best]);
            for (std::size_t j = 0; j < d; ++j)
                std::swap(c(k, j), c(best, j));
            for (std::size_t j = 0; j < d; ++j)
                std::swap(c(j, k), c(j, best));
            for (std::size_t j = 0; j < k; ++j)
                std::swap(l(k, j), l(best, j));
        }
        double var = c(k, k), shift = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            var -= l(k, j) * l(k, j);
            shift += l(k, j) * expect[j];
        }
        const double lkk = std::sqrt(var);
        l(k, k) = lkk;
        for (std::size_t i = k + 1; i < d; ++i) {
            double s = c(i, k);
            for (std::size_t j = 0; j < k; ++j)
                s -= l(i, j) * l(k, j);
            l(i, k) = s / lkk;
        }
        // Mean of a standard normal truncated to (-inf, bt].
        const double bt = (upper[k] - shift) / lkk;
        const double mass = std_normal_cdf(bt);
        expect[k] = mass > 1e-300 ? -std_normal_pdf(bt) / mass : bt;
    }
    return {l, upper};
}

/// Integrand on the unit cube after sequential conditioning.
inline double conditioned_integrand(const OrderedProblem& prob, std::span<const double> x, Vector& scratch) {
    const std::size_t d = prob.upper.size();
    double e = std_normal_cdf(prob.upper[0] / prob.chol(0, 0));
    double f = e;
    for (std::size_t k = 1; k < d && f > 0.0; ++k) {
        const double arg = std::clamp(x[k - 1] * e, std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
        scratch[k - 1] = normal_quantile(arg);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            s += prob.chol(k, j) * scratch[j];
        e = std_normal_cdf((prob.upper[k] - s) / prob.chol(k, k));
        f *= e;
    }
    return f;
}

} // namespace detail

/// P(X <= upper) for X ~ N(mean, cov). One and two dimensions are computed
/// directly; higher dimensions use a randomly shifted Richtmyer lattice
/// (generators frac(sqrt(prime))) with the tent periodization and antithetic
/// pairs. The error estimate is three standard errors of the shift means.
inline MvnProbability mvn_cdf(std::span<const double> mean, const SpdMatrix& cov, std::span<const double> upper,
                              const QmcOptions& opts = {}) {
    const std::size_t d = mean.size();
    if (d == 0 || upper.size() != d || cov.dim() != d)
        throw DimensionMismatch("mvn_cdf: mean, covariance and upper limits must share one dimension");
    for (std::size_t i = 0; i < d; ++i)
        if (std::isnan(upper[i]) || std::isnan(mean[i]))
            throw NonFinite("mvn_cdf: NaN limit or mean");

    Vector centered(d);
    for (std::size_t i = 0; i < d; ++i)
        centered[i] = upper[i] - mean[i];

    if (d == 1)
        return {std_normal_cdf(centered[0] / std::sqrt(cov(0, 0))), 2e-16, MvnMethod::univariate};
    if (d == 2) {
        const double s1 = std::sqrt(cov(0, 0)), s2 = std::sqrt(cov(1, 1));
        const double rho = cov(0, 1) / (s1 * s2);
        return {bvn_cdf(centered[0] / s1, centered[1] / s2, rho), 5e-15, MvnMethod::bivariate};
    }
    if (d > detail::lattice_primes.size() + 1)
        throw InvalidArgument("mvn_cdf supports at most " + std::to_string(detail::lattice_primes.size() + 1) +
                              " dimensions");
    if (opts.n_shifts < 2 || opts.n_points == 0)
        throw InvalidArgument("mvn_cdf needs n_shifts >= 2 and n_points >= 1");

    const auto prob = detail::order_variables(cov.entries(), centered);
    Vector alpha(d - 1);
    for (std::size_t j = 0; j + 1 < d; ++j) {
        const double r = std::sqrt(static_cast<double>(detail::lattice_primes[j]));
        alpha[j] = r - std::floor(r);
    }

    Xoshiro256 rng(opts.seed);
    Vector shift(d - 1), x(d - 1), xa(d - 1), scratch(d);
    double mean_est = 0.0, m2 = 0.0;
    for (std::size_t s = 0; s < opts.n_shifts; ++s) {
        for (auto& v : shift)
            v = rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 1; i <= opts.n_points; ++i) {
            for (std::size_t j = 0; j + 1 < d; ++j) {
                double t = static_cast<double>(i) * alpha[j] + shift[j];
                t -= std::floor(t);
                const double tent = std::abs(2.0 * t - 1.0);
                x[j] = tent;
                xa[j] = 1.0 - tent;
            }
            acc += 0.5 * (detail::conditioned_integrand(prob, x, scratch) +
                          detail::conditioned_integrand(prob, xa, scratch));
        }
        const double est = acc / static_cast<double>(opts.n_points);
        // Welford update over shifts.
        const double delta = est - mean_est;
        mean_est += delta / static_cast<double>(s + 1);
        m2 += delta * (est - mean_est);
    }
    const double k = static_cast<double>(opts.n_shifts);
    const double err = 3.0 * std::sqrt(m2 / (k - 1.0) / k);
    if (mean_est < -err - 1e-12 || mean_est > 1.0 + err + 1e-12)
        throw NumericalFailure("mvn_cdf: estimate " + std::to_string(mean_est) + " is outside [0, 1]");
    return {std::clamp(mean_est, 0.0, 1.0), err, MvnMethod::qmc};
}

} // namespace nratio
