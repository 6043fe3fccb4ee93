#pragma once

// Brute-force checks of the closed-form density. The density oracle
// integrates the defining z-integral directly, evaluating the full quadratic
// form (zW - mu)' S^{-1} (zW - mu) at every node, so it shares nothing with the
// closed form beyond the Cholesky factor.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "nratio/density.hpp"
#include "nratio/error.hpp"
#include "nratio/linalg.hpp"
#include "nratio/model.hpp"
#include "nratio/quadrature.hpp"

namespace nratio {

inline QuadratureResult density_by_quadrature(const NormalRatioModel& model, const RatioPoint& point,
                                              double rel_tol = 1e-10) {
    check_point(model, point);
    if (!(rel_tol >= 1e-13))
        throw InvalidArgument("density_by_quadrature: rel_tol must be >= 1e-13");

    const auto& sigma = model.sigma();
    const Vector w = point.ray();
    const Vector& mu = model.mu();
    const double p_minus_1 = static_cast<double>(model.p() - 1);
    const double m = quad_form(sigma, w);
    const double center = bilinear_form(sigma, w, mu) / m;

    auto log_integrand = [&](double z) {
        if (z == 0.0)
            return -std::numeric_limits<double>::infinity();
        Vector d(w.size());
        for (std::size_t i = 0; i < w.size(); ++i)
            d[i] = z * w[i] - mu[i];
        return p_minus_1 * std::log(std::abs(z)) - 0.5 * quad_form(sigma, d);
    };

    // Peaks of |z|^{p-1} exp(-M (z - b)^2 / 2) solve M z^2 - M b z - (p - 1) = 0.
    const double disc = std::sqrt(center * center + 4.0 * p_minus_1 / m);
    const double root_hi = 0.5 * (center + disc);
    const double root_lo = 0.5 * (center - disc);
    const double shift = std::max({log_integrand(root_hi), log_integrand(root_lo), log_integrand(center)});

    auto integrand = [&](double z) { return std::exp(log_integrand(z) - shift); };
    QuadratureOptions opts;
    opts.rel_tol = rel_tol;
    QuadratureResult r = quad::integrate_real_line(integrand, {0.0, center, root_lo, root_hi}, 1.0 / std::sqrt(m), opts);

    const double log_c = -0.5 * static_cast<double>(model.p()) * std::log(2.0 * std::numbers::pi) -
                         0.5 * sigma.log_det();
    const double scale = std::exp(shift + log_c);
    r.value *= scale;
    r.abs_error_estimate *= scale;
    return r;
}

namespace detail {

/// Location and scale used to compactify the ratio plane around its bulk.
struct RatioFrame {
    Vector center;
    double scale;
};

inline RatioFrame ratio_frame(const NormalRatioModel& model) {
    const auto& mu = model.mu();
    const auto& s = model.sigma();
    const double sd1 = std::sqrt(s(0, 0));
    RatioFrame f;
    f.center.assign(model.ratio_dim(), 0.0);
    double spread = 0.0;
    for (std::size_t i = 0; i < model.ratio_dim(); ++i) {
        if (std::abs(mu[0]) > 0.0)
            f.center[i] = mu[i + 1] / mu[0];
        spread = std::max(spread, s(i + 1, i + 1) + f.center[i] * f.center[i] * s(0, 0));
    }
    f.scale = std::sqrt(spread) / std::max(std::abs(mu[0]), sd1);
    return f;
}

} // namespace detail

/// Integral of the closed-form density over the whole ratio space (target 1).
/// p = 2 uses y = y0 + s tan(theta); p = 3 uses polar coordinates about y0
/// with radius s tan(theta).
inline QuadratureResult normalization_check(const NormalRatioModel& model, double rel_tol = 1e-10) {
    if (model.p() != 2 && model.p() != 3)
        throw InvalidArgument("normalization_check supports p = 2 and p = 3 only");
    const auto frame = detail::ratio_frame(model);
    const double s = frame.scale;
    constexpr double half_pi = 0.5 * std::numbers::pi;

    QuadratureOptions opts;
    opts.rel_tol = rel_tol;

    if (model.p() == 2) {
        auto f = [&](double theta) {
            const double t = std::tan(theta);
            const double c = std::cos(theta);
            return density(model, RatioPoint({frame.center[0] + s * t})) * s / (c * c);
        };
        return quad::integrate_segments({{f, -half_pi, 0.0}, {f, 0.0, half_pi}}, opts);
    }

    QuadratureOptions inner_opts = opts;
    inner_opts.rel_tol = std::max(1e-13, 0.1 * rel_tol);
    bool inner_converged = true;
    double inner_rel_err = 0.0;
    std::size_t inner_evals = 0;
    auto radial = [&](double phi) {
        const double cphi = std::cos(phi), sphi = std::sin(phi);
        auto g = [&](double theta) {
            const double r = s * std::tan(theta);
            const double c = std::cos(theta);
            const RatioPoint y({frame.center[0] + r * cphi, frame.center[1] + r * sphi});
            return density(model, y) * r * s / (c * c);
        };
        const auto res = quad::integrate(g, 0.0, half_pi, inner_opts);
        inner_converged = inner_converged && res.converged;
        inner_evals += res.evaluations;
        if (res.value > 0.0)
            inner_rel_err = std::max(inner_rel_err, res.abs_error_estimate / res.value);
        return res.value;
    };
    QuadratureResult out = quad::integrate(radial, 0.0, 2.0 * std::numbers::pi, opts);
    out.abs_error_estimate += inner_rel_err * std::abs(out.value);
    out.evaluations += inner_evals;
    out.converged = out.converged && inner_converged;
    return out;
}

} // namespace nratio
