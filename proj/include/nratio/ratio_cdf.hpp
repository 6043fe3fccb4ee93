#pragma once

// CDF of the ratio vector through the linear combinations u_i = x_{i+1} - t_i x_1.
//
// When x_1 > 0, {Y < t} is exactly {u < 0}. In general
//     P(Y < t) = P(u < 0, x_1 > 0) + P(u > 0, x_1 < 0),
// two orthant probabilities of the p-vector (u, x_1). The single orthant
// P(u < 0) is the approximation; it differs from the exact value only on
// {x_1 <= 0}, so |approx - exact| <= P(x_1 <= 0).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <span>
#include <string>

#include "nratio/error.hpp"
#include "nratio/linalg.hpp"
#include "nratio/model.hpp"
#include "nratio/mvn_cdf.hpp"
#include "nratio/random.hpp"

namespace nratio {

/// Mean and covariance of u_i = x_{i+1} - t_i x_1.
struct LinearizedModel {
    Vector mean;
    SpdMatrix cov;
    Vector t;
};

namespace detail {

inline void check_threshold(const NormalRatioModel& model, std::span<const double> t) {
    if (t.size() != model.ratio_dim())
        throw DimensionMismatch("threshold has " + std::to_string(t.size()) + " coordinates, model needs " +
                                std::to_string(model.ratio_dim()));
    for (double v : t)
        if (!std::isfinite(v))
            throw NonFinite("threshold has a non-finite coordinate");
}

/// Also rejects pivots at roundoff level relative to the diagonal, which
/// Cholesky accepts but which leave the orthant probability meaningless.
inline SpdMatrix spd_or_degenerate(const Matrix& m) {
    try {
        SpdMatrix s(m);
        const double floor = 4.0 * static_cast<double>(s.dim()) * std::numeric_limits<double>::epsilon();
        for (std::size_t j = 0; j < s.dim(); ++j) {
            const double l = s.chol()(j, j);
            if (l * l <= floor * m(j, j))
                throw DegenerateCovariance("linearized covariance is numerically singular (pivot " +
                                           std::to_string(j) + ")");
        }
        return s;
    } catch (const NotPositiveDefinite& e) {
        throw DegenerateCovariance(std::string("linearized covariance is degenerate: ") + e.what());
    }
}

inline MvnProbability orthant(std::span<const double> mean, const SpdMatrix& cov, const QmcOptions& opts) {
    const Vector zero(mean.size(), 0.0);
    try {
        return mvn_cdf(mean, cov, zero, opts);
    } catch (const NotPositiveDefinite& e) {
        throw DegenerateCovariance(std::string("linearized covariance is degenerate: ") + e.what());
    }
}

} // namespace detail

inline LinearizedModel linearize(const NormalRatioModel& model, std::span<const double> t) {
    detail::check_threshold(model, t);
    const std::size_t q = model.ratio_dim();
    const auto& mu = model.mu();
    const auto& s = model.sigma();
    Vector mean(q);
    Matrix cov(q, q);
    for (std::size_t i = 0; i < q; ++i) {
        mean[i] = mu[i + 1] - t[i] * mu[0];
        for (std::size_t j = 0; j < q; ++j)
            cov(i, j) = s(i + 1, j + 1) - t[i] * s(0, j + 1) - t[j] * s(i + 1, 0) + t[i] * t[j] * s(0, 0);
    }
    return {std::move(mean), detail::spd_or_degenerate(cov), Vector(t.begin(), t.end())};
}

/// P(x_1 <= 0) = Phi(-mu_1 / sqrt(S_11)); bounds the approximation error.
inline double validity_diagnostic(const NormalRatioModel& model) {
    return std_normal_cdf(-model.mu()[0] / std::sqrt(model.sigma()(0, 0)));
}

/// P(u <= 0), exact when x_1 > 0 almost surely.
inline MvnProbability approx_cdf(const NormalRatioModel& model, std::span<const double> t, const QmcOptions& opts = {}) {
    const LinearizedModel lin = linearize(model, t);
    return detail::orthant(lin.mean, lin.cov, opts);
}

/// P(Y <= t) as the sum of the two orthants of (u, x_1) split by the sign of x_1.
inline MvnProbability exact_cdf(const NormalRatioModel& model, std::span<const double> t, const QmcOptions& opts = {}) {
    detail::check_threshold(model, t);
    const std::size_t q = model.ratio_dim();
    const std::size_t p = model.p();
    const auto& mu = model.mu();
    const auto& s = model.sigma();

    // Augmented vector (u_1, ..., u_q, x_1).
    Vector mean(p);
    Matrix cov(p, p);
    for (std::size_t i = 0; i < q; ++i) {
        mean[i] = mu[i + 1] - t[i] * mu[0];
        for (std::size_t j = 0; j < q; ++j)
            cov(i, j) = s(i + 1, j + 1) - t[i] * s(0, j + 1) - t[j] * s(i + 1, 0) + t[i] * t[j] * s(0, 0);
        cov(i, q) = cov(q, i) = s(i + 1, 0) - t[i] * s(0, 0);
    }
    mean[q] = mu[0];
    cov(q, q) = s(0, 0);

    // Orthant {u <= 0, x_1 > 0}: flip x_1. Orthant {u > 0, x_1 <= 0}: flip u.
    auto flipped = [&](bool flip_u) {
        Vector m = mean;
        Matrix c = cov;
        for (std::size_t i = 0; i < p; ++i) {
            const bool fi = (i < q) == flip_u;
            if (fi)
                m[i] = -m[i];
            for (std::size_t j = 0; j < p; ++j) {
                const bool fj = (j < q) == flip_u;
                if (fi != fj)
                    c(i, j) = -c(i, j);
            }
        }
        return std::pair{m, detail::spd_or_degenerate(c)};
    };
    QmcOptions first = opts, second = opts;
    std::uint64_t sm = opts.seed;
    first.seed = splitmix64(sm);
    second.seed = splitmix64(sm);

    const auto [m1, c1] = flipped(false);
    const auto [m2, c2] = flipped(true);
    const MvnProbability pos = detail::orthant(m1, c1, first);
    const MvnProbability neg = detail::orthant(m2, c2, second);
    MvnProbability out;
    out.value = std::clamp(pos.value + neg.value, 0.0, 1.0);
    out.error_estimate = pos.error_estimate + neg.error_estimate;
    out.method = pos.method;
    return out;
}

} // namespace nratio
