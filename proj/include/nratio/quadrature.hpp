#pragma once

// Globally adaptive 21-point Gauss-Kronrod integration over a set of panels,
// with maps for semi-infinite ranges. Panels are bisected in order of largest
// error estimate until the summed error meets the tolerance.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

namespace nratio {

struct QuadratureResult {
    double value = 0.0;
    double abs_error_estimate = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

struct QuadratureOptions {
    double rel_tol = 1e-10;
    double abs_tol = 0.0;
    std::size_t max_panels = 10000;
};

namespace quad {

// 21-point Kronrod abscissae and weights with the embedded 10-point Gauss weights (QUADPACK qk21).
inline constexpr std::array<double, 11> kronrod_x = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452, 0.930157491355708226001207180059508,
    0.865063366688984510732096688423493, 0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784, 0.294392862701460198131126603103866,
    0.148874338981631210884826001129720, 0.0};
inline constexpr std::array<double, 11> kronrod_w = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390, 0.054755896574351996031381300244580,
    0.075039674810919952767043140916190, 0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707, 0.142775938577060080797094273138717,
    0.147739104901338491374841515972068, 0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> gauss_w = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697, 0.219086362515982043995534934228163,
    0.269266719309996355091226921569469, 0.295524224714752870173892994651338};

struct PanelEstimate {
    double lo = 0.0;
    double hi = 0.0;
    double value = 0.0;
    double error = 0.0;
    std::size_t segment = 0;
};

template <class F>
PanelEstimate gauss_kronrod_21(const F& f, double lo, double hi) {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = f(center);
    double res_k = kronrod_w[10] * fc;
    double res_g = 0.0;
    double res_abs = std::abs(res_k);
    std::array<double, 10> f1{}, f2{};
    for (std::size_t j = 0; j < 10; ++j) {
        const double dx = half * kronrod_x[j];
        f1[j] = f(center - dx);
        f2[j] = f(center + dx);
        const double sum = f1[j] + f2[j];
        res_k += kronrod_w[j] * sum;
        res_abs += kronrod_w[j] * (std::abs(f1[j]) + std::abs(f2[j]));
        if (j % 2 == 1)
            res_g += gauss_w[j / 2] * sum;
    }
    const double mean = 0.5 * res_k;
    double res_asc = kronrod_w[10] * std::abs(fc - mean);
    for (std::size_t j = 0; j < 10; ++j)
        res_asc += kronrod_w[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));

    const double scale = std::abs(half);
    res_k *= half;
    res_g *= half;
    res_abs *= scale;
    res_asc *= scale;
    double err = std::abs(res_k - res_g);
    if (res_asc != 0.0 && err != 0.0)
        err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (res_abs > std::numeric_limits<double>::min() / (50.0 * eps))
        err = std::max(err, 50.0 * eps * res_abs);
    return {lo, hi, res_k, err, 0};
}

/// A finite range [lo, hi] of a (possibly transformed) integrand.
struct Segment {
    std::function<double(double)> f;
    double lo;
    double hi;
};

/// Integrates the sum of all segments jointly, refining the worst panel first.
inline QuadratureResult integrate_segments(const std::vector<Segment>& segments, const QuadratureOptions& opts) {
    auto worse = [](const PanelEstimate& a, const PanelEstimate& b) { return a.error < b.error; };
    std::priority_queue<PanelEstimate, std::vector<PanelEstimate>, decltype(worse)> heap(worse);

    QuadratureResult out;
    double total = 0.0, total_err = 0.0;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (!(segments[s].hi > segments[s].lo))
            continue;
        auto est = gauss_kronrod_21(segments[s].f, segments[s].lo, segments[s].hi);
        est.segment = s;
        out.evaluations += 21;
        total += est.value;
        total_err += est.error;
        heap.push(est);
    }

    auto done = [&] { return total_err <= std::max(opts.abs_tol, opts.rel_tol * std::abs(total)); };
    while (!heap.empty() && !done() && heap.size() < opts.max_panels) {
        const PanelEstimate worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi)) {
            // Panel can no longer be split in double precision.
            heap.push(worst);
            break;
        }
        const auto& f = segments[worst.segment].f;
        auto left = gauss_kronrod_21(f, worst.lo, mid);
        auto right = gauss_kronrod_21(f, mid, worst.hi);
        left.segment = right.segment = worst.segment;
        out.evaluations += 42;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum from the panels to shed the drift of the running updates.
    total = 0.0;
    total_err = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        total_err += heap.top().error;
        heap.pop();
    }
    out.value = total;
    out.abs_error_estimate = total_err;
    out.converged = done();
    return out;
}

template <class F>
QuadratureResult integrate(F f, double lo, double hi, const QuadratureOptions& opts = {}) {
    if (hi < lo) {
        auto r = integrate(std::move(f), hi, lo, opts);
        r.value = -r.value;
        return r;
    }
    return integrate_segments({Segment{std::function<double(double)>(std::move(f)), lo, hi}}, opts);
}

/// Segment covering [start, +inf) via x = start + scale * t / (1 - t).
template <class F>
Segment upper_tail(F f, double start, double scale) {
    return Segment{[f = std::move(f), start, scale](double t) {
                       if (t >= 1.0)
                           return 0.0;
                       const double one_minus = 1.0 - t;
                       const double x = start + scale * t / one_minus;
                       const double v = f(x);
                       return v == 0.0 ? 0.0 : v * scale / (one_minus * one_minus);
                   },
                   0.0, 1.0};
}

/// Segment covering (-inf, start] via x = start - scale * t / (1 - t).
template <class F>
Segment lower_tail(F f, double start, double scale) {
    return Segment{[f = std::move(f), start, scale](double t) {
                       if (t >= 1.0)
                           return 0.0;
                       const double one_minus = 1.0 - t;
                       const double x = start - scale * t / one_minus;
                       const double v = f(x);
                       return v == 0.0 ? 0.0 : v * scale / (one_minus * one_minus);
                   },
                   0.0, 1.0};
}

/// Integral over the whole real line, split at the given breakpoints.
template <class F>
QuadratureResult integrate_real_line(const F& f, std::vector<double> breaks, double scale,
                                     const QuadratureOptions& opts = {}) {
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    std::vector<Segment> segs;
    segs.push_back(lower_tail(f, breaks.front(), scale));
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        segs.push_back(Segment{f, breaks[i], breaks[i + 1]});
    segs.push_back(upper_tail(f, breaks.back(), scale));
    return integrate_segments(segs, opts);
}

} // namespace quad
} // namespace nratio
