#pragma once

// Shared generators and test-only oracles. Nothing here calls into the code
// paths it is used to check.

#include <cmath>
#include <cstdint>
#include <vector>

#include "nratio/linalg.hpp"
#include "nratio/model.hpp"
#include "nratio/random.hpp"

namespace nratio::testing {

inline double uniform(Xoshiro256& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

/// A A' + eps I with A uniform in [-1, 1].
inline Matrix random_spd(Xoshiro256& rng, std::size_t n, double eps = 0.3) {
    Matrix a(n, n);
    for (auto& v : a.data)
        v = uniform(rng, -1.0, 1.0);
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double t = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                t += a(i, k) * a(j, k);
            s(i, j) = t + (i == j ? eps : 0.0);
        }
    return s;
}

inline Vector random_vector(Xoshiro256& rng, std::size_t n, double lo, double hi) {
    Vector v(n);
    for (auto& x : v)
        x = uniform(rng, lo, hi);
    return v;
}

inline NormalRatioModel random_model(Xoshiro256& rng, std::size_t p, double mean_range = 2.0) {
    return NormalRatioModel(random_vector(rng, p, -mean_range, mean_range), random_spd(rng, p));
}

/// Gauss-Jordan inverse with partial pivoting.
inline Matrix dense_inverse(Matrix m) {
    const std::size_t n = m.rows;
    Matrix inv = Matrix::identity(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(m(r, c)) > std::abs(m(piv, c)))
                piv = r;
        for (std::size_t j = 0; j < n; ++j) {
            std::swap(m(c, j), m(piv, j));
            std::swap(inv(c, j), inv(piv, j));
        }
        const double d = m(c, c);
        for (std::size_t j = 0; j < n; ++j) {
            m(c, j) /= d;
            inv(c, j) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c)
                continue;
            const double f = m(r, c);
            for (std::size_t j = 0; j < n; ++j) {
                m(r, j) -= f * m(c, j);
                inv(r, j) -= f * inv(c, j);
            }
        }
    }
    return inv;
}

/// Determinant by cofactor expansion along the first row.
inline double cofactor_det(const Matrix& m) {
    const std::size_t n = m.rows;
    if (n == 1)
        return m(0, 0);
    double det = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        Matrix minor(n - 1, n - 1);
        for (std::size_t i = 1; i < n; ++i)
            for (std::size_t j = 0, k = 0; j < n; ++j)
                if (j != c)
                    minor(i - 1, k++) = m(i, j);
        det += (c % 2 == 0 ? 1.0 : -1.0) * m(0, c) * cofactor_det(minor);
    }
    return det;
}

inline double explicit_quad_form(const Matrix& inv, const Vector& u, const Vector& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
            s += u[i] * inv(i, j) * v[j];
    return s;
}

/// Maclaurin series of erf in long double.
inline double erf_taylor(double x, int terms = 30) {
    long double sum = 0.0L, fact = 1.0L;
    const long double xl = x;
    for (int n = 0; n < terms; ++n) {
        if (n > 0)
            fact *= n;
        const long double term = std::pow(xl, 2 * n + 1) / (fact * (2 * n + 1));
        sum += (n % 2 == 0 ? term : -term);
    }
    return static_cast<double>(2.0L * sum / std::sqrt(3.14159265358979323846264338327950288L));
}

/// Composite Gauss-Legendre (5 nodes per panel) on [lo, hi]; fixed rule, no adaptivity.
template <class F>
double gauss_legendre_composite(const F& f, double lo, double hi, int panels) {
    static constexpr double x[5] = {0.0, 0.5384693101056831, -0.5384693101056831, 0.9061798459386640,
                                    -0.9061798459386640};
    static constexpr double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                    0.2369268850561891, 0.2369268850561891};
    const double h = (hi - lo) / panels;
    double s = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double c = lo + (k + 0.5) * h;
        for (int i = 0; i < 5; ++i)
            s += w[i] * f(c + 0.5 * h * x[i]);
    }
    return 0.5 * h * s;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

} // namespace nratio::testing
