#pragma once

// Dense symmetric positive-definite algebra on small matrices. The inverse is
// never formed; every application of it goes through the cached Cholesky
// factor.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nratio/error.hpp"

namespace nratio {

using Vector = std::vector<double>;

/// Row-major dense matrix with value semantics.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(const std::vector<Vector>& rs) {
        Matrix m(rs.size(), rs.empty() ? 0 : rs.front().size());
        for (std::size_t i = 0; i < m.rows; ++i) {
            if (rs[i].size() != m.cols)
                throw DimensionMismatch("row " + std::to_string(i) + " has " + std::to_string(rs[i].size()) +
                                        " entries, expected " + std::to_string(m.cols));
            std::copy(rs[i].begin(), rs[i].end(), m.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
        }
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

inline double dot(std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        s += u[i] * v[i];
    return s;
}

class SpdMatrix {
public:
    static constexpr double symmetry_tolerance = 1e-12;

    /// Validates symmetry, symmetrizes, and computes the lower Cholesky factor.
    /// Throws NotSymmetric, NotPositiveDefinite, NonFinite or DimensionMismatch.
    explicit SpdMatrix(const Matrix& m) : dim_(m.rows), entries_(m), chol_(m.rows, m.rows) {
        if (m.rows != m.cols)
            throw DimensionMismatch("covariance must be square, got " + std::to_string(m.rows) + "x" +
                                    std::to_string(m.cols));
        if (dim_ == 0)
            throw DimensionMismatch("covariance must have dimension >= 1");
        for (double x : m.data)
            if (!std::isfinite(x))
                throw NonFinite("covariance has a non-finite entry");
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = i + 1; j < dim_; ++j) {
                const double lhs = m(i, j), rhs = m(j, i);
                if (std::abs(lhs - rhs) > symmetry_tolerance * std::max(1.0, std::abs(lhs)))
                    throw NotSymmetric("covariance is not symmetric at (" + std::to_string(i) + ", " +
                                       std::to_string(j) + ")");
                const double avg = 0.5 * (lhs + rhs);
                entries_(i, j) = avg;
                entries_(j, i) = avg;
            }
        }
        factor();
    }

    explicit SpdMatrix(const std::vector<Vector>& rows) : SpdMatrix(Matrix::from_rows(rows)) {}

    std::size_t dim() const noexcept { return dim_; }
    const Matrix& entries() const noexcept { return entries_; }
    const Matrix& chol() const noexcept { return chol_; }
    double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }

    /// Forward substitution: returns L^{-1} v.
    Vector solve_lower(std::span<const double> v) const {
        check_len(v.size());
        Vector x(v.begin(), v.end());
        for (std::size_t i = 0; i < dim_; ++i) {
            double s = x[i];
            for (std::size_t k = 0; k < i; ++k)
                s -= chol_(i, k) * x[k];
            x[i] = s / chol_(i, i);
        }
        return x;
    }

    /// Back substitution: returns L^{-T} v.
    Vector solve_upper(std::span<const double> v) const {
        check_len(v.size());
        Vector x(v.begin(), v.end());
        for (std::size_t ii = dim_; ii-- > 0;) {
            double s = x[ii];
            for (std::size_t k = ii + 1; k < dim_; ++k)
                s -= chol_(k, ii) * x[k];
            x[ii] = s / chol_(ii, ii);
        }
        return x;
    }

    /// Returns Sigma^{-1} v.
    Vector solve(std::span<const double> v) const { return solve_upper(solve_lower(v)); }

    /// Returns L v.
    Vector multiply_lower(std::span<const double> v) const {
        check_len(v.size());
        Vector out(dim_, 0.0);
        for (std::size_t i = 0; i < dim_; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k <= i; ++k)
                s += chol_(i, k) * v[k];
            out[i] = s;
        }
        return out;
    }

    double log_det() const noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < dim_; ++i)
            s += std::log(chol_(i, i));
        return 2.0 * s;
    }

private:
    void check_len(std::size_t n) const {
        if (n != dim_)
            throw DimensionMismatch("vector of length " + std::to_string(n) + " applied to a " +
                                    std::to_string(dim_) + "x" + std::to_string(dim_) + " matrix");
    }

    void factor() {
        for (std::size_t j = 0; j < dim_; ++j) {
            double d = entries_(j, j);
            for (std::size_t k = 0; k < j; ++k)
                d -= chol_(j, k) * chol_(j, k);
            if (!(d > 0.0))
                throw NotPositiveDefinite("covariance is not positive definite (pivot " + std::to_string(j) +
                                          " is " + std::to_string(d) + ")");
            const double ljj = std::sqrt(d);
            chol_(j, j) = ljj;
            for (std::size_t i = j + 1; i < dim_; ++i) {
                double s = entries_(i, j);
                for (std::size_t k = 0; k < j; ++k)
                    s -= chol_(i, k) * chol_(j, k);
                chol_(i, j) = s / ljj;
            }
        }
    }

    std::size_t dim_;
    Matrix entries_;
    Matrix chol_;
};

inline SpdMatrix factorize(const Matrix& m) { return SpdMatrix(m); }

/// v' Sigma^{-1} v
inline double quad_form(const SpdMatrix& m, std::span<const double> v) {
    const Vector x = m.solve_lower(v);
    return dot(x, x);
}

/// u' Sigma^{-1} v
inline double bilinear_form(const SpdMatrix& m, std::span<const double> u, std::span<const double> v) {
    const Vector x = m.solve_lower(u);
    const Vector y = m.solve_lower(v);
    return dot(x, y);
}

inline double log_det(const SpdMatrix& m) noexcept { return m.log_det(); }

} // namespace nratio
