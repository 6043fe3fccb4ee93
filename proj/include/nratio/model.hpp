#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "nratio/error.hpp"
#include "nratio/linalg.hpp"

namespace nratio {

/// Law of Y = (x_2/x_1, ..., x_p/x_1) for X ~ N(mu, sigma), p >= 2.
class NormalRatioModel {
public:
    NormalRatioModel(Vector mu, SpdMatrix sigma) : mu_(std::move(mu)), sigma_(std::move(sigma)) {
        if (mu_.size() < 2)
            throw InvalidArgument("model dimension must be at least 2, got " + std::to_string(mu_.size()));
        if (mu_.size() != sigma_.dim())
            throw DimensionMismatch("mean has " + std::to_string(mu_.size()) + " entries but covariance is " +
                                    std::to_string(sigma_.dim()) + "x" + std::to_string(sigma_.dim()));
        for (double m : mu_)
            if (!std::isfinite(m))
                throw NonFinite("mean has a non-finite entry");
        white_mu_ = sigma_.solve_lower(mu_);
    }

    NormalRatioModel(Vector mu, const Matrix& sigma) : NormalRatioModel(std::move(mu), SpdMatrix(sigma)) {}

    std::size_t p() const noexcept { return mu_.size(); }
    /// Dimension of the ratio vector Y.
    std::size_t ratio_dim() const noexcept { return mu_.size() - 1; }
    const Vector& mu() const noexcept { return mu_; }
    const SpdMatrix& sigma() const noexcept { return sigma_; }
    /// L^{-1} mu, with L the Cholesky factor of sigma.
    const Vector& whitened_mean() const noexcept { return white_mu_; }

private:
    Vector mu_;
    SpdMatrix sigma_;
    Vector white_mu_;
};

/// Evaluation point y of the ratio vector.
struct RatioPoint {
    Vector y;

    RatioPoint() = default;
    explicit RatioPoint(Vector values) : y(std::move(values)) {
        for (double v : y)
            if (!std::isfinite(v))
                throw NonFinite("ratio point has a non-finite coordinate");
    }

    /// W = (1, y_1, ..., y_{p-1}), the ray direction with X = z W.
    Vector ray() const {
        Vector w(y.size() + 1);
        w[0] = 1.0;
        std::copy(y.begin(), y.end(), w.begin() + 1);
        return w;
    }
};

inline void check_point(const NormalRatioModel& model, const RatioPoint& point) {
    if (point.y.size() != model.ratio_dim())
        throw DimensionMismatch("ratio point has " + std::to_string(point.y.size()) + " coordinates, model needs " +
                                std::to_string(model.ratio_dim()));
}

} // namespace nratio
