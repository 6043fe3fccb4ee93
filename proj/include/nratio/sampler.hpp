#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "nratio/error.hpp"
#include "nratio/linalg.hpp"
#include "nratio/model.hpp"
#include "nratio/random.hpp"

namespace nratio {

/// Ratio samples, one row per draw of X with x_1 != 0.
struct SampleBatch {
    Matrix ratios;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::size_t redraws = 0;  ///< rows dropped because x_1 was exactly 0
};

/// Rows [k R, (k + 1) R) come from stream k, whatever the thread count.
inline constexpr std::size_t rows_per_stream = std::size_t{1} << 16;

/// n i.i.d. rows mu + L xi with L the Cholesky factor of sigma.
inline Matrix sample_mvn(const Vector& mu, const SpdMatrix& sigma, std::size_t n, std::uint64_t seed,
                         unsigned threads = 1) {
    if (n == 0)
        throw InvalidArgument("sample size must be positive");
    if (mu.size() != sigma.dim())
        throw DimensionMismatch("mean and covariance dimensions differ");
    const std::size_t p = mu.size();
    Matrix out(n, p);
    const std::size_t streams = (n + rows_per_stream - 1) / rows_per_stream;

    auto fill_stream = [&](std::size_t k) {
        NormalStream normal(seed, k);
        Vector xi(p);
        const std::size_t lo = k * rows_per_stream, hi = std::min(n, lo + rows_per_stream);
        for (std::size_t r = lo; r < hi; ++r) {
            for (auto& v : xi)
                v = normal();
            const Vector x = sigma.multiply_lower(xi);
            auto row = out.row(r);
            for (std::size_t j = 0; j < p; ++j)
                row[j] = mu[j] + x[j];
        }
    };

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(streams)));
    if (threads == 1) {
        for (std::size_t k = 0; k < streams; ++k)
            fill_stream(k);
        return out;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t k = t; k < streams; k += threads)
                        fill_stream(k);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

inline Matrix sample_mvn(const NormalRatioModel& model, std::size_t n, std::uint64_t seed, unsigned threads = 1) {
    return sample_mvn(model.mu(), model.sigma(), n, seed, threads);
}

/// Maps each row x to (x_2/x_1, ..., x_p/x_1); rows with x_1 == 0 are dropped and counted.
inline SampleBatch to_ratios(const Matrix& x, std::uint64_t seed = 0) {
    if (x.cols < 2)
        throw DimensionMismatch("ratio samples need at least two columns");
    SampleBatch b;
    b.seed = seed;
    b.ratios = Matrix(x.rows, x.cols - 1);
    std::size_t kept = 0;
    for (std::size_t r = 0; r < x.rows; ++r) {
        const auto row = x.row(r);
        if (row[0] == 0.0) {
            ++b.redraws;
            continue;
        }
        auto dst = b.ratios.row(kept++);
        for (std::size_t j = 1; j < x.cols; ++j)
            dst[j - 1] = row[j] / row[0];
    }
    b.ratios.rows = kept;
    b.ratios.data.resize(kept * b.ratios.cols);
    b.n = kept;
    return b;
}

inline SampleBatch sample_ratios(const NormalRatioModel& model, std::size_t n, std::uint64_t seed,
                                 unsigned threads = 1) {
    return to_ratios(sample_mvn(model, n, seed, threads), seed);
}

/// Fraction of rows strictly below t in every coordinate.
inline double empirical_cdf(const SampleBatch& batch, std::span<const double> t) {
    if (t.size() != batch.ratios.cols)
        throw DimensionMismatch("threshold has " + std::to_string(t.size()) + " coordinates, samples have " +
                                std::to_string(batch.ratios.cols));
    if (batch.n == 0)
        throw InvalidArgument("empty sample batch");
    std::size_t hits = 0;
    for (std::size_t r = 0; r < batch.ratios.rows; ++r) {
        const auto row = batch.ratios.row(r);
        bool below = true;
        for (std::size_t j = 0; j < row.size() && below; ++j)
            below = row[j] < t[j];
        hits += below ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(batch.n);
}

/// Standard error of an empirical CDF value q from n draws.
inline double empirical_cdf_stderr(double q, std::size_t n) {
    return std::sqrt(std::max(0.0, q * (1.0 - q)) / static_cast<double>(n));
}

/// Histogram normalized to a density; bins are half-open [lo, hi) and stored
/// row-major over (y1, y2) for two dimensions.
struct Histogram {
    Vector lo;
    Vector hi;
    std::size_t bins_per_dim = 0;
    std::vector<std::size_t> counts;
    std::vector<double> density;

    double width(std::size_t dim) const { return (hi[dim] - lo[dim]) / static_cast<double>(bins_per_dim); }
    double bin_volume() const {
        double v = 1.0;
        for (std::size_t d = 0; d < lo.size(); ++d)
            v *= width(d);
        return v;
    }
};

inline Histogram binned_density(const SampleBatch& batch, const Vector& lo, const Vector& hi,
                                std::size_t bins_per_dim) {
    const std::size_t dims = batch.ratios.cols;
    if (dims != 1 && dims != 2)
        throw InvalidArgument("binned_density supports one or two ratio dimensions");
    if (lo.size() != dims || hi.size() != dims)
        throw DimensionMismatch("window bounds must match the ratio dimension");
    if (bins_per_dim == 0)
        throw InvalidArgument("bins_per_dim must be positive");
    for (std::size_t d = 0; d < dims; ++d)
        if (!(lo[d] < hi[d]))
            throw InvalidArgument("window must satisfy lo < hi");

    Histogram h{lo, hi, bins_per_dim, {}, {}};
    std::size_t cells = bins_per_dim;
    if (dims == 2)
        cells *= bins_per_dim;
    h.counts.assign(cells, 0);
    std::size_t inside = 0;
    for (std::size_t r = 0; r < batch.ratios.rows; ++r) {
        const auto row = batch.ratios.row(r);
        std::size_t index = 0;
        bool ok = true;
        for (std::size_t d = 0; d < dims && ok; ++d) {
            if (!(row[d] >= lo[d] && row[d] < hi[d])) {
                ok = false;
                break;
            }
            auto k = static_cast<std::size_t>((row[d] - lo[d]) / h.width(d));
            k = std::min(k, bins_per_dim - 1);
            index = index * bins_per_dim + k;
        }
        if (ok) {
            ++h.counts[index];
            ++inside;
        }
    }
    if (inside == 0)
        throw WindowEmpty("no samples fall inside the histogram window");
    const double norm = static_cast<double>(batch.n) * h.bin_volume();
    h.density.resize(cells);
    for (std::size_t i = 0; i < cells; ++i)
        h.density[i] = static_cast<double>(h.counts[i]) / norm;
    return h;
}

} // namespace nratio
