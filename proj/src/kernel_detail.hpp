#pragma once

// Per-element bodies shared by the serial and OpenMP kernels. Keeping the
// arithmetic here guarantees both backends produce identical bits.

#include <cmath>
#include <limits>

#include "ccombat/kernels.hpp"

namespace ccombat::kernels::detail {

inline void ols_feature(const Matrix& design, const Cholesky& normal, const Matrix& y, std::size_t g,
                        FeatureFit& out, Vector& scratch) {
    const std::size_t q = design.cols();
    scratch.assign(q, 0.0);
    for (std::size_t r = 0; r < design.rows(); ++r) {
        const double yr = y(r, g);
        auto row = design.row(r);
        for (std::size_t i = 0; i < q; ++i) scratch[i] += row[i] * yr;
    }
    normal.solve_in_place(scratch);
    double rss = 0.0;
    for (std::size_t r = 0; r < design.rows(); ++r) {
        auto row = design.row(r);
        double fit = 0.0;
        for (std::size_t i = 0; i < q; ++i) fit += row[i] * scratch[i];
        const double e = y(r, g) - fit;
        rss += e * e;
    }
    for (std::size_t i = 0; i < q; ++i) out.coefficients(i, g) = scratch[i];
    out.rss[g] = rss;
}

inline double location(const Matrix& x, std::size_t r, std::span<const double> alpha, const Matrix& beta,
                       std::size_t g) {
    double loc = alpha[g];
    for (std::size_t p = 0; p < x.cols(); ++p) loc += x(r, p) * beta(p, g);
    return loc;
}

inline void standardize_row(const Matrix& y, const Matrix& x, std::span<const double> alpha, const Matrix& beta,
                            std::span<const double> sigma, std::size_t r, Matrix& z) {
    for (std::size_t g = 0; g < y.cols(); ++g) z(r, g) = (y(r, g) - location(x, r, alpha, beta, g)) / sigma[g];
}

inline void harmonize_row(const Matrix& y, const Matrix& x, std::span<const double> alpha, const Matrix& beta,
                          std::span<const double> sigma, const Matrix& gamma_star, const Matrix& delta_sq_star,
                          std::size_t k, std::size_t r, Matrix& out) {
    for (std::size_t g = 0; g < y.cols(); ++g) {
        const double loc = location(x, r, alpha, beta, g);
        const double z = (y(r, g) - loc) / sigma[g];
        out(r, g) = sigma[g] / std::sqrt(delta_sq_star(k, g)) * (z - gamma_star(k, g)) + loc;
    }
}

inline void nearest_point(const Matrix& points, const Matrix& centroids, std::size_t r,
                          std::span<std::size_t> assignment, std::span<double> dist2) {
    auto p = points.row(r);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        auto q = centroids.row(c);
        double d = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double diff = p[k] - q[k];
            d += diff * diff;
        }
        // Strict comparison: ties go to the lowest cluster index.
        if (d < best) {
            best = d;
            arg = c;
        }
    }
    assignment[r] = arg;
    dist2[r] = best;
}

}  // namespace ccombat::kernels::detail
