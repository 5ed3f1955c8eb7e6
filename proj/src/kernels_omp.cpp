#include <algorithm>
#include <cmath>

#ifdef CCOMBAT_HAVE_OPENMP
#include <omp.h>
#endif

#include "ccombat/error.hpp"
#include "ccombat/kernels.hpp"
#include "kernel_detail.hpp"

namespace ccombat::kernels::omp {

namespace {
using index_t = long long;  // OpenMP loop variables must be signed for older runtimes
}

int max_threads() {
#ifdef CCOMBAT_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

FeatureFit feature_ols(const Matrix& design, const Cholesky& normal, const Matrix& responses) {
    if (responses.rows() != design.rows()) throw DimensionError("feature_ols: response rows do not match design");
    FeatureFit out{Matrix(design.cols(), responses.cols()), Vector(responses.cols())};
    const index_t g_count = static_cast<index_t>(responses.cols());
#pragma omp parallel
    {
        Vector scratch;
#pragma omp for schedule(static)
        for (index_t g = 0; g < g_count; ++g)
            detail::ols_feature(design, normal, responses, static_cast<std::size_t>(g), out, scratch);
    }
    return out;
}

Matrix standardize(const Matrix& y, const Matrix& x, std::span<const double> alpha, const Matrix& beta,
                   std::span<const double> sigma) {
    Matrix z(y.rows(), y.cols());
    const index_t n = static_cast<index_t>(y.rows());
#pragma omp parallel for schedule(static)
    for (index_t r = 0; r < n; ++r) detail::standardize_row(y, x, alpha, beta, sigma, static_cast<std::size_t>(r), z);
    return z;
}

// Parallel over features; each (group, feature) cell is still accumulated in
// row order, matching the serial kernel.
GroupStats group_stats(const Matrix& z, std::span<const std::size_t> groups, std::size_t k) {
    const std::size_t rows = z.rows();
    GroupStats s{std::vector<std::size_t>(k, 0), Matrix(k, z.cols()), Matrix(k, z.cols())};
    for (std::size_t r = 0; r < rows; ++r) ++s.counts[groups[r]];
    const index_t g_count = static_cast<index_t>(z.cols());
#pragma omp parallel for schedule(static)
    for (index_t gi = 0; gi < g_count; ++gi) {
        const auto g = static_cast<std::size_t>(gi);
        for (std::size_t r = 0; r < rows; ++r) s.mean(groups[r], g) += z(r, g);
        for (std::size_t c = 0; c < k; ++c) s.mean(c, g) /= static_cast<double>(s.counts[c]);
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = z(r, g) - s.mean(groups[r], g);
            s.centered_ss(groups[r], g) += d * d;
        }
    }
    return s;
}

EbSolution eb_solve(const GroupStats& stats, const EBPriors& priors, const EbSettings& cfg) {
    const std::size_t k = stats.mean.rows(), g_count = stats.mean.cols();
    EbSolution sol{Matrix(k, g_count), Matrix(k, g_count)};
    std::vector<EbCell> cells(k * g_count);
    const index_t total = static_cast<index_t>(cells.size());
#pragma omp parallel for schedule(static)
    for (index_t i = 0; i < total; ++i) {
        const std::size_t c = static_cast<std::size_t>(i) / g_count, g = static_cast<std::size_t>(i) % g_count;
        cells[static_cast<std::size_t>(i)] =
            eb_cell(static_cast<double>(stats.counts[c]), stats.mean(c, g), stats.centered_ss(c, g),
                    priors.gamma_bar[c], priors.tau_sq_bar[c], priors.lambda_bar[c], priors.theta_bar[c], cfg);
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const EbCell& cell = cells[i];
        sol.gamma_star.data()[i] = cell.gamma_star;
        sol.delta_sq_star.data()[i] = cell.delta_sq_star;
        sol.max_iterations = std::max(sol.max_iterations, cell.iterations);
        if (!cell.converged) {
            sol.converged = false;
            sol.max_residual = std::max(sol.max_residual, cell.last_change);
        }
    }
    return sol;
}

Matrix harmonize(const Matrix& y, const Matrix& x, std::span<const double> alpha, const Matrix& beta,
                 std::span<const double> sigma, const Matrix& gamma_star, const Matrix& delta_sq_star,
                 std::span<const std::size_t> group_of) {
    Matrix out(y.rows(), y.cols());
    const index_t n = static_cast<index_t>(y.rows());
#pragma omp parallel for schedule(static)
    for (index_t r = 0; r < n; ++r) {
        const auto row = static_cast<std::size_t>(r);
        detail::harmonize_row(y, x, alpha, beta, sigma, gamma_star, delta_sq_star, group_of[row], row, out);
    }
    return out;
}

// Distances in parallel; inertia summed sequentially so it does not depend on
// the thread count.
double assign_nearest(const Matrix& points, const Matrix& centroids, std::span<std::size_t> assignment,
                      std::span<double> dist2) {
    const index_t n = static_cast<index_t>(points.rows());
#pragma omp parallel for schedule(static)
    for (index_t r = 0; r < n; ++r)
        detail::nearest_point(points, centroids, static_cast<std::size_t>(r), assignment, dist2);
    double inertia = 0.0;
    for (double d : dist2) inertia += d;
    return inertia;
}

}  // namespace ccombat::kernels::omp
