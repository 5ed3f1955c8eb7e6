#include <algorithm>
#include <cmath>

#include "ccombat/error.hpp"
#include "ccombat/kernels.hpp"
#include "kernel_detail.hpp"

namespace ccombat::kernels {

EbCell eb_cell(double n, double mean, double centered_ss, double gamma_bar, double tau_sq_bar, double lambda_bar,
               double theta_bar, const EbSettings& cfg) {
    EbCell cell{mean, centered_ss / (n - 1.0), 0, 0.0, false};
    const double n_tau = n * tau_sq_bar;
    const double denom_delta = 0.5 * n + lambda_bar - 1.0;
    while (cell.iterations < cfg.max_iter) {
        const double g_new = (n_tau * mean + cell.delta_sq_star * gamma_bar) / (n_tau + cell.delta_sq_star);
        const double dev = mean - g_new;
        const double d_new = (theta_bar + 0.5 * (centered_ss + n * dev * dev)) / denom_delta;
        cell.last_change = std::max(std::abs(g_new - cell.gamma_star), std::abs(d_new - cell.delta_sq_star));
        cell.gamma_star = g_new;
        cell.delta_sq_star = d_new;
        ++cell.iterations;
        if (cell.last_change < cfg.tol) {
            cell.converged = true;
            break;
        }
    }
    return cell;
}

namespace serial {

FeatureFit feature_ols(const Matrix& design, const Cholesky& normal, const Matrix& responses) {
    if (responses.rows() != design.rows()) throw DimensionError("feature_ols: response rows do not match design");
    FeatureFit out{Matrix(design.cols(), responses.cols()), Vector(responses.cols())};
    Vector scratch;
    for (std::size_t g = 0; g < responses.cols(); ++g) detail::ols_feature(design, normal, responses, g, out, scratch);
    return out;
}

Matrix standardize(const Matrix& y, const Matrix& x, std::span<const double> alpha, const Matrix& beta,
                   std::span<const double> sigma) {
    Matrix z(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) detail::standardize_row(y, x, alpha, beta, sigma, r, z);
    return z;
}

GroupStats group_stats(const Matrix& z, std::span<const std::size_t> groups, std::size_t k) {
    const std::size_t g_count = z.cols();
    GroupStats s{std::vector<std::size_t>(k, 0), Matrix(k, g_count), Matrix(k, g_count)};
    for (std::size_t r = 0; r < z.rows(); ++r) {
        ++s.counts[groups[r]];
        for (std::size_t g = 0; g < g_count; ++g) s.mean(groups[r], g) += z(r, g);
    }
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t g = 0; g < g_count; ++g) s.mean(c, g) /= static_cast<double>(s.counts[c]);
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t g = 0; g < g_count; ++g) {
            const double d = z(r, g) - s.mean(groups[r], g);
            s.centered_ss(groups[r], g) += d * d;
        }
    return s;
}

EbSolution eb_solve(const GroupStats& stats, const EBPriors& priors, const EbSettings& cfg) {
    const std::size_t k = stats.mean.rows(), g_count = stats.mean.cols();
    EbSolution sol{Matrix(k, g_count), Matrix(k, g_count)};
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t g = 0; g < g_count; ++g) {
            EbCell cell = eb_cell(static_cast<double>(stats.counts[c]), stats.mean(c, g), stats.centered_ss(c, g),
                                  priors.gamma_bar[c], priors.tau_sq_bar[c], priors.lambda_bar[c],
                                  priors.theta_bar[c], cfg);
            sol.gamma_star(c, g) = cell.gamma_star;
            sol.delta_sq_star(c, g) = cell.delta_sq_star;
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
    for (std::size_t r = 0; r < y.rows(); ++r)
        detail::harmonize_row(y, x, alpha, beta, sigma, gamma_star, delta_sq_star, group_of[r], r, out);
    return out;
}

double assign_nearest(const Matrix& points, const Matrix& centroids, std::span<std::size_t> assignment,
                      std::span<double> dist2) {
    for (std::size_t r = 0; r < points.rows(); ++r) detail::nearest_point(points, centroids, r, assignment, dist2);
    double inertia = 0.0;
    for (double d : dist2) inertia += d;
    return inertia;
}

}  // namespace serial
}  // namespace ccombat::kernels
