#pragma once

// Data-parallel inner loops of the harmonization pipeline. Each kernel exists
// twice: kernels::serial is the reference implementation, kernels::omp the
// OpenMP version used by the library. Both perform identical arithmetic in
// identical per-element order, so their outputs are bitwise equal; the test
// suite and bench_kernels rely on that.

#include <cstddef>
#include <span>

#include "ccombat/matrix.hpp"
#include "ccombat/numerics.hpp"
#include "ccombat/types.hpp"

namespace ccombat::kernels {

struct FeatureFit {
    Matrix coefficients;  // Q x G
    Vector rss;           // G
};

// Per-group sufficient statistics of a standardized matrix.
struct GroupStats {
    std::vector<std::size_t> counts;  // K
    Matrix mean;                      // K x G
    Matrix centered_ss;               // K x G, sum_j (z - mean)^2
};

struct EbSolution {
    Matrix gamma_star;
    Matrix delta_sq_star;
    std::size_t max_iterations{0};
    double max_residual{0.0};  // largest final update over non-converged cells, 0 if all converged
    bool converged{true};
};

struct EbSettings {
    double tol{1e-6};
    std::size_t max_iter{100};
};

#define CCOMBAT_KERNEL_DECLS                                                                        \
    FeatureFit feature_ols(const Matrix& design, const Cholesky& normal, const Matrix& responses); \
    Matrix standardize(const Matrix& y, const Matrix& x, std::span<const double> alpha,             \
                       const Matrix& beta, std::span<const double> sigma);                         \
    GroupStats group_stats(const Matrix& z, std::span<const std::size_t> groups, std::size_t k);   \
    EbSolution eb_solve(const GroupStats& stats, const EBPriors& priors, const EbSettings& cfg);    \
    Matrix harmonize(const Matrix& y, const Matrix& x, std::span<const double> alpha,              \
                     const Matrix& beta, std::span<const double> sigma, const Matrix& gamma_star,  \
                     const Matrix& delta_sq_star, std::span<const std::size_t> group_of);          \
    double assign_nearest(const Matrix& points, const Matrix& centroids,                           \
                          std::span<std::size_t> assignment, std::span<double> dist2);

namespace serial {
CCOMBAT_KERNEL_DECLS
}

namespace omp {
CCOMBAT_KERNEL_DECLS
// Number of worker threads the OpenMP kernels would use (1 without OpenMP).
int max_threads();
}

#undef CCOMBAT_KERNEL_DECLS

// Single (group, feature) empirical-Bayes fixed point; shared by both
// backends and used directly by tests.
struct EbCell {
    double gamma_star;
    double delta_sq_star;
    std::size_t iterations;
    double last_change;
    bool converged;
};
EbCell eb_cell(double n, double mean, double centered_ss, double gamma_bar, double tau_sq_bar,
               double lambda_bar, double theta_bar, const EbSettings& cfg);

}  // namespace ccombat::kernels
