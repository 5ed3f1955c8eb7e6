#pragma once

#include <cstddef>
#include <span>

#include "ccombat/matrix.hpp"

namespace ccombat {

struct LinearSystemSolution {
    Vector coefficients;
    double residual_variance{0.0};  // ||residual||^2 / N
};

// Cholesky factor L (lower triangular) of a symmetric positive-definite
// matrix A = L L^T.
class Cholesky {
public:
    // Throws RankDeficientError when a pivot falls below rel_tol * max(diag A).
    explicit Cholesky(const Matrix& spd, double rel_tol = 1e-12);

    std::size_t size() const noexcept { return l_.rows(); }
    Vector solve(std::span<const double> rhs) const;
    void solve_in_place(std::span<double> x) const;

private:
    Matrix l_;
};

// Normal equations D^T D + ridge I for one design matrix. Factoring once and
// solving per response is how the feature-wise fits share work.
class NormalEquations {
public:
    NormalEquations(const Matrix& design, double ridge = 0.0);

    const Matrix& design() const noexcept { return design_; }
    double ridge() const noexcept { return ridge_; }
    LinearSystemSolution solve(std::span<const double> response) const;

private:
    Matrix design_;
    double ridge_;
    Cholesky factor_;
};

Matrix gram(const Matrix& design);                      // D^T D
Vector cross(const Matrix& design, std::span<const double> response);  // D^T y

// Minimizes ||design b - response||^2 + ridge ||b||^2.
LinearSystemSolution ols_solve(const Matrix& design, std::span<const double> response, double ridge = 0.0);

struct PcaResult {
    Matrix scores;             // N x k
    Vector explained_variance; // length k, nonincreasing
    Matrix components;         // k x G, unit rows
    Vector mean;               // length G
};

// Top-k principal components of the column-centered data. Each component's
// largest-magnitude loading is made positive.
PcaResult pca_project(const Matrix& data, std::size_t k);

// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues are returned in descending order; eigenvectors are the rows of
// the returned matrix.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};
SymmetricEigen symmetric_eigen(const Matrix& a, double tol = 1e-15, std::size_t max_sweeps = 100);

}  // namespace ccombat
