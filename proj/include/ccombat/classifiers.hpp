#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ccombat/matrix.hpp"

namespace ccombat {

struct LinRegResult {
    Vector predictions;
    Vector coefficients;  // intercept first
    bool ridge_fallback{false};
};

// OLS with intercept; falls back to ridge 1e-8 when the design is rank deficient.
LinRegResult linreg_fit_predict(const Matrix& train_x, std::span<const double> train_y, const Matrix& test_x);

struct LogRegOptions {
    double l2{1e-4};
    std::size_t max_epochs{500};
    double grad_tol{1e-6};
    // z-score inputs with training statistics before fitting.
    bool standardize{true};
};

struct LogRegModel {
    Matrix weights;  // (D + 1) x K, bias in the last row
    Vector shift;
    Vector scale;
    std::size_t classes{0};
    std::vector<double> loss_trace;  // objective after each accepted epoch, starting at w = 0
    std::size_t epochs{0};
    double grad_norm{0.0};
};

// Multinomial logistic regression by full-batch gradient descent with
// backtracking (Armijo) line search, starting from zero weights.
LogRegModel logreg_fit(const Matrix& x, std::span<const int> labels, std::size_t classes,
                       const LogRegOptions& opts = {});
std::vector<int> logreg_predict(const LogRegModel& model, const Matrix& x);
std::vector<int> logreg_fit_predict(const Matrix& train_x, std::span<const int> train_labels, const Matrix& test_x,
                                    std::size_t classes, const LogRegOptions& opts = {});

}  // namespace ccombat
