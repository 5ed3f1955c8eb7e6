#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ccombat/matrix.hpp"

namespace ccombat {

// Global location/scale estimates of the standardization model.
struct FeatureWiseModel {
    Vector alpha;                          // G, weighted grand mean per feature
    Matrix beta;                           // P x G covariate coefficients
    Vector sigma;                          // G, pooled residual standard deviation
    Matrix gamma_hat;                      // M x G additive site offsets, sum_i (N_i/N) gamma = 0
    std::vector<std::size_t> site_sizes;   // N_i
    std::vector<std::string> site_labels;  // site ids, dense-index order

    std::size_t n_features() const noexcept { return alpha.size(); }
    std::size_t n_covariates() const noexcept { return beta.rows(); }
};

// Method-of-moments hyperparameters, one entry per group (site or cluster).
struct EBPriors {
    Vector gamma_bar;
    Vector tau_sq_bar;
    Vector lambda_bar;
    Vector theta_bar;

    std::size_t n_groups() const noexcept { return gamma_bar.size(); }
};

// Empirical-Bayes posterior location and scale per (group, feature).
struct BatchEffects {
    Matrix gamma_star;     // K x G
    Matrix delta_sq_star;  // K x G, > 0
    std::vector<std::string> group_labels;

    std::size_t n_groups() const noexcept { return gamma_star.rows(); }
};

}  // namespace ccombat
