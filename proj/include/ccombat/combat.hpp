#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ccombat/dataset.hpp"
#include "ccombat/kernels.hpp"
#include "ccombat/types.hpp"

namespace ccombat {

inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kDegeneratePriorEpsilon = 1e-6;

struct FitOptions {
    // Floor sigma_g at kVarianceFloor instead of rejecting constant features.
    bool variance_floor{false};
    // Added to the normal matrix; 0 means plain OLS.
    double ridge{0.0};
};

struct EBOptions {
    double tol{1e-6};
    std::size_t max_iter{100};
};

// Feature-wise OLS of y on [site indicators | covariates]; the site
// coefficients are re-centered so that sum_i (N_i/N) gamma_hat_ig = 0 and
// alpha is the weighted grand mean.
FeatureWiseModel fit_feature_model(const Dataset& ds, const FitOptions& opts = {});

// Z = (y - alpha - X beta) / sigma.
Matrix standardize(const Matrix& features, const Matrix& covariates, const FeatureWiseModel& model);
Matrix standardize(const Dataset& ds, const FeatureWiseModel& model);

// Method-of-moments hyperparameters per group. `groups` holds a group index
// in [0, n_groups) for every row of z.
EBPriors fit_priors(const Matrix& z, std::span<const std::size_t> groups, std::size_t n_groups);
EBPriors fit_priors(const kernels::GroupStats& stats);

// Empirical-Bayes fixed point per (group, feature). Group size is the
// number of rows carrying that group index (sites or clusters alike).
BatchEffects eb_fit(const Matrix& z, std::span<const std::size_t> groups, std::size_t n_groups,
                    const EBPriors& priors, const EBOptions& opts = {});

// y* = sigma/delta* (Z - gamma*) + alpha + X beta with each row's own group.
Matrix harmonize(const Matrix& features, const Matrix& covariates, const FeatureWiseModel& model,
                 const BatchEffects& effects, std::span<const std::size_t> group_of);
Matrix harmonize(const Dataset& ds, const FeatureWiseModel& model, const BatchEffects& effects,
                 std::span<const std::size_t> group_of);

struct CombatFit {
    FeatureWiseModel model;
    EBPriors priors;
    BatchEffects effects;
};

// Plain ComBat: groups are the dataset's sites.
CombatFit combat_fit(const Dataset& ds, const FitOptions& fit = {}, const EBOptions& eb = {});
// Harmonizes ds with a ComBat fit, matching rows to groups by site id.
Matrix combat_apply(const Dataset& ds, const CombatFit& fit);

// Shared check for callers that assemble their own pipeline.
void check_groups(std::span<const std::size_t> groups, std::size_t n_rows, std::size_t n_groups);

}  // namespace ccombat
