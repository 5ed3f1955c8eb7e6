#include "ccombat/combat.hpp"

#include <algorithm>
#include <cmath>

#include "ccombat/error.hpp"
#include "ccombat/numerics.hpp"

namespace ccombat {

void check_groups(std::span<const std::size_t> groups, std::size_t n_rows, std::size_t n_groups) {
    if (groups.size() != n_rows) throw DimensionError("group vector length does not match row count");
    for (std::size_t g : groups)
        if (g >= n_groups) throw RangeError("group index " + std::to_string(g) + " out of range");
}

FeatureWiseModel fit_feature_model(const Dataset& ds, const FitOptions& opts) {
    const std::size_t n = ds.n_samples(), m = ds.n_sites(), p = ds.n_covariates(), g_count = ds.n_features();
    const auto sizes = ds.site_sizes();
    for (std::size_t i = 0; i < m; ++i)
        if (sizes[i] < 2)
            throw UnderdeterminedError("site '" + ds.sites()[i] + "' has fewer than 2 samples");
    if (n <= p + m)
        throw UnderdeterminedError("need more samples than covariates + sites (N=" + std::to_string(n) +
                                   ", P+M=" + std::to_string(p + m) + ")");

    // Unconstrained design without intercept: one indicator column per site,
    // then covariates. Equivalent to intercept + dummies under the constraint.
    Matrix design(n, m + p);
    for (std::size_t r = 0; r < n; ++r) {
        design(r, ds.site_index_of()[r]) = 1.0;
        for (std::size_t k = 0; k < p; ++k) design(r, m + k) = ds.covariates()(r, k);
    }
    Matrix normal = gram(design);
    for (std::size_t i = 0; i < normal.rows(); ++i) normal(i, i) += opts.ridge;
    const Cholesky factor(normal);
    const kernels::FeatureFit fit = kernels::omp::feature_ols(design, factor, ds.features());

    FeatureWiseModel model;
    model.alpha.assign(g_count, 0.0);
    model.beta = Matrix(p, g_count);
    model.sigma.assign(g_count, 0.0);
    model.gamma_hat = Matrix(m, g_count);
    model.site_sizes = sizes;
    model.site_labels = ds.sites();
    for (std::size_t g = 0; g < g_count; ++g) {
        double grand = 0.0;
        for (std::size_t i = 0; i < m; ++i) grand += static_cast<double>(sizes[i]) / static_cast<double>(n) * fit.coefficients(i, g);
        model.alpha[g] = grand;
        for (std::size_t i = 0; i < m; ++i) model.gamma_hat(i, g) = fit.coefficients(i, g) - grand;
        for (std::size_t k = 0; k < p; ++k) model.beta(k, g) = fit.coefficients(m + k, g);
        // The residual of the site+covariate fit is exactly y - alpha - X beta - gamma_hat_i.
        double sigma = std::sqrt(fit.rss[g] / static_cast<double>(n));
        if (!(sigma >= kVarianceFloor)) {
            if (!opts.variance_floor)
                throw DegenerateFeatureError(g, "feature " + std::to_string(g) + " ('" + ds.feature_names()[g] +
                                                    "') has zero residual variance; enable the variance floor");
            sigma = kVarianceFloor;
        }
        model.sigma[g] = sigma;
    }
    return model;
}

Matrix standardize(const Matrix& features, const Matrix& covariates, const FeatureWiseModel& model) {
    if (features.cols() != model.n_features())
        throw DimensionError("feature count " + std::to_string(features.cols()) + " does not match model (" +
                             std::to_string(model.n_features()) + ")");
    if (covariates.cols() != model.n_covariates())
        throw DimensionError("covariate count " + std::to_string(covariates.cols()) + " does not match model (" +
                             std::to_string(model.n_covariates()) + ")");
    if (covariates.rows() != features.rows()) throw DimensionError("covariate rows do not match feature rows");
    return kernels::omp::standardize(features, covariates, model.alpha, model.beta, model.sigma);
}

Matrix standardize(const Dataset& ds, const FeatureWiseModel& model) {
    return standardize(ds.features(), ds.covariates(), model);
}

EBPriors fit_priors(const kernels::GroupStats& stats) {
    const std::size_t k = stats.mean.rows(), g_count = stats.mean.cols();
    if (g_count < 2) throw RangeError("prior moments need at least 2 features");
    EBPriors pr{Vector(k), Vector(k), Vector(k), Vector(k)};
    const double gd = static_cast<double>(g_count);
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t n = stats.counts[c];
        if (n < 2) throw UnderdeterminedError("group " + std::to_string(c) + " has fewer than 2 members");

        double gbar = 0.0;
        for (std::size_t g = 0; g < g_count; ++g) gbar += stats.mean(c, g);
        gbar /= gd;
        double tau = 0.0;
        for (std::size_t g = 0; g < g_count; ++g) tau += (stats.mean(c, g) - gbar) * (stats.mean(c, g) - gbar);
        tau /= gd - 1.0;

        Vector dhat(g_count);
        double m = 0.0;
        for (std::size_t g = 0; g < g_count; ++g) {
            dhat[g] = stats.centered_ss(c, g) / static_cast<double>(n - 1);
            m += dhat[g];
        }
        m /= gd;
        double v = 0.0;
        for (double d : dhat) v += (d - m) * (d - m);
        v /= gd - 1.0;

        pr.gamma_bar[c] = gbar;
        pr.tau_sq_bar[c] = std::max(tau, kVarianceFloor);
        m = std::max(m, kVarianceFloor);
        // Inverse-gamma moment inversion; equal variances across features
        // leave it undefined, so fall back to the least informative valid shape.
        if (v > kVarianceFloor * m * m) {
            pr.lambda_bar[c] = m * m / v + 2.0;
        } else {
            pr.lambda_bar[c] = 2.0 + kDegeneratePriorEpsilon;
        }
        pr.theta_bar[c] = m * (pr.lambda_bar[c] - 1.0);
    }
    return pr;
}

EBPriors fit_priors(const Matrix& z, std::span<const std::size_t> groups, std::size_t n_groups) {
    check_groups(groups, z.rows(), n_groups);
    return fit_priors(kernels::omp::group_stats(z, groups, n_groups));
}

BatchEffects eb_fit(const Matrix& z, std::span<const std::size_t> groups, std::size_t n_groups,
                    const EBPriors& priors, const EBOptions& opts) {
    check_groups(groups, z.rows(), n_groups);
    if (!(opts.tol > 0.0)) throw RangeError("EB tolerance must be positive");
    if (priors.n_groups() != n_groups) throw DimensionError("priors do not match group count");
    const kernels::GroupStats stats = kernels::omp::group_stats(z, groups, n_groups);
    for (std::size_t c = 0; c < n_groups; ++c)
        if (stats.counts[c] < 2) throw UnderdeterminedError("group " + std::to_string(c) + " has fewer than 2 members");
    kernels::EbSolution sol = kernels::omp::eb_solve(stats, priors, {opts.tol, opts.max_iter});
    if (!sol.converged)
        throw ConvergenceError(sol.max_residual, "empirical Bayes did not converge in " +
                                                     std::to_string(opts.max_iter) + " iterations (residual " +
                                                     std::to_string(sol.max_residual) + ")");
    BatchEffects fx{std::move(sol.gamma_star), std::move(sol.delta_sq_star), {}};
    for (std::size_t c = 0; c < n_groups; ++c) fx.group_labels.push_back(std::to_string(c));
    return fx;
}

Matrix harmonize(const Matrix& features, const Matrix& covariates, const FeatureWiseModel& model,
                 const BatchEffects& effects, std::span<const std::size_t> group_of) {
    if (features.cols() != model.n_features() || covariates.cols() != model.n_covariates())
        throw DimensionError("data dimensions do not match the model");
    if (effects.gamma_star.cols() != model.n_features()) throw DimensionError("batch effects do not match the model");
    if (group_of.size() != features.rows()) throw DimensionError("group assignment length does not match rows");
    for (std::size_t k : group_of)
        if (k >= effects.n_groups()) throw RangeError("unknown group index " + std::to_string(k));
    return kernels::omp::harmonize(features, covariates, model.alpha, model.beta, model.sigma, effects.gamma_star,
                                   effects.delta_sq_star, group_of);
}

Matrix harmonize(const Dataset& ds, const FeatureWiseModel& model, const BatchEffects& effects,
                 std::span<const std::size_t> group_of) {
    return harmonize(ds.features(), ds.covariates(), model, effects, group_of);
}

CombatFit combat_fit(const Dataset& ds, const FitOptions& fit_opts, const EBOptions& eb) {
    CombatFit out;
    out.model = fit_feature_model(ds, fit_opts);
    const Matrix z = standardize(ds, out.model);
    const auto& groups = ds.site_index_of();
    out.priors = fit_priors(z, groups, ds.n_sites());
    out.effects = eb_fit(z, groups, ds.n_sites(), out.priors, eb);
    out.effects.group_labels = ds.sites();
    return out;
}

Matrix combat_apply(const Dataset& ds, const CombatFit& fit) {
    std::vector<std::size_t> group_of(ds.n_samples());
    const auto& labels = fit.effects.group_labels;
    std::vector<std::size_t> site_to_group(ds.n_sites());
    for (std::size_t i = 0; i < ds.n_sites(); ++i) {
        auto it = std::find(labels.begin(), labels.end(), ds.sites()[i]);
        if (it == labels.end())
            throw RangeError("site '" + ds.sites()[i] +
                             "' was not part of the ComBat fit; ComBat must be refit to include it");
        site_to_group[i] = static_cast<std::size_t>(it - labels.begin());
    }
    for (std::size_t r = 0; r < ds.n_samples(); ++r) group_of[r] = site_to_group[ds.site_index_of()[r]];
    return harmonize(ds, fit.model, fit.effects, group_of);
}

}  // namespace ccombat
