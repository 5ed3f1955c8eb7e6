#include "ccombat/cluster_combat.hpp"

#include <algorithm>

#include "ccombat/error.hpp"

namespace ccombat {

namespace {

Matrix clustering_input(const Dataset& ds, const FeatureWiseModel& model, bool standardized) {
    return standardized ? standardize(ds, model) : ds.features();
}

}  // namespace

ClusterCombatArtifact cluster_combat_fit(const Dataset& ds, std::size_t n_clusters, std::uint64_t seed,
                                         const ClusterCombatOptions& opts) {
    if (n_clusters < 1 || n_clusters > ds.n_samples())
        throw RangeError("cluster count must be in [1, N], got " + std::to_string(n_clusters));

    ClusterCombatArtifact art;
    art.cluster_standardized = opts.cluster_standardized;
    // Location/scale estimation is identical to ComBat: sites, not clusters,
    // enter the OLS design.
    art.feature_model = fit_feature_model(ds, opts.fit);
    const Matrix z = standardize(ds, art.feature_model);

    if (opts.forced_assignment) {
        check_groups(*opts.forced_assignment, ds.n_samples(), n_clusters);
        art.training_assignment = *opts.forced_assignment;
        art.cluster_model.space = ClusterSpace::SampleFeature;
        // Centroids of the injected groups so the artifact stays usable.
        const Matrix pts = opts.cluster_standardized ? z : ds.features();
        art.cluster_model.centroids = Matrix(n_clusters, pts.cols());
        std::vector<std::size_t> counts(n_clusters, 0);
        for (std::size_t r = 0; r < pts.rows(); ++r) {
            ++counts[art.training_assignment[r]];
            for (std::size_t k = 0; k < pts.cols(); ++k) art.cluster_model.centroids(art.training_assignment[r], k) += pts(r, k);
        }
        for (std::size_t c = 0; c < n_clusters; ++c)
            for (double& v : art.cluster_model.centroids.row(c)) v /= static_cast<double>(std::max<std::size_t>(counts[c], 1));
    } else {
        KMeansFit km = kmeans_fit(opts.cluster_standardized ? z : ds.features(), n_clusters, seed,
                                  ClusterSpace::SampleFeature, opts.kmeans);
        art.training_assignment = std::move(km.assignment);
        art.cluster_model = std::move(km.model);
    }

    art.priors = fit_priors(z, art.training_assignment, n_clusters);
    art.effects = eb_fit(z, art.training_assignment, n_clusters, art.priors, opts.eb);
    return art;
}

std::vector<std::size_t> predict_clusters(const ClusterCombatArtifact& artifact, const Dataset& ds) {
    if (artifact.cluster_model.space != ClusterSpace::SampleFeature)
        throw ConfigError("artifact was clustered in " + to_string(artifact.cluster_model.space) +
                          " space; centralized unseen-site harmonization needs sample-feature space");
    if (ds.n_features() != artifact.feature_model.n_features() ||
        ds.n_covariates() != artifact.feature_model.n_covariates())
        throw DimensionError("dataset has G=" + std::to_string(ds.n_features()) + ", P=" +
                             std::to_string(ds.n_covariates()) + " but the model expects G=" +
                             std::to_string(artifact.feature_model.n_features()) + ", P=" +
                             std::to_string(artifact.feature_model.n_covariates()));
    return kmeans_predict(artifact.cluster_model,
                          clustering_input(ds, artifact.feature_model, artifact.cluster_standardized));
}

Matrix harmonize_unseen_centralized(const ClusterCombatArtifact& artifact, const Dataset& ds_new) {
    const std::vector<std::size_t> clusters = predict_clusters(artifact, ds_new);
    return harmonize(ds_new, artifact.feature_model, artifact.effects, clusters);
}

Matrix cluster_combat_harmonize_training(const ClusterCombatArtifact& artifact, const Dataset& ds) {
    if (artifact.training_assignment.size() != ds.n_samples())
        throw DimensionError("dataset is not the one the artifact was fitted on");
    return harmonize(ds, artifact.feature_model, artifact.effects, artifact.training_assignment);
}

}  // namespace ccombat
