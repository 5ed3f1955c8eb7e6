#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ccombat/combat.hpp"
#include "ccombat/dataset.hpp"
#include "ccombat/kmeans.hpp"

namespace ccombat {

struct ClusterCombatOptions {
    FitOptions fit;
    EBOptions eb;
    KMeansOptions kmeans;
    // Cluster standardized residuals Z instead of raw feature rows.
    bool cluster_standardized{false};
    // Test hook: bypass K-means and use this per-row assignment (values in
    // [0, n_clusters)). Lets the ComBat-equivalence check inject site identity.
    std::optional<std::vector<std::size_t>> forced_assignment;
};

struct ClusterCombatArtifact {
    FeatureWiseModel feature_model;
    EBPriors priors;
    BatchEffects effects;  // one row per cluster, labels "0".."C-1"
    ClusterModel cluster_model;
    bool cluster_standardized{false};
    std::vector<std::size_t> training_assignment;
};

ClusterCombatArtifact cluster_combat_fit(const Dataset& ds, std::size_t n_clusters, std::uint64_t seed,
                                         const ClusterCombatOptions& opts = {});

// Cluster index of every row of ds under the artifact's clustering.
std::vector<std::size_t> predict_clusters(const ClusterCombatArtifact& artifact, const Dataset& ds);

// Harmonizes rows of a site that took no part in fitting. Reads the
// artifact only; nothing is re-estimated.
Matrix harmonize_unseen_centralized(const ClusterCombatArtifact& artifact, const Dataset& ds_new);

// Training-time harmonization of the fitted rows.
Matrix cluster_combat_harmonize_training(const ClusterCombatArtifact& artifact, const Dataset& ds);

}  // namespace ccombat
