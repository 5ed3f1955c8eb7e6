#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ccombat/combat.hpp"
#include "ccombat/dataset.hpp"
#include "ccombat/federated/messages.hpp"
#include "ccombat/federated/transport.hpp"
#include "ccombat/kmeans.hpp"

namespace ccombat::federated {

enum class Weighting { Uniform, BySamples };

struct DistributedOptions {
    Weighting weighting{Weighting::Uniform};
    // z-score each parameter coordinate across sites before clustering.
    bool standardize_params{false};
    FitOptions fit;
    EBOptions eb;
    KMeansOptions kmeans;
    // Test hook: site id -> first round (1 or 3) in which it stops sending.
    std::map<std::string, int> dropout_at_round;
};

inline constexpr double kLocalRidge = 1e-8;

// Round 1 at a site: per-feature OLS of y on [1 | X] over local rows only.
SiteLocalParams site_local_fit(const Dataset& ds_local, const FitOptions& opts = {});

// Coordinator after round 1: averages local coefficients, sets
// gamma_hat_i = alpha_i - alpha, pools the residual scale, and clusters the
// per-site parameter vectors (PerSite mode maps every site to itself).
GlobalParams server_aggregate_global(std::span<const SiteLocalParams> msgs, std::size_t n_clusters,
                                     std::uint64_t seed, DistributedMode mode,
                                     const DistributedOptions& opts = {});

// Round 3 at a site: standardize with the global parameters, then fit
// priors and the EB fixed point with the site as the single group.
SiteEBParams site_local_eb(const Dataset& ds_local, const GlobalParams& global, const EBOptions& opts = {});

// Coordinator after round 3: per cluster, mean of member gamma* and mean of
// member delta*^2.
BatchEffects server_aggregate_cluster_effects(std::span<const SiteEBParams> msgs,
                                              const std::vector<std::pair<std::string, std::size_t>>& cluster_of_site,
                                              std::size_t n_clusters);

// Round 4 at a site: harmonize local rows with its cluster's effects.
Matrix site_harmonize(const Dataset& ds_local, const GlobalParams& global, const BatchEffects& effects,
                      std::size_t cluster);

struct DistributedResult {
    GlobalParams global;
    BatchEffects effects;
    std::vector<std::string> site_order;
    std::vector<Matrix> site_harmonized;  // per site, local row order
    Matrix harmonized;                    // all rows in the input dataset's order
};

// Simulates every site plus the coordinator in one process, moving all
// state through `transport`. Sites run each round concurrently; the
// coordinator blocks until a round is complete.
DistributedResult run_distributed(const Dataset& ds, std::size_t n_clusters, DistributedMode mode,
                                  Transport& transport, std::uint64_t seed, const DistributedOptions& opts = {});

// Cluster of a new site in the frozen parameter-space model.
std::size_t onboard_cluster(const SiteLocalParams& local, const GlobalParams& global);

// Harmonizes a site that took no part in training; no message is sent and
// no global quantity is re-estimated.
Matrix onboard_unseen_site(const Dataset& ds_new, const GlobalParams& global, const BatchEffects& effects,
                           const FitOptions& opts = {});

}  // namespace ccombat::federated
