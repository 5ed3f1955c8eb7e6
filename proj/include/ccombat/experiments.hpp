#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ccombat/classifiers.hpp"
#include "ccombat/cluster_combat.hpp"
#include "ccombat/federated/protocol.hpp"
#include "ccombat/metrics.hpp"
#include "ccombat/synthgen.hpp"

namespace ccombat {

enum class Algorithm { None, Combat, ClusterCombat, DistCombat, DistClusterCombat };
inline constexpr std::array<Algorithm, 5> kAllAlgorithms{Algorithm::None, Algorithm::Combat, Algorithm::ClusterCombat,
                                                         Algorithm::DistCombat, Algorithm::DistClusterCombat};
std::string to_string(Algorithm a);
// Display name used in report tables ("Cluster ComBat", ...).
std::string display_name(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct ExperimentOptions {
    double test_fraction{0.3};   // share of sites held out as unseen
    std::size_t n_clusters{0};   // 0: the generating cluster count
    bool with_accuracy{true};    // also train the downstream classifiers
    ClusterCombatOptions centralized;
    federated::DistributedOptions distributed;
    LogRegOptions logreg;

    // Experiment defaults differ from the library defaults in two ways:
    // samples are clustered on standardized residuals, and k-means keeps the
    // best of 10 seeded restarts. Both are needed for reliable cluster recovery
    // on the synthetic presets.
    ExperimentOptions() {
        centralized.cluster_standardized = true;
        centralized.kmeans.restarts = 10;
        distributed.kmeans.restarts = 10;
    }
};

// One seed of the reconstruction / downstream protocol:
//  - held-out sites are chosen by a seeded shuffle;
//  - ComBat and distributed ComBat refit with the held-out sites included
//    (they cannot harmonize unseen sites);
//  - the cluster variants fit on training sites only and onboard the
//    held-out sites with the frozen model.
// RMSE is measured on held-out rows against the noiseless ground truth;
// accuracy is logistic regression trained on harmonized training rows and
// scored on harmonized held-out rows.
struct Table2SeedResult {
    std::uint64_t seed{0};
    std::array<double, 5> rmse{};
    std::array<double, 5> accuracy{};  // NaN when accuracy is disabled
    double truth_accuracy{0.0};
};

Table2SeedResult run_table2_seed(const SynthConfig& cfg, std::uint64_t seed, const ExperimentOptions& opts = {});

// Seeds base, base+1, ... run concurrently on up to `jobs` threads; results
// come back in seed order.
std::vector<Table2SeedResult> run_table2_seeds(const SynthConfig& cfg, std::uint64_t base_seed, std::size_t n_seeds,
                                               const ExperimentOptions& opts = {}, std::size_t jobs = 1);

std::size_t held_out_sites(std::size_t n_sites, double test_fraction);

// Site and cluster identifiability: logistic regression on a seeded 70/30
// sample split predicts site index and cluster index, before and after
// Cluster ComBat harmonization of the whole dataset.
struct IdentifiabilityResult {
    double site_before{0}, site_after{0};
    double cluster_before{0}, cluster_after{0};
    double site_chance{0}, cluster_chance{0};
};
IdentifiabilityResult run_identifiability(const SynthConfig& cfg, std::uint64_t seed, const ExperimentOptions& opts = {});
// M=10, N_i=40, G=20, 2 sites per cluster, P=5.
SynthConfig identifiability_config(std::uint64_t seed = 0);

// Adjusted Rand index between the generating site partition and the
// coordinator's clustering of locally fit site parameters.
double run_parameter_recovery(const SynthConfig& cfg, std::uint64_t seed,
                              const federated::DistributedOptions& opts = {});
// M=9, N_i=10, G=20, 3 sites per cluster, P=5.
SynthConfig parameter_recovery_config(std::uint64_t seed = 0);

// Downstream regression: predict the first covariate from harmonized
// features with linear regression; MAE on held-out sites per algorithm.
std::array<double, 5> run_regression_seed(const SynthConfig& cfg, std::uint64_t seed, const ExperimentOptions& opts = {});

struct OnboardingTiming {
    double onboard_seconds{0};
    double refit_seconds{0};
    bool model_unchanged{false};
    double onboard_rmse{0};
    double unharmonized_rmse{0};
    // Same measurements for the federated model (in-process transport).
    double dist_onboard_seconds{0};
    double dist_refit_seconds{0};
    bool dist_model_unchanged{false};
    double dist_onboard_rmse{0};
};
// Fits Cluster ComBat on the training sites, centralized and federated, then
// times onboarding one held-out site against a full refit that includes it.
// `repeats` runs of each are timed and the minimum is kept.
OnboardingTiming run_onboarding_timing(const SynthConfig& cfg, std::uint64_t seed, const ExperimentOptions& opts = {},
                                       std::size_t repeats = 5);

// Runs fn(seed) for seeds base..base+n-1 on up to `jobs` threads and keeps
// seed order. The first exception (in seed order) is rethrown.
std::vector<double> map_seeds(std::uint64_t base_seed, std::size_t n_seeds, std::size_t jobs,
                              const std::function<double(std::uint64_t)>& fn);

// Table layout: one row per algorithm, RMSE columns for each config then
// accuracy columns, cells formatted "mean±variance".
struct Table2Report {
    std::vector<std::string> config_names;
    // [config][algorithm]
    std::vector<std::array<EvalReport, 5>> rmse;
    std::vector<std::array<EvalReport, 5>> accuracy;
    std::vector<EvalReport> truth_accuracy;
};
Table2Report summarize_table2(const std::vector<std::string>& config_names,
                              const std::vector<std::vector<Table2SeedResult>>& per_config);
CsvTable table2_csv(const Table2Report& report);
CsvTable table2_seed_csv(const std::vector<std::string>& config_names,
                         const std::vector<std::vector<Table2SeedResult>>& per_config);

}  // namespace ccombat
