#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ccombat/dataset.hpp"
#include "ccombat/matrix.hpp"

namespace ccombat {

// Spread of the latent parameters. The generative structure is fixed; the
// magnitudes below are calibration defaults.
struct EffectScales {
    double alpha_sd{1.0};       // alpha_g ~ N(0, alpha_sd)
    double beta_sd{12.0};       // beta_pg ~ N(0, beta_sd)
    double gamma_sd{15.0};      // gamma_cg ~ N(0, gamma_sd)
    double delta_lo{0.5};       // delta_cg ~ U(delta_lo, delta_hi)
    double delta_hi{2.5};
    double sigma_lo{3.0};       // sigma_g ~ U(sigma_lo, sigma_hi)
    double sigma_hi{5.0};
    double covariate_shift{0.5};  // X ~ N(+shift, sd) for label 1, N(-shift, sd) for label 0
    double covariate_sd{0.5};
    // Subtract the per-feature mean over clusters from gamma so that the
    // ground truth alpha + X beta is identifiable from the data.
    bool center_gamma{true};
};

struct SynthConfig {
    std::size_t n_sites{20};
    std::size_t samples_per_site{20};
    std::size_t n_features{20};
    std::size_t sites_per_cluster{5};
    std::size_t n_covariates{5};
    std::uint64_t seed{0};
    EffectScales scales;

    std::size_t n_clusters() const noexcept { return n_sites / sites_per_cluster; }
    void validate() const;
    std::string describe() const;
};

struct GeneratingParams {
    Vector alpha;   // G
    Matrix beta;    // P x G
    Matrix gamma;   // C x G
    Matrix delta;   // C x G (scale, not squared)
    Vector sigma;   // G
};

struct SynthTruth {
    Matrix ground_truth;                   // N x G, alpha + X beta
    std::vector<int> labels;               // N, 0/1
    std::vector<std::size_t> cluster_of_site;  // M
    std::vector<std::size_t> cluster_of_row;   // N
    GeneratingParams params;
};

struct SynthData {
    Dataset dataset;
    SynthTruth truth;
};

// Draws a dataset from the cluster L/S model:
//   y_ijg ~ N(alpha_g + X_ij beta_g + gamma_cg, delta_cg^2 sigma_g^2)
// with sites assigned to clusters contiguously and covariates shifted by a
// balanced binary label. Each site draws from its own sub-stream.
SynthData generate(const SynthConfig& cfg);

// The five simulation presets (index 1..5).
SynthConfig table1_config(int index, std::uint64_t seed = 0);

// Writes data.csv, truth.csv, params.json and schema.json into dir.
void write_synth_outputs(const std::filesystem::path& dir, const SynthData& data, const SynthConfig& cfg);
nlohmann::json to_json(const GeneratingParams& p);
nlohmann::json to_json(const SynthConfig& cfg);

// Reads truth.csv back: ground truth matrix (columns named like the
// features) and labels.
struct TruthTable {
    Matrix ground_truth;
    std::vector<int> labels;
};
TruthTable load_truth_csv(const std::filesystem::path& path, std::size_t n_features);

}  // namespace ccombat
