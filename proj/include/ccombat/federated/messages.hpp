#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ccombat/kmeans.hpp"
#include "ccombat/matrix.hpp"
#include "ccombat/types.hpp"

namespace ccombat::federated {

inline constexpr int kProtocolVersion = 1;
inline const std::string kCoordinator = "coordinator";

enum class Round { LocalParams = 1, GlobalParams = 2, LocalEB = 3, ClusterEB = 4 };
std::string to_string(Round r);
Round round_from_string(const std::string& s);

enum class DistributedMode { PerSite, Clustered };
std::string to_string(DistributedMode m);
DistributedMode mode_from_string(const std::string& s);

// Round 1, site -> coordinator. Only per-feature summaries leave the site:
// local OLS coefficients plus the Gram sufficient statistics of the local
// design [1 | X], which let the coordinator evaluate the residual sum of
// squares at the global coefficients.
struct SiteLocalParams {
    std::string site_id;
    Vector alpha_local;     // G
    Matrix beta_local;      // P x G
    Vector gamma_local;     // G, zero until the coordinator knows the global mean
    std::size_t n_samples{0};
    Matrix design_gram;     // (P+1) x (P+1)
    Matrix design_cross;    // (P+1) x G
    Vector response_sq;     // G, sum_j y_jg^2
    bool ridge_fallback{false};
};

// Round 2, coordinator -> site.
struct GlobalParams {
    DistributedMode mode{DistributedMode::Clustered};
    Vector alpha;
    Matrix beta;
    Vector sigma;
    ClusterModel cluster_model;  // site-parameter space
    std::vector<std::pair<std::string, std::size_t>> cluster_of_site;

    std::size_t n_features() const noexcept { return alpha.size(); }
    std::size_t n_covariates() const noexcept { return beta.rows(); }
    std::size_t n_clusters() const noexcept { return cluster_model.n_clusters(); }
    std::size_t cluster_of(const std::string& site) const;  // throws ProtocolError when unmapped
};

// Round 3, site -> coordinator.
struct SiteEBParams {
    std::string site_id;
    Vector gamma_star_local;
    Vector delta_sq_star_local;
};

using Payload = std::variant<SiteLocalParams, GlobalParams, SiteEBParams, BatchEffects>;

struct RoundMessage {
    Round round{Round::LocalParams};
    std::string sender;
    std::string recipient;
    Payload payload;
    int protocol_version{kProtocolVersion};
};

// Stable 64-bit FNV-1a digest, rendered as hex.
std::string content_digest(const std::string& bytes);

nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ClusterModel& m);
ClusterModel cluster_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BatchEffects& e);
BatchEffects batch_effects_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GlobalParams& g);
GlobalParams global_params_from_json(const nlohmann::json& j);

// Self-describing envelope: {protocol_version, round, sender, recipient,
// payload, digest}. Decoding checks version, round/payload agreement and
// the digest; violations raise ProtocolError.
nlohmann::json encode(const RoundMessage& msg);
RoundMessage decode(const nlohmann::json& j);

// Parameter-space coordinates of a site: [alpha | vec(beta) | gamma].
Vector parameter_vector(const Vector& alpha, const Matrix& beta, const Vector& gamma);

}  // namespace ccombat::federated
