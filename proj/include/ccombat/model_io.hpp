#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccombat/cluster_combat.hpp"
#include "ccombat/combat.hpp"
#include "ccombat/federated/messages.hpp"

namespace ccombat {

inline constexpr int kModelFormatVersion = 1;

// Model documents are JSON objects with "format_version", "kind" (one of
// "combat", "cluster-combat", "dist-combat", "dist-cluster-combat") and the
// fitted parameters. Feature/covariate names are stored so a new CSV can
// be checked against the model before use.
struct ModelHeader {
    std::string kind;
    std::vector<std::string> feature_names;
    std::vector<std::string> covariate_names;
};

nlohmann::json to_json(const FeatureWiseModel& m);
FeatureWiseModel feature_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EBPriors& p);
EBPriors priors_from_json(const nlohmann::json& j);

nlohmann::json combat_document(const CombatFit& fit, const ModelHeader& header);
CombatFit combat_from_document(const nlohmann::json& doc);

nlohmann::json cluster_combat_document(const ClusterCombatArtifact& art, const ModelHeader& header);
ClusterCombatArtifact cluster_combat_from_document(const nlohmann::json& doc);

struct DistributedModel {
    federated::GlobalParams global;
    BatchEffects effects;
};
nlohmann::json distributed_document(const DistributedModel& model, const ModelHeader& header);
DistributedModel distributed_from_document(const nlohmann::json& doc);

ModelHeader read_header(const nlohmann::json& doc);

nlohmann::json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace ccombat
