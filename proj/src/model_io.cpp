#include "ccombat/model_io.hpp"

#include <fstream>

#include "ccombat/error.hpp"

namespace ccombat {

using federated::matrix_from_json;
using federated::to_json;

nlohmann::json to_json(const FeatureWiseModel& m) {
    return {{"alpha", m.alpha},
            {"beta", federated::to_json(m.beta)},
            {"sigma", m.sigma},
            {"gamma_hat", federated::to_json(m.gamma_hat)},
            {"site_sizes", m.site_sizes},
            {"site_labels", m.site_labels}};
}

FeatureWiseModel feature_model_from_json(const nlohmann::json& j) {
    FeatureWiseModel m;
    m.alpha = j.at("alpha").get<Vector>();
    m.beta = matrix_from_json(j.at("beta"));
    m.sigma = j.at("sigma").get<Vector>();
    m.gamma_hat = matrix_from_json(j.at("gamma_hat"));
    m.site_sizes = j.at("site_sizes").get<std::vector<std::size_t>>();
    m.site_labels = j.at("site_labels").get<std::vector<std::string>>();
    if (m.sigma.size() != m.alpha.size() || m.beta.cols() != m.alpha.size())
        throw SchemaError("model parameters have inconsistent feature counts");
    return m;
}

nlohmann::json to_json(const EBPriors& p) {
    return {{"gamma_bar", p.gamma_bar},
            {"tau_sq_bar", p.tau_sq_bar},
            {"lambda_bar", p.lambda_bar},
            {"theta_bar", p.theta_bar}};
}

EBPriors priors_from_json(const nlohmann::json& j) {
    return {j.at("gamma_bar").get<Vector>(), j.at("tau_sq_bar").get<Vector>(), j.at("lambda_bar").get<Vector>(),
            j.at("theta_bar").get<Vector>()};
}

namespace {

nlohmann::json header_json(const std::string& kind, const ModelHeader& h) {
    return {{"format_version", kModelFormatVersion},
            {"kind", kind},
            {"feature_names", h.feature_names},
            {"covariate_names", h.covariate_names}};
}

void expect_kind(const nlohmann::json& doc, const std::string& kind) {
    const ModelHeader h = read_header(doc);
    if (h.kind != kind) throw SchemaError("model document is '" + h.kind + "', expected '" + kind + "'");
}

template <class Fn>
auto guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed model document: ") + e.what());
    } catch (const ProtocolError& e) {
        throw SchemaError(std::string("malformed model document: ") + e.what());
    }
}

}  // namespace

ModelHeader read_header(const nlohmann::json& doc) {
    return guarded([&] {
        const int version = doc.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw SchemaError("unsupported model format version " + std::to_string(version));
        return ModelHeader{doc.at("kind").get<std::string>(),
                           doc.value("feature_names", std::vector<std::string>{}),
                           doc.value("covariate_names", std::vector<std::string>{})};
    });
}

nlohmann::json combat_document(const CombatFit& fit, const ModelHeader& header) {
    nlohmann::json doc = header_json("combat", header);
    doc["feature_model"] = to_json(fit.model);
    doc["priors"] = to_json(fit.priors);
    doc["effects"] = federated::to_json(fit.effects);
    return doc;
}

CombatFit combat_from_document(const nlohmann::json& doc) {
    expect_kind(doc, "combat");
    return guarded([&] {
        return CombatFit{feature_model_from_json(doc.at("feature_model")), priors_from_json(doc.at("priors")),
                         federated::batch_effects_from_json(doc.at("effects"))};
    });
}

nlohmann::json cluster_combat_document(const ClusterCombatArtifact& art, const ModelHeader& header) {
    nlohmann::json doc = header_json("cluster-combat", header);
    doc["feature_model"] = to_json(art.feature_model);
    doc["priors"] = to_json(art.priors);
    doc["effects"] = federated::to_json(art.effects);
    doc["cluster_model"] = federated::to_json(art.cluster_model);
    doc["cluster_standardized"] = art.cluster_standardized;
    return doc;
}

ClusterCombatArtifact cluster_combat_from_document(const nlohmann::json& doc) {
    expect_kind(doc, "cluster-combat");
    return guarded([&] {
        ClusterCombatArtifact art;
        art.feature_model = feature_model_from_json(doc.at("feature_model"));
        art.priors = priors_from_json(doc.at("priors"));
        art.effects = federated::batch_effects_from_json(doc.at("effects"));
        art.cluster_model = federated::cluster_model_from_json(doc.at("cluster_model"));
        art.cluster_standardized = doc.value("cluster_standardized", false);
        return art;
    });
}

nlohmann::json distributed_document(const DistributedModel& model, const ModelHeader& header) {
    nlohmann::json doc = header_json(model.global.mode == federated::DistributedMode::PerSite ? "dist-combat"
                                                                                              : "dist-cluster-combat",
                                     header);
    doc["global"] = federated::to_json(model.global);
    doc["effects"] = federated::to_json(model.effects);
    return doc;
}

DistributedModel distributed_from_document(const nlohmann::json& doc) {
    const ModelHeader h = read_header(doc);
    if (h.kind != "dist-combat" && h.kind != "dist-cluster-combat")
        throw SchemaError("model document is '" + h.kind + "', expected a distributed model");
    return guarded([&] {
        return DistributedModel{federated::global_params_from_json(doc.at("global")),
                                federated::batch_effects_from_json(doc.at("effects"))};
    });
}

nlohmann::json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + " is not valid JSON: " + e.what());
    }
}

void save_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ccombat
