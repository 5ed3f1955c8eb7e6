#include "ccombat/federated/messages.hpp"

#include <cstdint>
#include <cstdio>

#include "ccombat/error.hpp"

namespace ccombat::federated {

std::string to_string(Round r) {
    switch (r) {
        case Round::LocalParams: return "LocalParams";
        case Round::GlobalParams: return "GlobalParams";
        case Round::LocalEB: return "LocalEB";
        case Round::ClusterEB: return "ClusterEB";
    }
    return "?";
}

Round round_from_string(const std::string& s) {
    if (s == "LocalParams") return Round::LocalParams;
    if (s == "GlobalParams") return Round::GlobalParams;
    if (s == "LocalEB") return Round::LocalEB;
    if (s == "ClusterEB") return Round::ClusterEB;
    throw ProtocolError("unknown round tag '" + s + "'");
}

std::string to_string(DistributedMode m) { return m == DistributedMode::PerSite ? "per-site" : "clustered"; }

DistributedMode mode_from_string(const std::string& s) {
    if (s == "per-site") return DistributedMode::PerSite;
    if (s == "clustered") return DistributedMode::Clustered;
    throw ConfigError("unknown distributed mode '" + s + "'");
}

std::size_t GlobalParams::cluster_of(const std::string& site) const {
    for (const auto& [id, c] : cluster_of_site)
        if (id == site) return c;
    throw ProtocolError("site '" + site + "' has no cluster assignment");
}

std::string content_digest(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + buf;
}

nlohmann::json to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    const auto& data = j.at("data");
    if (data.size() != rows) throw ProtocolError("matrix row count does not match its data");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        auto v = data[r].get<std::vector<double>>();
        if (v.size() != cols) throw ProtocolError("matrix column count does not match its data");
        std::copy(v.begin(), v.end(), m.row(r).begin());
    }
    return m;
}

nlohmann::json to_json(const ClusterModel& m) {
    return {{"centroids", to_json(m.centroids)},
            {"space", to_string(m.space)},
            {"inertia", m.inertia},
            {"shift", m.shift},
            {"scale", m.scale}};
}

ClusterModel cluster_model_from_json(const nlohmann::json& j) {
    ClusterModel m;
    m.centroids = matrix_from_json(j.at("centroids"));
    m.space = cluster_space_from_string(j.at("space").get<std::string>());
    m.inertia = j.at("inertia").get<double>();
    m.shift = j.value("shift", Vector{});
    m.scale = j.value("scale", Vector{});
    return m;
}

nlohmann::json to_json(const BatchEffects& e) {
    return {{"gamma_star", to_json(e.gamma_star)},
            {"delta_sq_star", to_json(e.delta_sq_star)},
            {"group_labels", e.group_labels}};
}

BatchEffects batch_effects_from_json(const nlohmann::json& j) {
    BatchEffects e;
    e.gamma_star = matrix_from_json(j.at("gamma_star"));
    e.delta_sq_star = matrix_from_json(j.at("delta_sq_star"));
    e.group_labels = j.at("group_labels").get<std::vector<std::string>>();
    return e;
}

nlohmann::json to_json(const GlobalParams& g) {
    nlohmann::json map = nlohmann::json::array();
    for (const auto& [site, c] : g.cluster_of_site) map.push_back({{"site", site}, {"cluster", c}});
    return {{"mode", to_string(g.mode)},  {"alpha", g.alpha},
            {"beta", to_json(g.beta)},    {"sigma", g.sigma},
            {"cluster_model", to_json(g.cluster_model)}, {"cluster_of_site", std::move(map)}};
}

GlobalParams global_params_from_json(const nlohmann::json& j) {
    GlobalParams g;
    g.mode = mode_from_string(j.at("mode").get<std::string>());
    g.alpha = j.at("alpha").get<Vector>();
    g.beta = matrix_from_json(j.at("beta"));
    g.sigma = j.at("sigma").get<Vector>();
    g.cluster_model = cluster_model_from_json(j.at("cluster_model"));
    for (const auto& e : j.at("cluster_of_site"))
        g.cluster_of_site.emplace_back(e.at("site").get<std::string>(), e.at("cluster").get<std::size_t>());
    return g;
}

namespace {

nlohmann::json payload_json(const Payload& p) {
    return std::visit(
        [](const auto& v) -> nlohmann::json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SiteLocalParams>) {
                return {{"type", "SiteLocalParams"},
                        {"site_id", v.site_id},
                        {"alpha_local", v.alpha_local},
                        {"beta_local", to_json(v.beta_local)},
                        {"gamma_local", v.gamma_local},
                        {"n_samples", v.n_samples},
                        {"design_gram", to_json(v.design_gram)},
                        {"design_cross", to_json(v.design_cross)},
                        {"response_sq", v.response_sq},
                        {"ridge_fallback", v.ridge_fallback}};
            } else if constexpr (std::is_same_v<T, GlobalParams>) {
                nlohmann::json j = to_json(v);
                j["type"] = "GlobalParams";
                return j;
            } else if constexpr (std::is_same_v<T, SiteEBParams>) {
                return {{"type", "SiteEBParams"},
                        {"site_id", v.site_id},
                        {"gamma_star_local", v.gamma_star_local},
                        {"delta_sq_star_local", v.delta_sq_star_local}};
            } else {
                nlohmann::json j = to_json(v);
                j["type"] = "BatchEffects";
                return j;
            }
        },
        p);
}

Round expected_round(const Payload& p) {
    switch (p.index()) {
        case 0: return Round::LocalParams;
        case 1: return Round::GlobalParams;
        case 2: return Round::LocalEB;
        default: return Round::ClusterEB;
    }
}

Payload payload_from_json(const nlohmann::json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "SiteLocalParams") {
        SiteLocalParams v;
        v.site_id = j.at("site_id").get<std::string>();
        v.alpha_local = j.at("alpha_local").get<Vector>();
        v.beta_local = matrix_from_json(j.at("beta_local"));
        v.gamma_local = j.at("gamma_local").get<Vector>();
        v.n_samples = j.at("n_samples").get<std::size_t>();
        v.design_gram = matrix_from_json(j.at("design_gram"));
        v.design_cross = matrix_from_json(j.at("design_cross"));
        v.response_sq = j.at("response_sq").get<Vector>();
        v.ridge_fallback = j.at("ridge_fallback").get<bool>();
        return v;
    }
    if (type == "GlobalParams") return global_params_from_json(j);
    if (type == "SiteEBParams") {
        SiteEBParams v;
        v.site_id = j.at("site_id").get<std::string>();
        v.gamma_star_local = j.at("gamma_star_local").get<Vector>();
        v.delta_sq_star_local = j.at("delta_sq_star_local").get<Vector>();
        return v;
    }
    if (type == "BatchEffects") return batch_effects_from_json(j);
    throw ProtocolError("unknown payload type '" + type + "'");
}

}  // namespace

nlohmann::json encode(const RoundMessage& msg) {
    if (expected_round(msg.payload) != msg.round)
        throw ProtocolError("payload type does not match round " + to_string(msg.round));
    nlohmann::json payload = payload_json(msg.payload);
    const std::string digest = content_digest(payload.dump());
    return {{"protocol_version", msg.protocol_version},
            {"round", to_string(msg.round)},
            {"sender", msg.sender},
            {"recipient", msg.recipient},
            {"payload", std::move(payload)},
            {"digest", digest}};
}

RoundMessage decode(const nlohmann::json& j) {
    try {
        RoundMessage msg;
        msg.protocol_version = j.at("protocol_version").get<int>();
        if (msg.protocol_version != kProtocolVersion)
            throw ProtocolError("unsupported protocol version " + std::to_string(msg.protocol_version));
        msg.round = round_from_string(j.at("round").get<std::string>());
        msg.sender = j.at("sender").get<std::string>();
        msg.recipient = j.at("recipient").get<std::string>();
        const auto& payload = j.at("payload");
        if (content_digest(payload.dump()) != j.at("digest").get<std::string>())
            throw ProtocolError("digest mismatch in " + to_string(msg.round) + " message from " + msg.sender);
        msg.payload = payload_from_json(payload);
        if (expected_round(msg.payload) != msg.round)
            throw ProtocolError("payload type does not match round " + to_string(msg.round));
        return msg;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed message: ") + e.what());
    }
}

Vector parameter_vector(const Vector& alpha, const Matrix& beta, const Vector& gamma) {
    Vector v;
    v.reserve(alpha.size() + beta.data().size() + gamma.size());
    v.insert(v.end(), alpha.begin(), alpha.end());
    v.insert(v.end(), beta.data().begin(), beta.data().end());
    v.insert(v.end(), gamma.begin(), gamma.end());
    return v;
}

}  // namespace ccombat::federated
