#include "ccombat/federated/transport.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <thread>

#include "ccombat/error.hpp"

namespace ccombat::federated {

void Transport::post(const RoundMessage& msg) {
    nlohmann::json encoded = encode(msg);
    {
        std::lock_guard lock(log_mu_);
        log_.push_back(encoded);
    }
    deliver(msg, encoded);
}

RoundMessage Transport::fetch(Round round, const std::string& sender, const std::string& recipient) {
    RoundMessage msg = decode(await(round, sender, recipient));
    if (msg.sender != sender || msg.recipient != recipient)
        throw ProtocolError("message addressed " + msg.sender + " -> " + msg.recipient + " arrived on channel " +
                            sender + " -> " + recipient);
    return msg;
}

std::vector<nlohmann::json> Transport::transcript() const {
    std::lock_guard lock(log_mu_);
    return log_;
}

std::vector<nlohmann::json> Transport::canonical_transcript() const {
    auto out = transcript();
    auto key = [](const nlohmann::json& j) {
        return std::make_tuple(static_cast<int>(round_from_string(j.at("round").get<std::string>())),
                               j.at("sender").get<std::string>(), j.at("recipient").get<std::string>());
    };
    std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    return out;
}

void InProcessTransport::deliver(const RoundMessage& msg, const nlohmann::json& encoded) {
    {
        std::lock_guard lock(mu_);
        mailbox_[{static_cast<int>(msg.round), msg.sender, msg.recipient}] = encoded.dump();
    }
    cv_.notify_all();
}

nlohmann::json InProcessTransport::await(Round round, const std::string& sender, const std::string& recipient) {
    std::unique_lock lock(mu_);
    const Key key{static_cast<int>(round), sender, recipient};
    const bool ok = cv_.wait_for(lock, timeout_, [&] { return mailbox_.count(key) > 0; });
    if (!ok)
        throw TimeoutError(sender, "round " + to_string(round) + " timed out waiting for '" + sender + "'");
    return nlohmann::json::parse(mailbox_.at(key));
}

std::string encode_site_id(const std::string& id) {
    std::string out;
    for (unsigned char c : id) {
        if (std::isalnum(c) || c == '.' || c == '_' || c == '-') {
            out.push_back(static_cast<char>(c));
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

FileTransport::FileTransport(std::filesystem::path dir, std::chrono::milliseconds timeout,
                             std::chrono::milliseconds poll)
    : dir_(std::move(dir)), timeout_(timeout), poll_(poll) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create exchange directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path FileTransport::path_for(Round round, const std::string& site) const {
    return dir_ / ("round" + std::to_string(static_cast<int>(round)) + "_" + encode_site_id(site) + ".json");
}

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp);
        out << text;
        if (!out) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot publish " + path.string() + ": " + ec.message());
}

bool site_sends(Round r) { return r == Round::LocalParams || r == Round::LocalEB; }

}  // namespace

void FileTransport::publish(const std::string& name, const nlohmann::json& doc) {
    nlohmann::json envelope = {{"protocol_version", kProtocolVersion},
                               {"document", name},
                               {"content", doc},
                               {"digest", content_digest(doc.dump())}};
    write_atomic(dir_ / name, envelope.dump(2) + "\n");
}

void FileTransport::deliver(const RoundMessage& msg, const nlohmann::json& encoded) {
    const std::string& site = site_sends(msg.round) ? msg.sender : msg.recipient;
    write_atomic(path_for(msg.round, site), encoded.dump(2) + "\n");
}

nlohmann::json FileTransport::await(Round round, const std::string& sender, const std::string& recipient) {
    const std::string& site = site_sends(round) ? sender : recipient;
    const auto path = path_for(round, site);
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
        if (std::filesystem::exists(path)) {
            std::ifstream in(path, std::ios::binary);
            try {
                return nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolError("unreadable round file " + path.string() + ": " + e.what());
            }
        }
        if (std::chrono::steady_clock::now() >= deadline)
            throw TimeoutError(sender, "round " + to_string(round) + " timed out waiting for '" + sender + "' (" +
                                           path.filename().string() + ")");
        std::this_thread::sleep_for(poll_);
    }
}

namespace {

void scan_node(const nlohmann::json& node, const std::string& where, const std::vector<std::size_t>& sizes,
               std::size_t g, std::vector<std::string>& out) {
    if (node.is_object()) {
        if (node.contains("rows") && node.contains("cols") && node.contains("data")) {
            const auto rows = node["rows"].get<std::size_t>();
            const auto cols = node["cols"].get<std::size_t>();
            if (cols == g && std::find(sizes.begin(), sizes.end(), rows) != sizes.end())
                out.push_back(where + ": " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " matrix has the shape of a site's feature rows");
        }
        for (const auto& [k, v] : node.items()) scan_node(v, where + "." + k, sizes, g, out);
    } else if (node.is_array()) {
        if (!node.empty() && node[0].is_array() && node[0].size() == g &&
            std::find(sizes.begin(), sizes.end(), node.size()) != sizes.end() && g > 0 && where.find(".data") == std::string::npos)
            out.push_back(where + ": nested array has the shape of a site's feature rows");
        std::size_t i = 0;
        for (const auto& v : node) scan_node(v, where + "[" + std::to_string(i++) + "]", sizes, g, out);
    }
}

}  // namespace

std::vector<std::string> scan_transcript(const std::vector<nlohmann::json>& transcript,
                                         const std::vector<std::size_t>& site_sizes, std::size_t n_features) {
    static const std::vector<std::string> allowed = {"SiteLocalParams", "GlobalParams", "SiteEBParams",
                                                     "BatchEffects"};
    std::vector<std::string> violations;
    for (std::size_t i = 0; i < transcript.size(); ++i) {
        const auto& msg = transcript[i];
        const std::string where = "message " + std::to_string(i);
        if (!msg.contains("payload") || !msg["payload"].contains("type")) {
            violations.push_back(where + ": no typed payload");
            continue;
        }
        const auto type = msg["payload"]["type"].get<std::string>();
        if (std::find(allowed.begin(), allowed.end(), type) == allowed.end())
            violations.push_back(where + ": unexpected payload type '" + type + "'");
        scan_node(msg["payload"], where, site_sizes, n_features, violations);
    }
    return violations;
}

}  // namespace ccombat::federated
