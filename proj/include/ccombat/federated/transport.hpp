#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "ccombat/federated/messages.hpp"

namespace ccombat::federated {

// Moves encoded round messages between parties. Every message passes
// through encode()/decode(), so both built-in transports exercise the same
// wire format and keep a transcript of exactly what crossed the boundary.
class Transport {
public:
    virtual ~Transport() = default;

    void post(const RoundMessage& msg);
    // Blocks until the message (round, sender -> recipient) is available;
    // throws TimeoutError naming the sender when the deadline passes.
    RoundMessage fetch(Round round, const std::string& sender, const std::string& recipient);

    // Every posted message in posting order.
    std::vector<nlohmann::json> transcript() const;
    // Transcript sorted by (round, sender, recipient): independent of the
    // order in which concurrent sites happened to post.
    std::vector<nlohmann::json> canonical_transcript() const;

    // Coordinator-side documents (global.json, effects.json). Not part of
    // the message flow; transports without storage ignore them.
    virtual void publish(const std::string& name, const nlohmann::json& doc) { (void)name, (void)doc; }

protected:
    virtual void deliver(const RoundMessage& msg, const nlohmann::json& encoded) = 0;
    virtual nlohmann::json await(Round round, const std::string& sender, const std::string& recipient) = 0;

private:
    mutable std::mutex log_mu_;
    std::vector<nlohmann::json> log_;
};

class InProcessTransport : public Transport {
public:
    explicit InProcessTransport(std::chrono::milliseconds timeout = std::chrono::milliseconds(0))
        : timeout_(timeout) {}

protected:
    void deliver(const RoundMessage& msg, const nlohmann::json& encoded) override;
    nlohmann::json await(Round round, const std::string& sender, const std::string& recipient) override;

private:
    using Key = std::tuple<int, std::string, std::string>;
    std::chrono::milliseconds timeout_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::map<Key, std::string> mailbox_;
};

// Directory-based exchange. Site-party messages are written as
// round<k>_<site>.json (the site is the sender in rounds 1 and 3 and the
// recipient in rounds 2 and 4). Writes are atomic (temp file + rename);
// readers poll until the file appears or the per-round deadline expires.
class FileTransport : public Transport {
public:
    explicit FileTransport(std::filesystem::path dir,
                           std::chrono::milliseconds timeout = std::chrono::seconds(60),
                           std::chrono::milliseconds poll = std::chrono::milliseconds(10));

    const std::filesystem::path& directory() const noexcept { return dir_; }
    std::filesystem::path path_for(Round round, const std::string& site) const;

    void publish(const std::string& name, const nlohmann::json& doc) override;

protected:
    void deliver(const RoundMessage& msg, const nlohmann::json& encoded) override;
    nlohmann::json await(Round round, const std::string& sender, const std::string& recipient) override;

private:
    std::filesystem::path dir_;
    std::chrono::milliseconds timeout_;
    std::chrono::milliseconds poll_;
};

// File-name-safe rendering of an opaque site id (percent-encodes anything
// outside [A-Za-z0-9._-]).
std::string encode_site_id(const std::string& id);

// Privacy scan of a transcript: returns a description of every violation
// (unknown message type, or a payload matrix shaped like raw feature rows,
// i.e. rows == some N_i and cols == G). Empty means clean.
std::vector<std::string> scan_transcript(const std::vector<nlohmann::json>& transcript,
                                         const std::vector<std::size_t>& site_sizes, std::size_t n_features);

}  // namespace ccombat::federated
