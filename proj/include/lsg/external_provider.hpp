#pragma once

// Client for an external logit-serving process. Wire protocol: newline-
// delimited JSON messages over a byte stream (TCP "host:port" or a local
// unix socket "unix:/path").
//
//   request  {"id": n, "source": [...], "target_prefix": [...]}
//   reply    {"id": n, "logprobs": {"<token>": lp, ...}, "truncated": bool}
//
// One reply per request, in order. Replies may cover only the top_k tokens;
// the remaining mass is completed to full vocabulary support per the
// configured rest-mass policy before any KL arithmetic sees it.

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <json.hpp>

#include "lsg/core.hpp"
#include "lsg/errors.hpp"
#include "lsg/providers.hpp"

namespace lsg {

enum class RestMassPolicy { UniformSpread, DiscardRenormalize };

inline RestMassPolicy rest_mass_policy_from_string(const std::string& s) {
    if (s == "uniform_spread") return RestMassPolicy::UniformSpread;
    if (s == "discard_renormalize") return RestMassPolicy::DiscardRenormalize;
    throw ParseError("unknown rest_mass policy: " + s);
}

struct ExternalProviderConfig {
    std::string endpoint;  // "host:port" or "unix:/path/to/socket"
    int timeout_ms = 1000;
    int top_k = 16;
    RestMassPolicy rest_mass = RestMassPolicy::UniformSpread;

    void validate() const {
        if (endpoint.empty()) throw Error("external provider needs an endpoint");
        if (timeout_ms <= 0) throw Error("timeout_ms must be > 0");
        if (top_k < 1) throw Error("top_k must be >= 1");
    }
};

namespace detail {

// Blocking line-oriented channel over a connected socket, with poll-based
// receive timeouts.
class LineChannel {
public:
    explicit LineChannel(const std::string& endpoint) {
        if (endpoint.rfind("unix:", 0) == 0) {
            connect_unix(endpoint.substr(5));
        } else {
            const auto colon = endpoint.rfind(':');
            if (colon == std::string::npos)
                throw Error("endpoint must be host:port or unix:/path, got " + endpoint);
            connect_tcp(endpoint.substr(0, colon), endpoint.substr(colon + 1));
        }
    }

    ~LineChannel() {
        if (fd_ >= 0) ::close(fd_);
    }

    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;

    void send_line(const std::string& line) {
        std::string msg = line + "\n";
        std::size_t off = 0;
        while (off < msg.size()) {
            const ssize_t n = ::send(fd_, msg.data() + off, msg.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string recv_line(int timeout_ms) {
        for (;;) {
            const auto nl = buf_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            pollfd pfd{fd_, POLLIN, 0};
            const int pr = ::poll(&pfd, 1, timeout_ms);
            if (pr < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (pr == 0)
                throw ProviderTimeout("no reply within " + std::to_string(timeout_ms) + " ms");
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
            }
            if (n == 0) throw ProtocolError("connection closed by peer");
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    void connect_tcp(const std::string& host, const std::string& port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
        if (rc != 0) throw Error("cannot resolve " + host + ":" + port + ": " + gai_strerror(rc));
        for (addrinfo* ai = res; ai; ai = ai->ai_next) {
            fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd_ < 0) continue;
            if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
            ::close(fd_);
            fd_ = -1;
        }
        ::freeaddrinfo(res);
        if (fd_ < 0) throw Error("cannot connect to " + host + ":" + port);
    }

    void connect_unix(const std::string& path) {
        sockaddr_un addr{};
        addr.sun_family = AF_UNIX;
        if (path.size() >= sizeof addr.sun_path) throw Error("unix socket path too long: " + path);
        std::strncpy(addr.sun_path, path.c_str(), sizeof addr.sun_path - 1);
        fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (fd_ < 0) throw Error(std::string("cannot create socket: ") + std::strerror(errno));
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            ::close(fd_);
            fd_ = -1;
            throw Error("cannot connect to unix socket " + path);
        }
    }

    int fd_ = -1;
    std::string buf_;
};

}  // namespace detail

// Completes a sparse token -> probability reply to full vocabulary support.
// UniformSpread shares the residual mass over unlisted tokens; the
// constructor's normalization doubles as the DiscardRenormalize division.
inline Distribution complete_distribution(const Vocabulary& vocab,
                                          const std::vector<std::pair<TokenId, double>>& listed,
                                          RestMassPolicy policy) {
    std::vector<double> probs(static_cast<std::size_t>(vocab.size()), 0.0);
    double listed_mass = 0.0;
    for (const auto& [id, p] : listed) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw InvalidDistribution("reply probability out of range");
        probs[static_cast<std::size_t>(id)] += p;
        listed_mass += p;
    }
    if (!(listed_mass > 0.0)) throw InvalidDistribution("reply carries no probability mass");
    if (listed_mass > 1.0 + 1e-6)
        throw InvalidDistribution("reply probabilities sum to " + std::to_string(listed_mass));

    if (policy == RestMassPolicy::UniformSpread) {
        const int unlisted = vocab.size() - static_cast<int>(listed.size());
        const double rest = std::max(0.0, 1.0 - listed_mass);
        if (unlisted > 0 && rest > 0.0) {
            const double share = rest / unlisted;
            for (std::size_t v = 0; v < probs.size(); ++v)
                if (probs[v] == 0.0) probs[v] = share;
        }
    }
    return Distribution(std::move(probs));
}

// One synchronous request per consultation. Not shareable across streams:
// requests are serialized on the single connection, so concurrent harness
// workers each get their own instance.
class ExternalProvider : public GeneratorContract {
public:
    ExternalProvider(Vocabulary vocab, ExternalProviderConfig config)
        : vocab_(std::move(vocab)), cfg_(std::move(config)), chan_(nullptr) {
        cfg_.validate();
        chan_ = std::make_unique<detail::LineChannel>(cfg_.endpoint);
    }

    const Vocabulary& vocabulary() const override { return vocab_; }

    Distribution next_distribution(int j, const SourceSequence& source,
                                   std::span<const TokenId> target_prefix) override {
        nlohmann::json req;
        const std::uint64_t id = next_id_++;
        req["id"] = id;
        req["source"] = std::vector<std::string>(source.elements().begin(),
                                                 source.elements().begin() + j);
        std::vector<std::string> prefix;
        prefix.reserve(target_prefix.size());
        for (TokenId t : target_prefix) prefix.push_back(vocab_.token(t));
        req["target_prefix"] = prefix;
        chan_->send_line(req.dump());

        const std::string line = chan_->recv_line(cfg_.timeout_ms);
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw ProtocolError(std::string("reply is not valid JSON: ") + e.what());
        }
        if (!reply.contains("id") || reply["id"].get<std::uint64_t>() != id)
            throw ProtocolError("reply id does not match request id " + std::to_string(id));
        if (!reply.contains("logprobs") || !reply["logprobs"].is_object())
            throw ProtocolError("reply has no logprobs object");
        if (static_cast<int>(reply["logprobs"].size()) > cfg_.top_k)
            throw ProtocolError("reply lists more than top_k=" + std::to_string(cfg_.top_k) +
                                " tokens");

        std::vector<std::pair<TokenId, double>> listed;
        for (const auto& [token, lp] : reply["logprobs"].items()) {
            const auto idx = vocab_.find(token);
            if (!idx) throw ProtocolError("reply token not in vocabulary: " + token);
            if (!lp.is_number()) throw ProtocolError("logprob for " + token + " is not a number");
            listed.emplace_back(*idx, std::exp(lp.get<double>()));
        }
        return complete_distribution(vocab_, listed, cfg_.rest_mass);
    }

private:
    Vocabulary vocab_;
    ExternalProviderConfig cfg_;
    std::unique_ptr<detail::LineChannel> chan_;
    std::uint64_t next_id_ = 0;
};

}  // namespace lsg
