#pragma once

// Foundational value types shared by every module: vocabularies, probability
// distributions over them, KL divergence, streaming actions and traces, and
// the policy hyperparameters with their named presets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lsg/errors.hpp"

namespace lsg {

using TokenId = std::int32_t;

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
public:
    Vocabulary(std::vector<std::string> tokens, TokenId eos_id)
        : tokens_(std::move(tokens)), eos_id_(eos_id) {
        if (tokens_.size() < 2)
            throw Error("vocabulary needs at least 2 tokens, got " + std::to_string(tokens_.size()));
        if (eos_id_ < 0 || static_cast<std::size_t>(eos_id_) >= tokens_.size())
            throw Error("eos_id " + std::to_string(eos_id_) + " out of range");
        for (std::size_t v = 0; v < tokens_.size(); ++v) {
            auto [it, inserted] = index_.emplace(tokens_[v], static_cast<TokenId>(v));
            if (!inserted) throw Error("duplicate vocabulary token: " + tokens_[v]);
        }
    }

    // Appends `eos` unless the token list already contains it.
    static Vocabulary with_eos(std::vector<std::string> tokens, std::string eos = "</s>") {
        const auto it = std::find(tokens.begin(), tokens.end(), eos);
        TokenId eos_id;
        if (it == tokens.end()) {
            eos_id = static_cast<TokenId>(tokens.size());
            tokens.push_back(std::move(eos));
        } else {
            eos_id = static_cast<TokenId>(it - tokens.begin());
        }
        return Vocabulary(std::move(tokens), eos_id);
    }

    int size() const { return static_cast<int>(tokens_.size()); }
    TokenId eos_id() const { return eos_id_; }
    const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::optional<TokenId> find(std::string_view t) const {
        auto it = index_.find(std::string(t));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId eos_id_;
};

// ---------------------------------------------------------------------------
// Distribution

// Probability vector over a vocabulary. Construction normalizes, so any
// non-negative weight vector with positive mass is accepted.
class Distribution {
public:
    explicit Distribution(std::vector<double> weights) : probs_(std::move(weights)) {
        if (probs_.empty()) throw InvalidDistribution("empty weight vector");
        double sum = 0.0;
        for (double w : probs_) {
            if (!(w >= 0.0))  // catches negatives and NaN
                throw InvalidDistribution("negative or non-finite weight");
            sum += w;
        }
        if (!(sum > 0.0)) throw InvalidDistribution("all-zero weight vector");
        for (double& w : probs_) w /= sum;
    }

    int size() const { return static_cast<int>(probs_.size()); }
    double operator[](int v) const { return probs_[static_cast<std::size_t>(v)]; }
    std::span<const double> probs() const { return probs_; }

private:
    std::vector<double> probs_;
};

inline Distribution make_distribution(std::vector<double> weights) {
    return Distribution(std::move(weights));
}

/// KL(p || q) in nats, with additive eps smoothing on both arguments so the
/// value stays finite when supports differ. Clamped to >= 0.
inline double kl_divergence(const Distribution& p, const Distribution& q, double eps = 1e-10) {
    if (p.size() != q.size())
        throw SupportMismatch("KL over different supports: " + std::to_string(p.size()) +
                              " vs " + std::to_string(q.size()));
    double sum = 0.0;
    for (int v = 0; v < p.size(); ++v)
        sum += p[v] * std::log((p[v] + eps) / (q[v] + eps));
    return sum < 0.0 ? 0.0 : sum;
}

/// Index of the maximal probability; ties break to the lowest index.
inline TokenId argmax_token(const Distribution& p) {
    int best = 0;
    for (int v = 1; v < p.size(); ++v)
        if (p[v] > p[best]) best = v;
    return static_cast<TokenId>(best);
}

inline double max_prob(const Distribution& p) {
    double best = p[0];
    for (int v = 1; v < p.size(); ++v) best = std::max(best, p[v]);
    return best;
}

// ---------------------------------------------------------------------------
// Actions, triggers, traces

enum class Action { Read, Write };

// Why a decision fired. AwaitingInput is the READ case; the others label a
// WRITE, in the fixed precedence order used by the decision rule.
enum class Trigger { SourceExhausted, ForcedUpperBound, Kl, Confidence, AwaitingInput };

inline const char* to_string(Action a) { return a == Action::Read ? "READ" : "WRITE"; }

inline const char* to_string(Trigger t) {
    switch (t) {
        case Trigger::SourceExhausted:  return "source_exhausted";
        case Trigger::ForcedUpperBound: return "forced_upper_bound";
        case Trigger::Kl:               return "kl";
        case Trigger::Confidence:       return "confidence";
        case Trigger::AwaitingInput:    return "awaiting_input";
    }
    return "?";
}

// One provider consultation: target step i was decided at source prefix j.
struct TraceStep {
    int i = 0;
    int j = 0;
    Action action = Action::Read;
    std::optional<double> kl;  // absent for fixed schedules that never compare
    double max_prob = 0.0;
    Trigger trigger = Trigger::AwaitingInput;
};

// g[i-1] = source elements read when token i was emitted, plus the full
// decision log. g is non-decreasing and bounded by the source length.
struct PolicyTrace {
    std::vector<int> g;
    std::vector<TraceStep> steps;
};

// ---------------------------------------------------------------------------
// Source sequences

enum class SourceKind { Text, Speech };

// Ordered source elements: words for text, opaque segment handles for speech.
// Speech carries the per-segment duration in milliseconds.
class SourceSequence {
public:
    static SourceSequence text(std::vector<std::string> tokens) {
        return SourceSequence(SourceKind::Text, std::move(tokens), std::nullopt);
    }
    static SourceSequence speech(std::vector<std::string> segments, int segment_ms = 640) {
        return SourceSequence(SourceKind::Speech, std::move(segments), segment_ms);
    }

    SourceKind kind() const { return kind_; }
    int length() const { return static_cast<int>(elements_.size()); }
    const std::vector<std::string>& elements() const { return elements_; }
    std::optional<int> segment_ms() const { return segment_ms_; }

private:
    SourceSequence(SourceKind kind, std::vector<std::string> elements, std::optional<int> segment_ms)
        : kind_(kind), elements_(std::move(elements)), segment_ms_(segment_ms) {
        if (elements_.empty()) throw Error("source sequence must have at least one element");
        if (kind_ == SourceKind::Speech) {
            if (!segment_ms_ || *segment_ms_ <= 0)
                throw Error("speech source needs a positive segment_ms");
        } else if (segment_ms_) {
            throw Error("segment_ms only applies to speech sources");
        }
    }

    SourceKind kind_;
    std::vector<std::string> elements_;
    std::optional<int> segment_ms_;
};

// ---------------------------------------------------------------------------
// Hyperparameters

// delta/alpha gate the two WRITE triggers; [L, L+U] shapes the per-step
// search range. alpha = 1.0 disables the confidence trigger outright (the
// comparison is made against 1.01 so not even a point mass can fire it).
struct HyperParams {
    double delta = 0.0;
    double alpha = 1.0;
    int L = 1;
    int U = 0;
    int k = 1;             // wait-k schedules only
    int segment_ms = 640;  // speech segment duration

    void validate() const {
        if (!(delta >= 0.0)) throw Error("delta must be >= 0");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must be in [0, 1]");
        if (L < 1) throw Error("L must be >= 1");
        if (U < 0) throw Error("U must be >= 0");
        if (k < 1) throw Error("k must be >= 1");
        if (segment_ms < 1) throw Error("segment_ms must be >= 1");
    }

    bool confidence_enabled() const { return alpha < 1.0; }
};

// Threshold actually compared against max_prob. alpha = 1.0 maps to 1.01 so
// the strict inequality can never be met.
inline double effective_alpha(const HyperParams& hp) {
    return hp.alpha >= 1.0 ? 1.01 : hp.alpha;
}

/// Named hyperparameter presets: "de-en" {9.0, 0.6}, "en-de" {7.5, 0.6},
/// "fr-en" {7.0, 0.5}; all with 640 ms speech segments.
inline HyperParams preset(std::string_view name) {
    HyperParams hp;
    hp.L = 1;
    hp.U = 4;
    if (name == "de-en") {
        hp.delta = 9.0; hp.alpha = 0.6;
    } else if (name == "en-de") {
        hp.delta = 7.5; hp.alpha = 0.6;
    } else if (name == "fr-en") {
        hp.delta = 7.0; hp.alpha = 0.5;
    } else {
        throw Error("unknown preset: " + std::string(name));
    }
    hp.segment_ms = 640;
    return hp;
}

/// The four [L, U] operating points used for latency ladders.
inline std::vector<std::pair<int, int>> latency_ladder() {
    return {{1, 4}, {3, 4}, {5, 6}, {7, 6}};
}

}  // namespace lsg
