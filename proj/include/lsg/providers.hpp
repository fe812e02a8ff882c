#pragma once

// Next-token distribution sources: the abstract generator contract plus two
// deterministic in-process providers used for testing and synthetic corpora.
// The network-backed provider lives in external_provider.hpp.

#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lsg/core.hpp"
#include "lsg/errors.hpp"

namespace lsg {

// What the decode engine needs from a model: a deterministic next-token
// distribution given how much source is visible (j elements) and what has
// been generated so far. Providers receive the prefix LENGTH, not re-cut
// text, so the engine stays oblivious to modality.
class GeneratorContract {
public:
    virtual ~GeneratorContract() = default;
    virtual const Vocabulary& vocabulary() const = 0;
    virtual Distribution next_distribution(int source_prefix_len, const SourceSequence& source,
                                           std::span<const TokenId> target_prefix) = 0;
};

// ---------------------------------------------------------------------------
// TableProvider

// Explicit (j, target prefix) -> weight table. The test oracle substrate:
// every state the decode will reach must have an entry.
class TableProvider : public GeneratorContract {
public:
    explicit TableProvider(Vocabulary vocab) : vocab_(std::move(vocab)) {}

    void add_entry(int j, std::vector<TokenId> prefix, std::vector<double> weights) {
        if (static_cast<int>(weights.size()) != vocab_.size())
            throw InvalidDistribution("table weights length != vocabulary size");
        entries_.insert_or_assign({j, std::move(prefix)}, Distribution(std::move(weights)));
    }

    bool has_entry(int j, const std::vector<TokenId>& prefix) const {
        return entries_.count({j, prefix}) != 0;
    }

    const Vocabulary& vocabulary() const override { return vocab_; }

    Distribution next_distribution(int j, const SourceSequence&,
                                   std::span<const TokenId> target_prefix) override {
        std::vector<TokenId> prefix(target_prefix.begin(), target_prefix.end());
        auto it = entries_.find({j, prefix});
        if (it == entries_.end()) {
            std::string p;
            for (TokenId t : prefix) p += (p.empty() ? "" : ",") + std::to_string(t);
            throw UnknownState("no table entry for j=" + std::to_string(j) + " prefix=[" + p + "]");
        }
        return it->second;
    }

private:
    Vocabulary vocab_;
    std::map<std::pair<int, std::vector<TokenId>>, Distribution> entries_;
};

// ---------------------------------------------------------------------------
// Lag language

// Synthetic language where target token i deterministically depends on source
// position pi(i) (1-based), making ideal policies and alignments analytic.
// Target length equals source length; one extra terminator step emits EOS
// once the whole source is visible.
struct LagLanguageSpec {
    Vocabulary vocabulary;
    std::vector<std::string> source;                     // length J
    std::vector<int> pi;                                 // 1-based, length J, values in [1, J]
    std::unordered_map<std::string, std::string> emit;   // empty = identity
    double eta = 0.0;                                    // noise mass in [0, 0.5)
};

class LagLanguageProvider : public GeneratorContract {
public:
    explicit LagLanguageProvider(LagLanguageSpec spec) : spec_(std::move(spec)) {
        const int J = static_cast<int>(spec_.source.size());
        if (J < 1) throw Error("lag language needs a non-empty source");
        if (static_cast<int>(spec_.pi.size()) != J)
            throw Error("pi length must equal source length");
        for (int p : spec_.pi)
            if (p < 1 || p > J) throw Error("pi value " + std::to_string(p) + " outside [1, J]");
        if (!(spec_.eta >= 0.0 && spec_.eta < 0.5)) throw Error("eta must be in [0, 0.5)");
        // emitted token id per source position; step i emits the one at pi(i)
        emitted_ids_.reserve(spec_.source.size());
        for (const auto& s : spec_.source) {
            const std::string& t = emit_of(s);
            auto id = spec_.vocabulary.find(t);
            if (!id) throw Error("emitted token not in vocabulary: " + t);
            emitted_ids_.push_back(*id);
        }
    }

    const LagLanguageSpec& spec() const { return spec_; }
    const Vocabulary& vocabulary() const override { return spec_.vocabulary; }

    // j >= pi(i): mass 1-eta on the emitted token, eta spread over the rest;
    // j < pi(i): uniform over the whole vocabulary. Step I+1 is the
    // terminator and needs the full source.
    Distribution next_distribution(int j, const SourceSequence& source,
                                   std::span<const TokenId> target_prefix) override {
        const int J = static_cast<int>(spec_.source.size());
        if (source.length() != J)
            throw std::invalid_argument("source length does not match lag language spec");
        const int I = J;
        const int i = static_cast<int>(target_prefix.size()) + 1;
        if (i > I + 1)
            throw PrefixOverrun("target prefix length " + std::to_string(target_prefix.size()) +
                                " exceeds I=" + std::to_string(I));
        const int needed = (i <= I) ? spec_.pi[static_cast<std::size_t>(i - 1)] : J;
        const TokenId target = (i <= I) ? emitted_ids_[static_cast<std::size_t>(needed - 1)]
                                        : spec_.vocabulary.eos_id();
        const int V = spec_.vocabulary.size();
        std::vector<double> probs(static_cast<std::size_t>(V), 0.0);
        if (j >= needed) {
            const double rest = spec_.eta / static_cast<double>(V - 1);
            for (auto& p : probs) p = rest;
            probs[static_cast<std::size_t>(target)] = 1.0 - spec_.eta;
        } else {
            for (auto& p : probs) p = 1.0 / static_cast<double>(V);
        }
        return Distribution(std::move(probs));
    }

private:
    const std::string& emit_of(const std::string& s) const {
        if (spec_.emit.empty()) return s;
        auto it = spec_.emit.find(s);
        if (it == spec_.emit.end()) throw Error("emit map misses source token: " + s);
        return it->second;
    }

    LagLanguageSpec spec_;
    std::vector<TokenId> emitted_ids_;
};

// Named pi patterns used by configs and corpus builders:
//   identity       pi(i) = i
//   shift:<d>      pi(i) = min(i + d, J)
//   halfsplit:<d>  pi(i) = i for i <= J/2, min(i + d, J) for J/2 < i < J,
//                  and pi(J) = max(J/2, 1); exactly half the positions are
//                  baseline-sufficient with pi(i) = i.
inline std::vector<int> make_pi(const std::string& pattern, int J) {
    if (J < 1) throw Error("J must be >= 1");
    std::vector<int> pi(static_cast<std::size_t>(J));
    auto suffix_int = [&](std::size_t at) {
        try {
            return std::stoi(pattern.substr(at));
        } catch (const std::exception&) {
            throw Error("bad pi pattern: " + pattern);
        }
    };
    if (pattern == "identity") {
        for (int i = 1; i <= J; ++i) pi[i - 1] = i;
    } else if (pattern.rfind("shift:", 0) == 0) {
        const int d = suffix_int(6);
        if (d < 0) throw Error("shift distance must be >= 0");
        for (int i = 1; i <= J; ++i) pi[i - 1] = std::min(i + d, J);
    } else if (pattern.rfind("halfsplit:", 0) == 0) {
        const int d = suffix_int(10);
        if (d < 1) throw Error("halfsplit distance must be >= 1");
        const int half = J / 2;
        for (int i = 1; i <= J; ++i) {
            if (i <= half) pi[i - 1] = i;
            else if (i < J) pi[i - 1] = std::min(i + d, J);
            else pi[i - 1] = std::max(half, 1);
        }
    } else {
        throw Error("unknown pi pattern: " + pattern);
    }
    return pi;
}

// Vocabulary + spec for a lag language over the given source: distinct source
// tokens in order of first appearance, EOS appended.
inline LagLanguageSpec make_lag_spec(const std::vector<std::string>& source_tokens,
                                     const std::string& pi_pattern, double eta) {
    std::vector<std::string> vocab_tokens;
    for (const auto& t : source_tokens)
        if (std::find(vocab_tokens.begin(), vocab_tokens.end(), t) == vocab_tokens.end())
            vocab_tokens.push_back(t);
    LagLanguageSpec spec{Vocabulary::with_eos(std::move(vocab_tokens)), source_tokens,
                         make_pi(pi_pattern, static_cast<int>(source_tokens.size())), {}, eta};
    return spec;
}

}  // namespace lsg
