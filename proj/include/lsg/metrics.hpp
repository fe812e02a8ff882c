#pragma once

// Latency metrics (average lagging in words and milliseconds, plus the
// computation-aware variant over simulated timelines), quality metrics
// (corpus BLEU, word error rate), and the policy sufficiency rate.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsg/engine.hpp"
#include "lsg/errors.hpp"

namespace lsg {

struct MetricReport {
    double al = 0.0;                    // words (text) or ms (speech)
    std::optional<double> al_ca;        // ms, speech with clock simulation only
    double bleu = 0.0;                  // [0, 100]
    double wer = 0.0;                   // >= 0
    std::optional<double> sufficiency;  // [0, 1], needs an alignment
};

namespace detail {

// First step whose read count covers the whole source; I if none does.
inline int lag_cutoff(std::span<const int> g, int J) {
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g[i] == J) return static_cast<int>(i) + 1;
    return static_cast<int>(g.size());
}

}  // namespace detail

/// Average lagging for text, in words: the tau-truncated mean of
/// g_i - (i-1)/r with r = I/J and tau the first step that read everything.
inline double average_lagging_text(std::span<const int> g, int J) {
    if (g.empty()) throw Error("average lagging needs at least one emission");
    const int I = static_cast<int>(g.size());
    const double r = static_cast<double>(I) / static_cast<double>(J);
    const int tau = detail::lag_cutoff(g, J);
    double sum = 0.0;
    for (int i = 1; i <= tau; ++i) sum += g[i - 1] - (i - 1) / r;
    return sum / tau;
}

/// Average lagging for speech, in milliseconds. Elapsed source time per step
/// is min(g_i * segment_ms, T) with T the total source duration.
inline double average_lagging_speech(std::span<const int> g, int segment_ms, int J) {
    if (g.empty()) throw Error("average lagging needs at least one emission");
    const int I = static_cast<int>(g.size());
    const double T = static_cast<double>(J) * segment_ms;
    const double r = static_cast<double>(I) / T;
    const int tau = detail::lag_cutoff(g, J);
    double sum = 0.0;
    for (int i = 1; i <= tau; ++i)
        sum += std::min(static_cast<double>(g[i - 1]) * segment_ms, T) - (i - 1) / r;
    return sum / tau;
}

/// Computation-aware average lagging: the same formula with elapsed time
/// replaced by each token's emission wall time from a simulated timeline.
/// g supplies the tau cutoff; T is the total source duration in ms.
inline double computation_aware_al(std::span<const DecodeEvent> events, std::span<const int> g,
                                   int J, double T) {
    if (g.empty()) throw Error("average lagging needs at least one emission");
    const int I = static_cast<int>(g.size());
    std::vector<double> emit_time(static_cast<std::size_t>(I),
                                  -std::numeric_limits<double>::infinity());
    for (const auto& e : events)
        if (e.kind == DecodeEvent::Kind::Emission && e.i >= 1 && e.i <= I)
            emit_time[static_cast<std::size_t>(e.i - 1)] = e.wall_time_ms;
    for (double t : emit_time)
        if (!std::isfinite(t)) throw MalformedTimeline("timeline is missing emissions");

    const double r = static_cast<double>(I) / T;
    const int tau = detail::lag_cutoff(g, J);
    double sum = 0.0;
    for (int i = 1; i <= tau; ++i) sum += emit_time[i - 1] - (i - 1) / r;
    return sum / tau;
}

// ---------------------------------------------------------------------------
// Quality

/// Levenshtein distance with unit substitution/insertion/deletion costs.
inline int edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp) {
    const std::size_t R = ref.size(), H = hyp.size();
    std::vector<int> prev(H + 1), cur(H + 1);
    for (std::size_t c = 0; c <= H; ++c) prev[c] = static_cast<int>(c);
    for (std::size_t r = 1; r <= R; ++r) {
        cur[0] = static_cast<int>(r);
        for (std::size_t c = 1; c <= H; ++c) {
            const int sub = prev[c - 1] + (ref[r - 1] == hyp[c - 1] ? 0 : 1);
            cur[c] = std::min({prev[c] + 1, cur[c - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[H];
}

inline double word_error_rate(std::span<const std::string> reference,
                              std::span<const std::string> hypothesis) {
    if (reference.empty()) throw EmptyReference("WER needs a non-empty reference");
    return static_cast<double>(edit_distance(reference, hypothesis)) /
           static_cast<double>(reference.size());
}

/// Corpus BLEU over whitespace-free token lists: geometric mean of clipped
/// modified n-gram precisions up to max_n, times the brevity penalty.
/// No smoothing: any zero precision makes the score 0. Orders the hypothesis
/// corpus has no n-grams for are dropped from the mean (effective order), so
/// corpus_bleu(ref, ref) is exactly 100 even for short sentences.
inline double corpus_bleu(const std::vector<std::vector<std::string>>& references,
                          const std::vector<std::vector<std::string>>& hypotheses,
                          int max_n = 4) {
    if (references.size() != hypotheses.size())
        throw CorpusMismatch("reference/hypothesis corpus sizes differ");
    if (references.empty()) throw CorpusMismatch("empty corpus");

    auto ngram_counts = [](const std::vector<std::string>& toks, int n) {
        std::map<std::vector<std::string>, int> counts;
        for (int s = 0; s + n <= static_cast<int>(toks.size()); ++s)
            ++counts[{toks.begin() + s, toks.begin() + s + n}];
        return counts;
    };

    long long ref_len = 0, hyp_len = 0;
    for (const auto& r : references) ref_len += static_cast<long long>(r.size());
    for (const auto& h : hypotheses) hyp_len += static_cast<long long>(h.size());
    if (hyp_len == 0) return 0.0;

    double log_prec_sum = 0.0;
    int effective_orders = 0;
    for (int n = 1; n <= max_n; ++n) {
        long long matched = 0, total = 0;
        for (std::size_t s = 0; s < references.size(); ++s) {
            auto ref_counts = ngram_counts(references[s], n);
            for (const auto& [gram, count] : ngram_counts(hypotheses[s], n)) {
                auto it = ref_counts.find(gram);
                matched += std::min(count, it == ref_counts.end() ? 0 : it->second);
                total += count;
            }
        }
        if (total == 0) continue;
        if (matched == 0) return 0.0;
        log_prec_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
        ++effective_orders;
    }
    if (effective_orders == 0) return 0.0;

    const double bp =
        hyp_len >= ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return 100.0 * bp * std::exp(log_prec_sum / effective_orders);
}

/// Fraction of target tokens emitted only after their last aligned source
/// element arrived: S = (1/I) sum 1[a_i <= g_i]. Unaligned tokens (a_i = 0)
/// count as satisfied.
inline double sufficiency_rate(std::span<const int> a, std::span<const int> g) {
    if (a.size() != g.size())
        throw LengthMismatch("alignment length " + std::to_string(a.size()) +
                             " != trace length " + std::to_string(g.size()));
    if (a.empty()) throw LengthMismatch("sufficiency rate needs at least one token");
    int satisfied = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] <= g[i]) ++satisfied;
    return static_cast<double>(satisfied) / static_cast<double>(a.size());
}

}  // namespace lsg
