#pragma once

// The streaming decode loop: interleaves READ and WRITE per the policy,
// maintains the source and target prefixes, records the policy trace and a
// timed event log, and provides the fixed-schedule and full-sentence decodes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsg/core.hpp"
#include "lsg/errors.hpp"
#include "lsg/policy.hpp"
#include "lsg/providers.hpp"

namespace lsg {

struct DecodeLimits {
    int max_target_len = 256;
    int max_source_len = 4096;
};

struct EngineOptions {
    // EOS may only be emitted once the source is exhausted: while the
    // conditioning prefix is shorter than J, its probability is masked to 0
    // and the distribution renormalized. Disable to let the model terminate
    // early.
    bool mask_eos = true;
    // Drop the per-step decision log (g and tokens are always kept).
    bool retain_diagnostics = true;
};

struct DecodeEvent {
    enum class Kind { SourceArrival, ProviderCall, Emission };
    Kind kind = Kind::ProviderCall;
    double wall_time_ms = 0.0;
    int j = 0;                 // SourceArrival / ProviderCall
    int prefix_len = 0;        // ProviderCall
    double duration_ms = 0.0;  // ProviderCall
    int i = 0;                 // Emission: 1-based token index; I+1 marks the terminator
    TokenId token = -1;        // Emission; -1 for the terminator
};

struct DecodeResult {
    std::vector<TokenId> tokens;         // EOS excluded
    std::vector<double> token_log_probs; // ln p of each emitted token at its step
    PolicyTrace trace;                   // trace.g aligned with tokens
    std::vector<DecodeEvent> events;     // measured during decode
    bool truncated = false;              // max_target_len hit before EOS
    bool diagnostics_retained = true;
};

namespace detail {

inline Distribution mask_eos_prob(const Distribution& d, TokenId eos) {
    std::vector<double> w(d.probs().begin(), d.probs().end());
    w[static_cast<std::size_t>(eos)] = 0.0;
    return Distribution(std::move(w));  // renormalizes; throws if EOS held all mass
}

class StepTimer {
public:
    StepTimer() : start_(clock::now()) {}
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
};

[[noreturn]] inline void rethrow_with_step(const std::string& ctx) {
    try {
        throw;
    } catch (const ProviderTimeout& e) {
        throw ProviderTimeout(ctx + ": " + e.what());
    } catch (const ProtocolError& e) {
        throw ProtocolError(ctx + ": " + e.what());
    } catch (const UnknownState& e) {
        throw UnknownState(ctx + ": " + e.what());
    } catch (const PrefixOverrun& e) {
        throw PrefixOverrun(ctx + ": " + e.what());
    } catch (const InvalidDistribution& e) {
        throw InvalidDistribution(ctx + ": " + e.what());
    } catch (const Error& e) {
        throw Error(ctx + ": " + e.what());
    }
}

}  // namespace detail

/// Streaming decode under the KL + confidence rule within [L, L+U] bounds.
///
/// Per target step i: bounds = range_bounds(L, U, i, J); reads catch j up to
/// the lower bound (the step-1 catch-up is the pre-read of L elements), then
/// each consultation queries p_cur at j and the baseline at min(i, J) (cached
/// per step, since only j moves) and applies the decision rule. WRITE emits
/// the argmax token and advances i; READ brings in one more source element.
/// Terminates on EOS, or flags truncation at max_target_len.
inline DecodeResult decode_stream(GeneratorContract& provider, const SourceSequence& source,
                                  const HyperParams& hp, const DecodeLimits& limits,
                                  const EngineOptions& opt = {}) {
    hp.validate();
    const int J = source.length();
    if (J > limits.max_source_len)
        throw std::invalid_argument("source length exceeds max_source_len guard");
    if (limits.max_target_len < 1) throw std::invalid_argument("max_target_len must be >= 1");
    const TokenId eos = provider.vocabulary().eos_id();

    DecodeResult res;
    res.diagnostics_retained = opt.retain_diagnostics;
    detail::StepTimer clock;
    std::vector<TokenId> y;
    int j = 0;
    bool done = false;

    for (int i = 1; !done; ++i) {
        const RangeBounds b = range_bounds(hp.L, hp.U, i, J);
        if (j < b.lo) j = b.lo;  // catch-up reads
        const int base_len = std::min(i, J);
        std::optional<Distribution> p_base;  // cached per step: only j moves

        for (;;) {
            const std::string ctx =
                "decode step i=" + std::to_string(i) + " j=" + std::to_string(j);
            double call_ms = 0.0;
            Distribution p_cur = [&] {
                try {
                    detail::StepTimer t;
                    Distribution cur = provider.next_distribution(j, source, y);
                    if (!p_base) {
                        Distribution base = provider.next_distribution(base_len, source, y);
                        if (opt.mask_eos && base_len < J)
                            base = detail::mask_eos_prob(base, eos);
                        p_base = std::move(base);
                    }
                    call_ms = t.elapsed_ms();
                    return cur;
                } catch (...) {
                    detail::rethrow_with_step(ctx);
                }
            }();
            if (opt.mask_eos && j < J) p_cur = detail::mask_eos_prob(p_cur, eos);
            res.events.push_back({DecodeEvent::Kind::ProviderCall, clock.elapsed_ms(), j,
                                  static_cast<int>(y.size()), call_ms, 0, -1});

            const Decision d = lsg_decide(p_cur, *p_base, hp, j, b.lo, b.hi, J);
            if (opt.retain_diagnostics)
                res.trace.steps.push_back({i, j, d.action, d.kl, d.confidence, d.trigger});
            if (d.action == Action::Read) {
                ++j;
                continue;
            }
            const TokenId tok = argmax_token(p_cur);
            res.events.push_back(
                {DecodeEvent::Kind::Emission, clock.elapsed_ms(), 0, 0, 0.0, i, tok});
            if (tok == eos) {
                done = true;
                break;
            }
            y.push_back(tok);
            res.token_log_probs.push_back(std::log(p_cur[tok]));
            res.trace.g.push_back(j);
            if (static_cast<int>(y.size()) >= limits.max_target_len) {
                res.truncated = true;
                done = true;
            }
            break;
        }
    }
    res.tokens = std::move(y);
    return res;
}

namespace detail {

// Shared body of the fixed-schedule decodes: emit by argmax at schedule(i).
template <class Schedule>
inline DecodeResult run_schedule(GeneratorContract& provider, const SourceSequence& source,
                                 Schedule schedule, const DecodeLimits& limits,
                                 const EngineOptions& opt) {
    const int J = source.length();
    if (J > limits.max_source_len)
        throw std::invalid_argument("source length exceeds max_source_len guard");
    const TokenId eos = provider.vocabulary().eos_id();

    DecodeResult res;
    res.diagnostics_retained = opt.retain_diagnostics;
    StepTimer clock;
    std::vector<TokenId> y;

    for (int i = 1;; ++i) {
        const int gi = schedule(i);
        const std::string ctx = "decode step i=" + std::to_string(i) + " j=" + std::to_string(gi);
        double call_ms = 0.0;
        Distribution p = [&] {
            try {
                StepTimer t;
                Distribution d = provider.next_distribution(gi, source, y);
                call_ms = t.elapsed_ms();
                return d;
            } catch (...) {
                rethrow_with_step(ctx);
            }
        }();
        if (opt.mask_eos && gi < J) p = mask_eos_prob(p, eos);
        res.events.push_back({DecodeEvent::Kind::ProviderCall, clock.elapsed_ms(), gi,
                              static_cast<int>(y.size()), call_ms, 0, -1});
        const TokenId tok = argmax_token(p);
        if (opt.retain_diagnostics)
            res.trace.steps.push_back({i, gi, Action::Write, std::nullopt, max_prob(p),
                                       gi == J ? Trigger::SourceExhausted
                                               : Trigger::ForcedUpperBound});
        res.events.push_back({DecodeEvent::Kind::Emission, clock.elapsed_ms(), 0, 0, 0.0, i, tok});
        if (tok == eos) break;
        y.push_back(tok);
        res.token_log_probs.push_back(std::log(p[tok]));
        res.trace.g.push_back(gi);
        if (static_cast<int>(y.size()) >= limits.max_target_len) {
            res.truncated = true;
            break;
        }
    }
    res.tokens = std::move(y);
    return res;
}

}  // namespace detail

/// Fixed wait-k schedule: g_i = min{k + i - 1, J}, argmax emission per step.
inline DecodeResult decode_wait_k(GeneratorContract& provider, const SourceSequence& source,
                                  int k, const DecodeLimits& limits,
                                  const EngineOptions& opt = {}) {
    if (k < 1) throw std::invalid_argument("wait-k needs k >= 1");
    const int J = source.length();
    return detail::run_schedule(
        provider, source, [&](int i) { return wait_k_read_count(k, i, J); }, limits, opt);
}

/// Full-sentence greedy decode (j = J at every step); the non-streaming
/// quality reference.
inline std::vector<TokenId> decode_offline(GeneratorContract& provider,
                                           const SourceSequence& source,
                                           const DecodeLimits& limits,
                                           const EngineOptions& opt = {}) {
    const int J = source.length();
    return detail::run_schedule(
               provider, source, [&](int) { return J; }, limits, opt)
        .tokens;
}

// ---------------------------------------------------------------------------
// Clock simulation

// Per-consultation compute duration source for the simulated timeline. With
// no constant injected, the durations measured during decode are replayed.
struct ClockModel {
    std::optional<double> constant_compute_ms;
    double text_arrival_interval_ms = 0.0;
};

/// Rebuilds the decode as a real-time event timeline.
///
/// Source element s arrives at s * interval (segment_ms for speech, the
/// configured per-word interval for text). Each recorded consultation is one
/// compute call: it cannot start before max(arrival of its j, end of the
/// previous call), and a WRITE's emission lands at call start + duration.
/// Returned events are sorted by time.
inline std::vector<DecodeEvent> simulate_clock(const DecodeResult& result,
                                               const SourceSequence& source,
                                               const ClockModel& clock = {}) {
    if (!result.diagnostics_retained)
        throw MissingDiagnostics("clock simulation needs the decision log");
    const int J = source.length();
    const double interval = source.kind() == SourceKind::Speech
                                ? static_cast<double>(*source.segment_ms())
                                : clock.text_arrival_interval_ms;

    std::vector<double> measured;
    if (!clock.constant_compute_ms) {
        for (const auto& e : result.events)
            if (e.kind == DecodeEvent::Kind::ProviderCall) measured.push_back(e.duration_ms);
        if (measured.size() != result.trace.steps.size())
            throw MalformedTimeline("measured call count does not match decision log");
    }

    std::vector<DecodeEvent> out;
    for (int s = 1; s <= J; ++s)
        out.push_back({DecodeEvent::Kind::SourceArrival, s * interval, s, 0, 0.0, 0, -1});

    double prev_end = 0.0;
    int emitted = 0;
    for (std::size_t n = 0; n < result.trace.steps.size(); ++n) {
        const TraceStep& st = result.trace.steps[n];
        const double dur = clock.constant_compute_ms ? *clock.constant_compute_ms : measured[n];
        if (dur < 0.0) throw MalformedTimeline("negative compute duration");
        const double start = std::max(st.j * interval, prev_end);
        const double end = start + dur;
        out.push_back({DecodeEvent::Kind::ProviderCall, start, st.j, st.i - 1, dur, 0, -1});
        if (st.action == Action::Write) {
            ++emitted;
            const bool terminator = emitted > static_cast<int>(result.tokens.size());
            out.push_back({DecodeEvent::Kind::Emission, end, 0, 0, 0.0, emitted,
                           terminator ? -1 : result.tokens[static_cast<std::size_t>(emitted - 1)]});
        }
        prev_end = end;
    }

    std::stable_sort(out.begin(), out.end(), [](const DecodeEvent& a, const DecodeEvent& b) {
        if (a.wall_time_ms != b.wall_time_ms) return a.wall_time_ms < b.wall_time_ms;
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
    return out;
}

}  // namespace lsg
