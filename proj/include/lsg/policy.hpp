#pragma once

// Pure decision logic: wait-k schedules, per-step range bounds, and the
// READ/WRITE rule that compares the current distribution against the wait-1
// baseline distribution.

#include <algorithm>
#include <optional>

#include "lsg/core.hpp"
#include "lsg/errors.hpp"

namespace lsg {

/// Source elements a wait-k schedule has read when emitting token i:
/// min{k + i - 1, J}.
constexpr int wait_k_read_count(int k, int i, int J) {
    return std::min(k + i - 1, J);
}

struct RangeBounds {
    int lo = 0;
    int hi = 0;
};

/// Search range for token i: [min{L+i-1, J}, min{L+i-1+U, J}].
constexpr RangeBounds range_bounds(int L, int U, int i, int J) {
    return {std::min(L + i - 1, J), std::min(L + i - 1 + U, J)};
}

// Outcome of one consultation. kl and confidence are always recorded when the
// rule ran, regardless of which trigger decided.
struct Decision {
    Action action = Action::Read;
    Trigger trigger = Trigger::AwaitingInput;
    std::optional<double> kl;
    double confidence = 0.0;
};

/// The streaming WRITE/READ rule for one step.
///
/// p_cur conditions on the j source elements currently available, p_base on
/// the wait-1 prefix min(i, J) with the same generated prefix. WRITE fires,
/// in this precedence order, when the source is exhausted (j = J), when j hit
/// the upper range bound, when KL(p_cur || p_base) exceeds delta, or when the
/// top probability exceeds alpha. Otherwise READ.
inline Decision lsg_decide(const Distribution& p_cur, const Distribution& p_base,
                           const HyperParams& hp, int j, int lo, int hi, int J) {
    if (j < lo || j > hi)
        throw RangeViolation("j=" + std::to_string(j) + " outside [" + std::to_string(lo) +
                             ", " + std::to_string(hi) + "]");
    Decision d;
    d.kl = kl_divergence(p_cur, p_base);
    d.confidence = max_prob(p_cur);
    if (j == J) {
        d.trigger = Trigger::SourceExhausted;
    } else if (j == hi) {
        d.trigger = Trigger::ForcedUpperBound;
    } else if (*d.kl > hp.delta) {
        d.trigger = Trigger::Kl;
    } else if (d.confidence > effective_alpha(hp)) {
        d.trigger = Trigger::Confidence;
    } else {
        d.action = Action::Read;
        d.trigger = Trigger::AwaitingInput;
        return d;
    }
    d.action = Action::Write;
    return d;
}

}  // namespace lsg
