#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spanfuse/core.hpp"

namespace spanfuse::calibrate {
struct Calibrator;
}

namespace spanfuse::agg {

/// All scores one system produced for one span, reverse-sorted (descending).
using ScoreVector = std::vector<double>;

enum class Aggregator { kMax, kExpSum, kRecipRankSum, kNoisyOr };

const char* to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& name);

struct AggregationStrategy {
    Aggregator kind = Aggregator::kMax;
    /// Decay for the exponential sum; must be in (0, 1).
    double beta = 0.5;

    void validate() const;

    friend bool operator==(const AggregationStrategy&, const AggregationStrategy&) = default;
};

/// Collect the scores of one system's candidates by span. Each vector comes
/// back descending; the total score count is preserved.
std::map<Span, ScoreVector> group_by_span(const std::vector<Candidate>& candidates);

/// max_i P_i
double agg_max(const ScoreVector& scores);

/// sum_i P_i * beta^(i-1) over the descending vector.
double agg_exp_sum(const ScoreVector& scores, double beta);

/// sum_i P_i / i over the descending vector.
double agg_recip_rank_sum(const ScoreVector& scores);

/// 1 - prod_i (1 - P_i). Every element must be a probability in [0, 1];
/// out-of-range input throws rather than clamping, which would mask a
/// missing normalization.
double agg_noisy_or(const ScoreVector& scores);

double apply_aggregator(const AggregationStrategy& strategy, const ScoreVector& scores);

/// Full per-system collapse for one (example, answer type): calibrate each
/// score (when a calibrator is given), group by span, aggregate per span.
/// An empty candidate list is treated as the system predicting only the null
/// span with score zero, so zero-fill fusion stays uniform downstream; that
/// synthetic score is not calibrated.
///
/// `context` names the system/example in error messages.
SpanScores aggregate_system(const std::vector<Candidate>& candidates,
                            const AggregationStrategy& strategy,
                            const calibrate::Calibrator* calibrator,
                            std::string_view context = {});

}  // namespace spanfuse::agg
