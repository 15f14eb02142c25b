#include "spanfuse/aggregate.hpp"

#include <algorithm>
#include <functional>

#include "spanfuse/calibrate.hpp"
#include "spanfuse/errors.hpp"

namespace spanfuse::agg {

const char* to_string(Aggregator a) {
    switch (a) {
        case Aggregator::kMax: return "max";
        case Aggregator::kExpSum: return "exs";
        case Aggregator::kRecipRankSum: return "rrs";
        case Aggregator::kNoisyOr: return "noisy-or";
    }
    return "max";
}

Aggregator aggregator_from_string(const std::string& name) {
    if (name == "max") return Aggregator::kMax;
    if (name == "exs") return Aggregator::kExpSum;
    if (name == "rrs") return Aggregator::kRecipRankSum;
    if (name == "noisy-or") return Aggregator::kNoisyOr;
    throw ConfigError("unknown aggregation strategy '" + name +
                      "' (expected max, exs, rrs or noisy-or)");
}

void AggregationStrategy::validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must be in (0, 1)");
}

std::map<Span, ScoreVector> group_by_span(const std::vector<Candidate>& candidates) {
    std::map<Span, ScoreVector> groups;
    for (const Candidate& c : candidates) groups[c.span].push_back(c.score);
    for (auto& [span, scores] : groups) {
        std::sort(scores.begin(), scores.end(), std::greater<double>());
    }
    return groups;
}

double agg_max(const ScoreVector& scores) {
    double best = scores.front();
    for (const double s : scores) best = std::max(best, s);
    return best;
}

double agg_exp_sum(const ScoreVector& scores, double beta) {
    double sum = 0.0;
    double decay = 1.0;
    for (const double s : scores) {
        sum += s * decay;
        decay *= beta;
    }
    return sum;
}

double agg_recip_rank_sum(const ScoreVector& scores) {
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        sum += scores[i] / static_cast<double>(i + 1);
    }
    return sum;
}

double agg_noisy_or(const ScoreVector& scores) {
    double miss = 1.0;
    for (const double p : scores) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::domain_error("noisy-or requires probabilities in [0, 1], got " +
                                    std::to_string(p));
        }
        miss *= 1.0 - p;
    }
    return 1.0 - miss;
}

double apply_aggregator(const AggregationStrategy& strategy, const ScoreVector& scores) {
    if (scores.empty()) throw ValidationError("cannot aggregate an empty score vector");
    switch (strategy.kind) {
        case Aggregator::kMax: return agg_max(scores);
        case Aggregator::kExpSum: return agg_exp_sum(scores, strategy.beta);
        case Aggregator::kRecipRankSum: return agg_recip_rank_sum(scores);
        case Aggregator::kNoisyOr: return agg_noisy_or(scores);
    }
    return agg_max(scores);
}

SpanScores aggregate_system(const std::vector<Candidate>& candidates,
                            const AggregationStrategy& strategy,
                            const calibrate::Calibrator* calibrator, std::string_view context) {
    if (candidates.empty()) {
        // A system with no candidates predicts only the null span at score
        // zero (zero-fill semantics); the synthetic score bypasses
        // calibration.
        return SpanScores{{Span::null(), 0.0}};
    }

    std::vector<Candidate> scored;
    if (calibrator != nullptr) {
        scored.reserve(candidates.size());
        for (const Candidate& c : candidates) {
            scored.push_back(Candidate{c.span, calibrator->apply(c.score)});
        }
    }
    const std::vector<Candidate>& input = calibrator != nullptr ? scored : candidates;

    SpanScores result;
    for (const auto& [span, scores] : group_by_span(input)) {
        double value;
        try {
            value = apply_aggregator(strategy, scores);
        } catch (const std::domain_error& e) {
            std::string span_text = span.is_null()
                                        ? std::string("null span")
                                        : "span (" + std::to_string(span.start) + ", " +
                                              std::to_string(span.end) + ")";
            throw ValidationError(std::string(e.what()) + " at " + span_text +
                                  (context.empty() ? "" : " [" + std::string(context) + "]"));
        }
        result.emplace_back(span, value);
    }
    return result;
}

}  // namespace spanfuse::agg
