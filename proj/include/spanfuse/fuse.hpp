#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spanfuse/aggregate.hpp"
#include "spanfuse/core.hpp"

namespace spanfuse::fuse {

enum class Normalization { kNone, kLogreg };

const char* to_string(Normalization n);
Normalization normalization_from_string(const std::string& name);

struct TypeFusion {
    Normalization normalization = Normalization::kNone;
    agg::AggregationStrategy aggregation;

    friend bool operator==(const TypeFusion&, const TypeFusion&) = default;
};

/// Per-answer-type normalization + aggregation, plus the optional
/// short-within-long restriction. Noisy-or requires logistic normalization
/// (it consumes probabilities); mixed per-type setups express the combined
/// max/noisy-or mode with no special code path.
struct FusionConfig {
    TypeFusion long_answer;
    TypeFusion short_answer;
    bool restrict_short_to_long = false;

    const TypeFusion& of(AnswerType t) const {
        return t == AnswerType::kLong ? long_answer : short_answer;
    }
    TypeFusion& of(AnswerType t) { return t == AnswerType::kLong ? long_answer : short_answer; }

    void validate() const;

    friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

/// Zero-filled arithmetic mean across systems: every span predicted by at
/// least one system gets (sum of that span's per-system scores) / n_systems,
/// where n_systems is the ensemble size, not the number of systems
/// predicting the span.
SpanScores fuse_scores(const std::vector<const SpanScores*>& per_system, std::size_t n_systems);

/// Argmax over the fused long map (with an implicit null at score 0 when no
/// system scored the null span), then over the short map the same way. A
/// null long answer forces a null short answer. When restrict_short_to_long
/// is set, non-null short spans must be contained in the predicted long span
/// (the null short stays eligible).
Prediction predict_example(const SpanScores& long_scores, const SpanScores& short_scores,
                           const FusionConfig& config);

/// Long answers from long_source, short answers from short_source, then the
/// null-join rule. The two sources must cover identical example ids.
std::map<ExampleId, Prediction> join_predictions(
    const std::map<ExampleId, Prediction>& short_source,
    const std::map<ExampleId, Prediction>& long_source);

/// JSONL: {"example_id", "long": {"start","end"}|null, "short": ...}
void write_prediction_file(const std::filesystem::path& path,
                           const std::map<ExampleId, Prediction>& predictions);

std::map<ExampleId, Prediction> parse_prediction_file(const std::filesystem::path& path);

}  // namespace spanfuse::fuse
