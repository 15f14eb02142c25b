#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spanfuse/core.hpp"
#include "spanfuse/ingest.hpp"

namespace spanfuse::metrics {

struct MatchConfig {
    /// Minimum number of non-null annotations for an example to count as
    /// answerable (NQ uses 2 for the 5-way annotated dev set; use 1 for
    /// single-annotation gold).
    int answerable_threshold = 2;
    /// Strict short matching requires some annotation's short answer set to
    /// be exactly the predicted singleton; relaxed accepts membership.
    bool relaxed_short = false;

    friend bool operator==(const MatchConfig&, const MatchConfig&) = default;
};

bool is_answerable(const std::vector<ingest::GoldAnnotation>& annotations, AnswerType type,
                   int threshold);

/// Exact-span correctness of a non-null predicted span against the
/// annotations, per the config's short-answer mode.
bool match_span(const Span& predicted, const std::vector<ingest::GoldAnnotation>& annotations,
                AnswerType type, const MatchConfig& config);

struct TypeCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    /// Recompute precision/recall/f1 from the counts (0 on empty denominators).
    void finalize();
};

struct EvalReport {
    std::string split_name;
    std::size_t n_examples = 0;
    TypeCounts long_answer;
    TypeCounts short_answer;

    const TypeCounts& of(AnswerType t) const {
        return t == AnswerType::kLong ? long_answer : short_answer;
    }
};

/// Count one example into the running totals. Per type: TP when the
/// prediction is non-null, the example answerable, and the span matches;
/// FP when non-null and not (answerable and matched); FN when answerable and
/// (null or unmatched).
void accumulate_example(const Prediction& prediction,
                        const std::vector<ingest::GoldAnnotation>& annotations,
                        const MatchConfig& config, TypeCounts& long_counts,
                        TypeCounts& short_counts);

/// Evaluate predictions over the given split ids. Examples without a
/// prediction count as null predictions.
EvalReport evaluate(const std::map<ExampleId, Prediction>& predictions, const ingest::GoldSet& gold,
                    const std::vector<ExampleId>& split_ids, const MatchConfig& config,
                    std::string split_name = "all");

/// {"split", "n_examples", "long": {...}, "short": {...}} as a JSON string.
std::string report_to_json(const EvalReport& report, int indent = 2);

/// Two fixed-format lines with F1 to 4 decimals, for CLI display.
std::string report_to_display(const EvalReport& report);

}  // namespace spanfuse::metrics
