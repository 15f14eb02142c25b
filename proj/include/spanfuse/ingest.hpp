#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spanfuse/core.hpp"

namespace spanfuse::ingest {

struct ExampleCandidates {
    std::vector<Candidate> long_answers;
    std::vector<Candidate> short_answers;

    std::vector<Candidate>& of(AnswerType t) {
        return t == AnswerType::kLong ? long_answers : short_answers;
    }
    const std::vector<Candidate>& of(AnswerType t) const {
        return t == AnswerType::kLong ? long_answers : short_answers;
    }

    friend bool operator==(const ExampleCandidates&, const ExampleCandidates&) = default;
};

/// Everything one system predicted, keyed by example. Candidate lists keep
/// file order and may repeat a span (multiple decode windows score the same
/// span independently).
struct SystemPredictions {
    SystemId system_id;
    std::map<ExampleId, ExampleCandidates> examples;

    friend bool operator==(const SystemPredictions&, const SystemPredictions&) = default;
};

/// One annotator's judgment. NQ convention: no short answer without a long
/// answer, so long_span null implies short_spans empty.
struct GoldAnnotation {
    Span long_span = Span::null();
    std::vector<Span> short_spans;
};

struct GoldSet {
    std::map<ExampleId, std::vector<GoldAnnotation>> examples;
    /// Example ids in file order; drives the positional splits.
    std::vector<ExampleId> example_order;
    /// Cumulative example count after each input file.
    std::vector<std::size_t> file_boundaries;

    const std::vector<GoldAnnotation>& annotations(const ExampleId& id) const;
};

/// Ordered, disjoint dev-train / dev-test partition of the gold example ids.
struct Split {
    std::vector<ExampleId> train_ids;
    std::vector<ExampleId> test_ids;
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const { return errors.empty(); }
};

inline constexpr int kDefaultTopK = 20;

/// Parse a predictions JSONL file. An optional first line
/// {"system_id": "..."} names the system; otherwise fallback_system_id is
/// used, or the file stem when that is empty too. Null spans are encoded as
/// start = end = -1. Throws ParseError / ValidationError with line numbers.
SystemPredictions parse_predictions(const std::filesystem::path& path,
                                    const std::string& fallback_system_id = "");

void write_predictions(const std::filesystem::path& path, const SystemPredictions& preds);

/// Parse one or more gold JSONL files in order. File boundaries are recorded
/// for the file-based split. Duplicate example ids (within or across files)
/// are an error.
GoldSet parse_gold(const std::vector<std::filesystem::path>& paths);

void write_gold(const std::filesystem::path& path, const GoldSet& gold);

/// Keep the k highest-ranked candidates per (example, answer type).
/// Idempotent; k defaults to 20.
SystemPredictions truncate_top_k(SystemPredictions preds, int k = kDefaultTopK);

/// First train_files of the gold's input files become dev-train, the rest
/// dev-test.
Split split_by_files(const GoldSet& gold, std::size_t train_files);

/// Positional cut of the gold example order at the given fraction.
Split split_by_fraction(const GoldSet& gold, double train_fraction);

/// Cross-system consistency checks. Example ids unknown to the gold and
/// duplicate system ids are errors; gold examples missing from a system are
/// warnings (that system is treated as predicting only the null span there).
ValidationReport validate_ensemble_inputs(const std::vector<SystemPredictions>& systems,
                                          const GoldSet& gold);

}  // namespace spanfuse::ingest
