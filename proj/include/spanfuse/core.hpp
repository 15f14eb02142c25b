#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace spanfuse {

/// A token-indexed answer span. The reserved null span ("no answer") carries
/// no offsets and is canonically encoded as start = end = -1. Non-null spans
/// satisfy start < end; equality is exact (start, end) equality, enforced by
/// the parse/generate boundaries.
struct Span {
    std::int32_t start = -1;
    std::int32_t end = -1;

    static constexpr Span null() { return {}; }
    constexpr bool is_null() const { return start < 0; }

    friend constexpr bool operator==(const Span&, const Span&) = default;
    /// Container ordering only. Ranking goes through ranks_before.
    friend constexpr auto operator<=>(const Span&, const Span&) = default;
};

enum class AnswerType : std::uint8_t { kLong = 0, kShort = 1 };

inline constexpr std::array<AnswerType, 2> kAnswerTypes{AnswerType::kLong, AnswerType::kShort};

constexpr std::size_t type_index(AnswerType t) { return static_cast<std::size_t>(t); }

const char* to_string(AnswerType t);
AnswerType answer_type_from_string(const std::string& name);

/// One scored span from one system. Raw model scores are unbounded reals;
/// calibrated scores live in (0, 1). Scores are always finite.
struct Candidate {
    Span span;
    double score = 0.0;

    friend constexpr bool operator==(const Candidate&, const Candidate&) = default;
};

/// The tie-break rule behind every argmax in the pipeline: higher score
/// first, then non-null before null, then smaller start, then smaller end.
/// This is a total order on (span, score) pairs, which makes every argmax
/// permutation invariant.
constexpr bool ranks_before(const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.span.is_null() != b.span.is_null()) return !a.span.is_null();
    if (a.span.start != b.span.start) return a.span.start < b.span.start;
    return a.span.end < b.span.end;
}

/// Highest-ranked candidate under ranks_before, or nullptr when empty.
const Candidate* best_candidate(const std::vector<Candidate>& candidates);

/// Scores for one (example, answer type), ensemble-level or per-system.
/// Kept sorted by span for cheap merging.
using SpanScores = std::vector<std::pair<Span, double>>;

/// Final answer pair for one example. A null long answer forces a null
/// short answer wherever predictions are produced.
struct Prediction {
    Span long_span = Span::null();
    Span short_span = Span::null();

    const Span& of(AnswerType t) const { return t == AnswerType::kLong ? long_span : short_span; }

    friend constexpr bool operator==(const Prediction&, const Prediction&) = default;
};

using SystemId = std::string;
using ExampleId = std::string;

}  // namespace spanfuse
