#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spanfuse/calibrate.hpp"
#include "spanfuse/core.hpp"
#include "spanfuse/fuse.hpp"
#include "spanfuse/ingest.hpp"
#include "spanfuse/metrics.hpp"

namespace spanfuse::search {

/// The systems available to the searcher, all validated against one gold set.
struct CandidatePool {
    std::vector<ingest::SystemPredictions> systems;

    /// Throws ValidationError on duplicate ids or ids unknown to the gold.
    void validate(const ingest::GoldSet& gold) const;

    std::vector<SystemId> ids_of(const std::vector<std::size_t>& indices) const;
};

namespace detail {

/// Spans packed so that unsigned key order equals the span tie-break order
/// (smaller start, then smaller end, null last).
using PackedSpan = std::uint64_t;

constexpr PackedSpan pack_span(const Span& s) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.start)) << 32) |
           static_cast<std::uint32_t>(s.end);
}

constexpr PackedSpan kNullKey = pack_span(Span::null());

constexpr Span unpack_span(PackedSpan key) {
    return Span{static_cast<std::int32_t>(key >> 32),
                static_cast<std::int32_t>(key & 0xFFFFFFFFULL)};
}

struct Entry {
    PackedSpan key;
    double score;
};

/// One system's aggregated span scores for one (example, type), sorted by key.
using FlatScores = std::vector<Entry>;

}  // namespace detail

/// Per-(system, example, answer type) aggregated span scores, computed once
/// up front for one fusion configuration. Subset evaluation afterwards only
/// sums cached maps and divides by the subset size.
class ScoreCache {
public:
    ScoreCache(const CandidatePool& pool, const fuse::FusionConfig& fusion,
               const calibrate::CalibratorStore* calibrators, const ingest::GoldSet& gold,
               unsigned jobs);

    const detail::FlatScores& get(std::size_t system, std::size_t example, AnswerType type) const;

    std::size_t n_systems() const { return n_systems_; }
    std::size_t n_examples() const { return n_examples_; }
    std::size_t example_index(const ExampleId& id) const;

    const fuse::FusionConfig& config() const { return fusion_; }

    /// Lookups served from the table / lookups that missed. All entries are
    /// computed eagerly at construction, so misses stay zero and
    /// aggregations_computed is fixed afterwards: repeated subset
    /// evaluations recompute nothing per-system.
    std::uint64_t hits() const { return hits_.load(std::memory_order_relaxed); }
    std::uint64_t misses() const { return misses_.load(std::memory_order_relaxed); }
    std::size_t aggregations_computed() const { return aggregations_computed_; }

private:
    fuse::FusionConfig fusion_;
    std::size_t n_systems_ = 0;
    std::size_t n_examples_ = 0;
    std::map<ExampleId, std::size_t> example_index_;
    /// [system][example * 2 + type]
    std::vector<std::vector<detail::FlatScores>> table_;
    std::size_t aggregations_computed_ = 0;
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

struct SubsetScore {
    double sa_f1 = 0.0;
    double la_f1 = 0.0;
};

/// Fuse -> predict -> count F1 for arbitrary subsets over one fixed split,
/// with gold matching data pre-resolved. eval() is const and thread-safe.
class SubsetEvaluator {
public:
    SubsetEvaluator(const ScoreCache& cache, const ingest::GoldSet& gold,
                    const std::vector<ExampleId>& split_ids, const metrics::MatchConfig& match,
                    std::string split_name);

    SubsetScore eval(const std::vector<std::size_t>& subset) const;

    const std::string& split_name() const { return split_name_; }
    const metrics::MatchConfig& match_config() const { return match_; }
    const ScoreCache& cache() const { return cache_; }

private:
    struct ExampleGold {
        std::uint32_t example = 0;
        bool long_answerable = false;
        bool short_answerable = false;
        std::vector<detail::PackedSpan> long_keys;
        std::vector<detail::PackedSpan> short_keys;
    };

    const ScoreCache& cache_;
    metrics::MatchConfig match_;
    std::string split_name_;
    std::vector<ExampleGold> examples_;
};

/// Predictions of one subset over the given example ids (any ids known to
/// the cache). Uses the cache's fusion configuration, including the
/// short-within-long restriction.
std::map<ExampleId, Prediction> predict_subset(const ScoreCache& cache,
                                               const std::vector<std::size_t>& subset,
                                               const std::vector<ExampleId>& example_ids);

enum class SearchStrategy { kExhaustive, kGreedy, kSimpleGreedy };

const char* to_string(SearchStrategy s);
SearchStrategy strategy_from_string(const std::string& name);

struct SearchSpec {
    SearchStrategy strategy = SearchStrategy::kGreedy;
    /// Ensemble size budget.
    int k = 4;
    /// Greedy steps spent on the short-answer build; k - k_short go to the
    /// long-answer build. k_short = 0 takes short answers from the
    /// long-optimized ensemble.
    int k_short = 0;
    fuse::FusionConfig fusion;
    /// When set and different from `fusion`, the search selects models under
    /// this cheaper configuration and only the final predictions use
    /// `fusion`.
    std::optional<fuse::FusionConfig> selection_fusion;
    /// Truncate the pool to the top n systems by single-model train SA+LA F1
    /// before searching.
    std::optional<int> pool_top_n;
    metrics::MatchConfig match;
    std::uint64_t max_evaluations = 1000000;
    bool force_budget = false;
    unsigned jobs = 1;

    void validate(std::size_t pool_size) const;
};

/// One evaluated ensemble with its train F1s. Selection phases ("pool",
/// "greedy_*", "augment_*", "exhaustive", "simple-greedy") are scored under
/// the selection fusion config; "final_*" entries under the final one.
struct TraceEntry {
    std::string phase;
    std::vector<SystemId> ids;  // sorted
    double sa_f1 = 0.0;
    double la_f1 = 0.0;
};

struct SearchOutcome {
    std::vector<SystemId> s_prime;  // sorted ids
    std::vector<SystemId> l_prime;
    metrics::EvalReport train_report;
    metrics::EvalReport test_report;
    std::map<ExampleId, Prediction> predictions;
    std::vector<TraceEntry> trace;
    std::uint64_t evaluations = 0;

    std::string to_json(int indent = 2) const;
};

SearchOutcome exhaustive_search(const CandidatePool& pool, const SearchSpec& spec,
                                const ingest::GoldSet& gold, const ingest::Split& split,
                                const calibrate::CalibratorStore* calibrators);

SearchOutcome greedy_search(const CandidatePool& pool, const SearchSpec& spec,
                            const ingest::GoldSet& gold, const ingest::Split& split,
                            const calibrate::CalibratorStore* calibrators);

SearchOutcome simple_greedy(const CandidatePool& pool, const SearchSpec& spec,
                            const ingest::GoldSet& gold, const ingest::Split& split,
                            const calibrate::CalibratorStore* calibrators);

/// Dispatch on SearchSpec::strategy (and selection_fusion for two-phase
/// model-selection runs).
SearchOutcome run_search(const CandidatePool& pool, const SearchSpec& spec,
                         const ingest::GoldSet& gold, const ingest::Split& split,
                         const calibrate::CalibratorStore* calibrators);

}  // namespace spanfuse::search
