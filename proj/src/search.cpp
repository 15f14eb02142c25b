#include "spanfuse/search.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "spanfuse/aggregate.hpp"
#include "spanfuse/errors.hpp"
#include "spanfuse/parallel.hpp"

namespace spanfuse::search {

using detail::Entry;
using detail::FlatScores;
using detail::kNullKey;
using detail::pack_span;
using detail::PackedSpan;
using detail::unpack_span;
using nlohmann::json;

void CandidatePool::validate(const ingest::GoldSet& gold) const {
    const ingest::ValidationReport report = ingest::validate_ensemble_inputs(systems, gold);
    if (!report.ok()) {
        std::string message = "candidate pool failed validation:";
        for (const std::string& error : report.errors) message += "\n  " + error;
        throw ValidationError(message);
    }
}

std::vector<SystemId> CandidatePool::ids_of(const std::vector<std::size_t>& indices) const {
    std::vector<SystemId> ids;
    ids.reserve(indices.size());
    for (const std::size_t i : indices) ids.push_back(systems[i].system_id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

ScoreCache::ScoreCache(const CandidatePool& pool, const fuse::FusionConfig& fusion,
                       const calibrate::CalibratorStore* calibrators,
                       const ingest::GoldSet& gold, unsigned jobs)
    : fusion_(fusion), n_systems_(pool.systems.size()), n_examples_(gold.example_order.size()) {
    fusion_.validate();
    for (std::size_t e = 0; e < n_examples_; ++e) {
        example_index_.emplace(gold.example_order[e], e);
    }

    table_.resize(n_systems_);
    parallel_for(n_systems_, jobs, [&](std::size_t m) {
        const ingest::SystemPredictions& system = pool.systems[m];
        std::vector<FlatScores>& rows = table_[m];
        rows.resize(n_examples_ * 2);
        for (std::size_t e = 0; e < n_examples_; ++e) {
            const auto example_it = system.examples.find(gold.example_order[e]);
            for (AnswerType type : kAnswerTypes) {
                const fuse::TypeFusion& cfg = fusion_.of(type);
                const calibrate::Calibrator* calibrator = nullptr;
                if (cfg.normalization == fuse::Normalization::kLogreg) {
                    if (calibrators == nullptr) {
                        throw ConfigError("logreg normalization requires fitted calibrators");
                    }
                    calibrator = &calibrators->require(system.system_id, type);
                }
                static const std::vector<Candidate> kEmpty;
                const std::vector<Candidate>& candidates =
                    example_it == system.examples.end() ? kEmpty : example_it->second.of(type);
                const SpanScores aggregated =
                    agg::aggregate_system(candidates, cfg.aggregation, calibrator,
                                          "system " + system.system_id);
                FlatScores& flat = rows[e * 2 + type_index(type)];
                flat.reserve(aggregated.size());
                for (const auto& [span, score] : aggregated) {
                    flat.push_back(Entry{pack_span(span), score});
                }
                std::sort(flat.begin(), flat.end(),
                          [](const Entry& a, const Entry& b) { return a.key < b.key; });
            }
        }
    });
    aggregations_computed_ = n_systems_ * n_examples_ * 2;
}

const FlatScores& ScoreCache::get(std::size_t system, std::size_t example,
                                  AnswerType type) const {
    if (system >= n_systems_ || example >= n_examples_) {
        misses_.fetch_add(1, std::memory_order_relaxed);
        throw ValidationError("score cache lookup out of range");
    }
    hits_.fetch_add(1, std::memory_order_relaxed);
    return table_[system][example * 2 + type_index(type)];
}

std::size_t ScoreCache::example_index(const ExampleId& id) const {
    const auto it = example_index_.find(id);
    if (it == example_index_.end()) {
        throw ValidationError("example id '" + id + "' unknown to the score cache");
    }
    return it->second;
}

namespace {

// Fused argmax for one (example, type): concatenate the subset's cached
// entries (subset order), stable-sort by key so per-span sums accumulate in
// system order, then scan runs. Equal fused scores break toward the smaller
// packed key, which is exactly the span tie-break rule.
PackedSpan fused_argmax(const ScoreCache& cache, const std::vector<std::size_t>& subset,
                        std::size_t example, AnswerType type, PackedSpan containing,
                        std::vector<Entry>& scratch) {
    scratch.clear();
    for (const std::size_t system : subset) {
        const FlatScores& flat = cache.get(system, example, type);
        scratch.insert(scratch.end(), flat.begin(), flat.end());
    }
    std::stable_sort(scratch.begin(), scratch.end(),
                     [](const Entry& a, const Entry& b) { return a.key < b.key; });

    const double n = static_cast<double>(subset.size());
    const bool restrict_span = containing != kNullKey;
    const Span outer = unpack_span(containing);

    PackedSpan best_key = kNullKey;
    double best_score = 0.0;
    bool any = false;
    bool explicit_null = false;
    auto consider = [&](PackedSpan key, double score) {
        if (!any || score > best_score || (score == best_score && key < best_key)) {
            best_key = key;
            best_score = score;
            any = true;
        }
    };

    std::size_t i = 0;
    while (i < scratch.size()) {
        const PackedSpan key = scratch[i].key;
        double sum = 0.0;
        while (i < scratch.size() && scratch[i].key == key) {
            sum += scratch[i].score;
            ++i;
        }
        if (key == kNullKey) {
            explicit_null = true;
        } else if (restrict_span) {
            const Span span = unpack_span(key);
            if (!(outer.start <= span.start && span.end <= outer.end)) continue;
        }
        consider(key, sum / n);
    }
    if (!explicit_null) consider(kNullKey, 0.0);
    return best_key;
}

// Long argmax, then short argmax under the null-join rule (and the optional
// containment restriction from the cache's fusion config).
std::pair<PackedSpan, PackedSpan> predict_packed(const ScoreCache& cache,
                                                 const std::vector<std::size_t>& subset,
                                                 std::size_t example,
                                                 std::vector<Entry>& scratch) {
    const PackedSpan long_key =
        fused_argmax(cache, subset, example, AnswerType::kLong, kNullKey, scratch);
    if (long_key == kNullKey) return {kNullKey, kNullKey};
    const PackedSpan containing =
        cache.config().restrict_short_to_long ? long_key : kNullKey;
    const PackedSpan short_key =
        fused_argmax(cache, subset, example, AnswerType::kShort, containing, scratch);
    return {long_key, short_key};
}

}  // namespace

SubsetEvaluator::SubsetEvaluator(const ScoreCache& cache, const ingest::GoldSet& gold,
                                 const std::vector<ExampleId>& split_ids,
                                 const metrics::MatchConfig& match, std::string split_name)
    : cache_(cache), match_(match), split_name_(std::move(split_name)) {
    if (match_.answerable_threshold < 1) throw ConfigError("answerable threshold must be >= 1");
    examples_.reserve(split_ids.size());
    for (const ExampleId& id : split_ids) {
        const auto& annotations = gold.annotations(id);
        ExampleGold entry;
        entry.example = static_cast<std::uint32_t>(cache.example_index(id));
        entry.long_answerable =
            metrics::is_answerable(annotations, AnswerType::kLong, match_.answerable_threshold);
        entry.short_answerable =
            metrics::is_answerable(annotations, AnswerType::kShort, match_.answerable_threshold);
        for (const auto& ann : annotations) {
            if (!ann.long_span.is_null()) entry.long_keys.push_back(pack_span(ann.long_span));
            if (ann.short_spans.empty()) continue;
            if (match_.relaxed_short) {
                for (const Span& s : ann.short_spans) entry.short_keys.push_back(pack_span(s));
            } else {
                // Strict mode: the annotation matches only a prediction equal
                // to its entire short answer set, i.e. only uniform sets can
                // match a single predicted span.
                const bool uniform =
                    std::all_of(ann.short_spans.begin(), ann.short_spans.end(),
                                [&](const Span& s) { return s == ann.short_spans.front(); });
                if (uniform) entry.short_keys.push_back(pack_span(ann.short_spans.front()));
            }
        }
        for (auto* keys : {&entry.long_keys, &entry.short_keys}) {
            std::sort(keys->begin(), keys->end());
            keys->erase(std::unique(keys->begin(), keys->end()), keys->end());
        }
        examples_.push_back(std::move(entry));
    }
}

SubsetScore SubsetEvaluator::eval(const std::vector<std::size_t>& subset) const {
    if (subset.empty()) throw ConfigError("cannot evaluate an empty subset");
    metrics::TypeCounts long_counts;
    metrics::TypeCounts short_counts;
    std::vector<Entry> scratch;
    scratch.reserve(128);

    for (const ExampleGold& gold : examples_) {
        const auto [long_key, short_key] = predict_packed(cache_, subset, gold.example, scratch);
        for (AnswerType type : kAnswerTypes) {
            const bool is_short = type == AnswerType::kShort;
            metrics::TypeCounts& counts = is_short ? short_counts : long_counts;
            const PackedSpan predicted = is_short ? short_key : long_key;
            const bool answerable = is_short ? gold.short_answerable : gold.long_answerable;
            const auto& keys = is_short ? gold.short_keys : gold.long_keys;
            if (predicted != kNullKey) {
                const bool matched = std::binary_search(keys.begin(), keys.end(), predicted);
                if (answerable && matched) {
                    ++counts.tp;
                } else {
                    ++counts.fp;
                }
                if (answerable && !matched) ++counts.fn;
            } else if (answerable) {
                ++counts.fn;
            }
        }
    }
    long_counts.finalize();
    short_counts.finalize();
    return SubsetScore{short_counts.f1, long_counts.f1};
}

std::map<ExampleId, Prediction> predict_subset(const ScoreCache& cache,
                                               const std::vector<std::size_t>& subset,
                                               const std::vector<ExampleId>& example_ids) {
    if (subset.empty()) throw ConfigError("cannot predict with an empty subset");
    std::map<ExampleId, Prediction> predictions;
    std::vector<Entry> scratch;
    scratch.reserve(128);
    for (const ExampleId& id : example_ids) {
        const std::size_t example = cache.example_index(id);
        const auto [long_key, short_key] = predict_packed(cache, subset, example, scratch);
        Prediction prediction;
        prediction.long_span = long_key == kNullKey ? Span::null() : unpack_span(long_key);
        prediction.short_span = short_key == kNullKey ? Span::null() : unpack_span(short_key);
        predictions.emplace(id, prediction);
    }
    return predictions;
}

const char* to_string(SearchStrategy s) {
    switch (s) {
        case SearchStrategy::kExhaustive: return "exhaustive";
        case SearchStrategy::kGreedy: return "greedy";
        case SearchStrategy::kSimpleGreedy: return "simple-greedy";
    }
    return "greedy";
}

SearchStrategy strategy_from_string(const std::string& name) {
    if (name == "exhaustive") return SearchStrategy::kExhaustive;
    if (name == "greedy") return SearchStrategy::kGreedy;
    if (name == "simple-greedy") return SearchStrategy::kSimpleGreedy;
    throw ConfigError("unknown search strategy '" + name +
                      "' (expected exhaustive, greedy or simple-greedy)");
}

void SearchSpec::validate(std::size_t pool_size) const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (k_short < 0 || k_short > k) throw ConfigError("k_short must satisfy 0 <= k_short <= k");
    if (pool_size < static_cast<std::size_t>(k)) {
        throw ConfigError("pool has " + std::to_string(pool_size) + " systems, need at least " +
                          std::to_string(k));
    }
    fusion.validate();
    if (selection_fusion) selection_fusion->validate();
    if (pool_top_n && *pool_top_n < k) throw ConfigError("pool-top-n must be >= k");
    if (match.answerable_threshold < 1) throw ConfigError("answerable threshold must be >= 1");
}

namespace {

struct SearchContext {
    const CandidatePool& pool;
    const SearchSpec& spec;
    const SubsetEvaluator& train_eval;
    std::vector<TraceEntry>& trace;
    std::uint64_t& evaluations;
};

// Evaluate subsets (parallel, order-stable) and append one trace entry per
// subset in input order.
std::vector<SubsetScore> eval_traced(SearchContext& ctx, const std::string& phase,
                                     const std::vector<std::vector<std::size_t>>& subsets) {
    std::vector<SubsetScore> scores(subsets.size());
    parallel_for(subsets.size(), ctx.spec.jobs,
                 [&](std::size_t i) { scores[i] = ctx.train_eval.eval(subsets[i]); });
    for (std::size_t i = 0; i < subsets.size(); ++i) {
        ctx.trace.push_back(
            TraceEntry{phase, ctx.pool.ids_of(subsets[i]), scores[i].sa_f1, scores[i].la_f1});
    }
    ctx.evaluations += subsets.size();
    return scores;
}

double objective_of(const SubsetScore& score, AnswerType type) {
    return type == AnswerType::kLong ? score.la_f1 : score.sa_f1;
}

std::vector<std::size_t> sorted_union(const std::vector<std::size_t>& a,
                                      const std::vector<std::size_t>& b) {
    std::vector<std::size_t> out(a);
    out.insert(out.end(), b.begin(), b.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Per-system train scores, used for pool truncation and the simple-greedy
// baseline. Keyed by pool index so a truncated pool can reuse them.
std::map<std::size_t, SubsetScore> single_model_scores(
    SearchContext& ctx, const std::vector<std::size_t>& pool_indices) {
    std::vector<std::vector<std::size_t>> singletons;
    singletons.reserve(pool_indices.size());
    for (const std::size_t i : pool_indices) singletons.push_back({i});
    const std::vector<SubsetScore> scores = eval_traced(ctx, "pool", singletons);
    std::map<std::size_t, SubsetScore> by_index;
    for (std::size_t i = 0; i < pool_indices.size(); ++i) {
        by_index.emplace(pool_indices[i], scores[i]);
    }
    return by_index;
}

// Sort pool indices by single-model SA+LA train F1 descending, ties toward
// the smaller system id.
std::vector<std::size_t> rank_by_single_f1(SearchContext& ctx,
                                           const std::vector<std::size_t>& pool_indices,
                                           const std::map<std::size_t, SubsetScore>& singles) {
    std::vector<std::size_t> ranked = pool_indices;
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        const double sum_a = singles.at(a).sa_f1 + singles.at(a).la_f1;
        const double sum_b = singles.at(b).sa_f1 + singles.at(b).la_f1;
        if (sum_a != sum_b) return sum_a > sum_b;
        return ctx.pool.systems[a].system_id < ctx.pool.systems[b].system_id;
    });
    return ranked;
}

// Top-n pool indices by single-model SA+LA train F1; result in original
// pool order.
std::vector<std::size_t> truncate_pool(SearchContext& ctx,
                                       const std::vector<std::size_t>& pool_indices,
                                       const std::map<std::size_t, SubsetScore>& singles,
                                       int top_n) {
    std::vector<std::size_t> kept = rank_by_single_f1(ctx, pool_indices, singles);
    kept.resize(std::min<std::size_t>(kept.size(), static_cast<std::size_t>(top_n)));
    std::sort(kept.begin(), kept.end());
    return kept;
}

// Greedy build: steps times, add the model that maximizes the train
// objective (ties toward the smaller system id), then truncate to the best
// prefix (ties toward the shorter prefix). Returns indices in addition
// order.
std::vector<std::size_t> greedy_build(SearchContext& ctx,
                                      const std::vector<std::size_t>& pool_indices,
                                      AnswerType objective, int steps, const std::string& phase) {
    std::vector<std::size_t> build;
    std::vector<double> prefix_scores;
    for (int step = 0; step < steps; ++step) {
        std::vector<std::size_t> candidates;
        for (const std::size_t i : pool_indices) {
            if (std::find(build.begin(), build.end(), i) == build.end()) candidates.push_back(i);
        }
        if (candidates.empty()) break;

        std::vector<std::vector<std::size_t>> subsets;
        subsets.reserve(candidates.size());
        for (const std::size_t c : candidates) subsets.push_back(sorted_union(build, {c}));
        const std::vector<SubsetScore> scores = eval_traced(ctx, phase, subsets);

        std::size_t best = 0;
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            const double current = objective_of(scores[i], objective);
            const double leader = objective_of(scores[best], objective);
            if (current > leader ||
                (current == leader && ctx.pool.systems[candidates[i]].system_id <
                                          ctx.pool.systems[candidates[best]].system_id)) {
                best = i;
            }
        }
        build.push_back(candidates[best]);
        prefix_scores.push_back(objective_of(scores[best], objective));
    }

    std::size_t best_prefix = 0;
    for (std::size_t i = 1; i < prefix_scores.size(); ++i) {
        if (prefix_scores[i] > prefix_scores[best_prefix]) best_prefix = i;
    }
    if (!build.empty()) build.resize(best_prefix + 1);
    return build;
}

// base u argmax_{x in P(other)} objective(base u x); the empty subset is a
// candidate, so augmentation can never hurt the train objective. Ties go to
// the lexicographically smallest sorted id set.
std::vector<std::size_t> augment(SearchContext& ctx, const std::vector<std::size_t>& base,
                                 const std::vector<std::size_t>& other, AnswerType objective,
                                 const std::string& phase) {
    std::set<std::vector<std::size_t>> unions;
    const std::size_t count = other.size();
    if (count > 20) {
        throw BudgetError("power-set augmentation over " + std::to_string(count) +
                          " models is too large; lower k");
    }
    for (std::uint64_t mask = 0; mask < (1ULL << count); ++mask) {
        std::vector<std::size_t> addition;
        for (std::size_t i = 0; i < count; ++i) {
            if (mask & (1ULL << i)) addition.push_back(other[i]);
        }
        unions.insert(sorted_union(base, addition));
    }
    const std::vector<std::vector<std::size_t>> subsets(unions.begin(), unions.end());
    const std::vector<SubsetScore> scores = eval_traced(ctx, phase, subsets);

    std::size_t best = 0;
    std::vector<SystemId> best_ids = ctx.pool.ids_of(subsets[0]);
    for (std::size_t i = 1; i < subsets.size(); ++i) {
        const double current = objective_of(scores[i], objective);
        const double leader = objective_of(scores[best], objective);
        std::vector<SystemId> ids = ctx.pool.ids_of(subsets[i]);
        if (current > leader || (current == leader && ids < best_ids)) {
            best = i;
            best_ids = std::move(ids);
        }
    }
    return subsets[best];
}

struct Selection {
    std::vector<std::size_t> s_prime;
    std::vector<std::size_t> l_prime;
};

Selection select_exhaustive(SearchContext& ctx, const std::vector<std::size_t>& pool_indices) {
    const std::size_t n = pool_indices.size();
    const auto k = static_cast<std::size_t>(ctx.spec.k);

    // C(n, k) with overflow saturation, for the budget guard.
    double combinations = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        combinations *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    }
    if (!ctx.spec.force_budget &&
        combinations > static_cast<double>(ctx.spec.max_evaluations)) {
        throw BudgetError("exhaustive search would evaluate ~" +
                          std::to_string(static_cast<std::uint64_t>(combinations)) +
                          " ensembles (budget " + std::to_string(ctx.spec.max_evaluations) +
                          "); truncate the pool (--pool-top-n) or force past the budget");
    }

    std::vector<std::vector<std::size_t>> combos;
    std::vector<std::size_t> combo(k);
    for (std::size_t i = 0; i < k; ++i) combo[i] = i;
    for (;;) {
        std::vector<std::size_t> subset;
        subset.reserve(k);
        for (const std::size_t i : combo) subset.push_back(pool_indices[i]);
        combos.push_back(std::move(subset));
        std::size_t i = k;
        while (i > 0 && combo[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) break;
        ++combo[i - 1];
        for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
    }

    const std::vector<SubsetScore> scores = eval_traced(ctx, "exhaustive", combos);

    Selection selection;
    std::vector<SystemId> best_sa_ids;
    std::vector<SystemId> best_la_ids;
    std::size_t best_sa = 0;
    std::size_t best_la = 0;
    for (std::size_t i = 0; i < combos.size(); ++i) {
        std::vector<SystemId> ids = ctx.pool.ids_of(combos[i]);
        if (i == 0 || scores[i].sa_f1 > scores[best_sa].sa_f1 ||
            (scores[i].sa_f1 == scores[best_sa].sa_f1 && ids < best_sa_ids)) {
            best_sa = i;
            best_sa_ids = ids;
        }
        if (i == 0 || scores[i].la_f1 > scores[best_la].la_f1 ||
            (scores[i].la_f1 == scores[best_la].la_f1 && ids < best_la_ids)) {
            best_la = i;
            best_la_ids = std::move(ids);
        }
    }
    selection.s_prime = combos[best_sa];
    selection.l_prime = combos[best_la];
    return selection;
}

Selection select_greedy(SearchContext& ctx, const std::vector<std::size_t>& pool_indices) {
    const int k_short = ctx.spec.k_short;
    const int k_long = ctx.spec.k - k_short;

    const std::vector<std::size_t> short_build =
        greedy_build(ctx, pool_indices, AnswerType::kShort, k_short, "greedy_short");
    const std::vector<std::size_t> long_build =
        greedy_build(ctx, pool_indices, AnswerType::kLong, k_long, "greedy_long");

    Selection selection;
    if (k_short == 0) {
        // Short answers come from the long-optimized ensemble.
        selection.l_prime =
            augment(ctx, long_build, short_build, AnswerType::kLong, "augment_long");
        selection.s_prime = selection.l_prime;
    } else if (k_long == 0) {
        selection.s_prime =
            augment(ctx, short_build, long_build, AnswerType::kShort, "augment_short");
        selection.l_prime = selection.s_prime;
    } else {
        selection.s_prime =
            augment(ctx, short_build, long_build, AnswerType::kShort, "augment_short");
        selection.l_prime =
            augment(ctx, long_build, short_build, AnswerType::kLong, "augment_long");
    }
    return selection;
}

Selection select_simple_greedy(SearchContext& ctx, const std::vector<std::size_t>& pool_indices,
                               const std::map<std::size_t, SubsetScore>& singles) {
    std::vector<std::size_t> subset = rank_by_single_f1(ctx, pool_indices, singles);
    subset.resize(static_cast<std::size_t>(ctx.spec.k));
    std::sort(subset.begin(), subset.end());

    eval_traced(ctx, "simple-greedy", {subset});
    return Selection{subset, subset};
}

SearchOutcome run_with_strategy(const CandidatePool& pool, const SearchSpec& spec,
                                const ingest::GoldSet& gold, const ingest::Split& split,
                                const calibrate::CalibratorStore* calibrators) {
    spec.validate(pool.systems.size());
    pool.validate(gold);

    const fuse::FusionConfig selection_fusion = spec.selection_fusion.value_or(spec.fusion);
    const ScoreCache selection_cache(pool, selection_fusion, calibrators, gold, spec.jobs);

    // The selection objective is bound to dev-train only; a leaking split
    // would let the search read test labels.
    {
        const std::set<ExampleId> train_set(split.train_ids.begin(), split.train_ids.end());
        for (const ExampleId& id : split.test_ids) {
            if (train_set.count(id) != 0) {
                throw ValidationError("split is not disjoint: example '" + id +
                                      "' is in both dev-train and dev-test");
            }
        }
    }
    const SubsetEvaluator train_eval(selection_cache, gold, split.train_ids, spec.match, "train");

    SearchOutcome outcome;
    SearchContext ctx{pool, spec, train_eval, outcome.trace, outcome.evaluations};

    std::vector<std::size_t> pool_indices(pool.systems.size());
    for (std::size_t i = 0; i < pool_indices.size(); ++i) pool_indices[i] = i;

    std::map<std::size_t, SubsetScore> singles;
    if (spec.pool_top_n || spec.strategy == SearchStrategy::kSimpleGreedy) {
        singles = single_model_scores(ctx, pool_indices);
    }
    if (spec.pool_top_n) {
        pool_indices = truncate_pool(ctx, pool_indices, singles, *spec.pool_top_n);
    }

    Selection selection;
    switch (spec.strategy) {
        case SearchStrategy::kExhaustive:
            selection = select_exhaustive(ctx, pool_indices);
            break;
        case SearchStrategy::kGreedy:
            selection = select_greedy(ctx, pool_indices);
            break;
        case SearchStrategy::kSimpleGreedy:
            selection = select_simple_greedy(ctx, pool_indices, singles);
            break;
    }

    // Final phase: re-predict the chosen ensembles under the final fusion
    // configuration and join short/long answers.
    const ScoreCache* final_cache = &selection_cache;
    std::optional<ScoreCache> rebuilt;
    if (!(selection_fusion == spec.fusion)) {
        rebuilt.emplace(pool, spec.fusion, calibrators, gold, spec.jobs);
        final_cache = &*rebuilt;
    }

    const SubsetEvaluator final_train(*final_cache, gold, split.train_ids, spec.match, "train");
    const SubsetScore s_final = final_train.eval(selection.s_prime);
    const SubsetScore l_final = final_train.eval(selection.l_prime);
    outcome.trace.push_back(TraceEntry{"final_s_prime", pool.ids_of(selection.s_prime),
                                       s_final.sa_f1, s_final.la_f1});
    outcome.trace.push_back(TraceEntry{"final_l_prime", pool.ids_of(selection.l_prime),
                                       l_final.sa_f1, l_final.la_f1});

    std::vector<ExampleId> all_ids = gold.example_order;
    const auto short_predictions = predict_subset(*final_cache, selection.s_prime, all_ids);
    const auto long_predictions = predict_subset(*final_cache, selection.l_prime, all_ids);
    outcome.predictions = fuse::join_predictions(short_predictions, long_predictions);

    outcome.s_prime = pool.ids_of(selection.s_prime);
    outcome.l_prime = pool.ids_of(selection.l_prime);
    outcome.train_report =
        metrics::evaluate(outcome.predictions, gold, split.train_ids, spec.match, "train");
    outcome.test_report =
        metrics::evaluate(outcome.predictions, gold, split.test_ids, spec.match, "test");
    return outcome;
}

}  // namespace

SearchOutcome exhaustive_search(const CandidatePool& pool, const SearchSpec& spec,
                                const ingest::GoldSet& gold, const ingest::Split& split,
                                const calibrate::CalibratorStore* calibrators) {
    SearchSpec local = spec;
    local.strategy = SearchStrategy::kExhaustive;
    return run_with_strategy(pool, local, gold, split, calibrators);
}

SearchOutcome greedy_search(const CandidatePool& pool, const SearchSpec& spec,
                            const ingest::GoldSet& gold, const ingest::Split& split,
                            const calibrate::CalibratorStore* calibrators) {
    SearchSpec local = spec;
    local.strategy = SearchStrategy::kGreedy;
    return run_with_strategy(pool, local, gold, split, calibrators);
}

SearchOutcome simple_greedy(const CandidatePool& pool, const SearchSpec& spec,
                            const ingest::GoldSet& gold, const ingest::Split& split,
                            const calibrate::CalibratorStore* calibrators) {
    SearchSpec local = spec;
    local.strategy = SearchStrategy::kSimpleGreedy;
    return run_with_strategy(pool, local, gold, split, calibrators);
}

SearchOutcome run_search(const CandidatePool& pool, const SearchSpec& spec,
                         const ingest::GoldSet& gold, const ingest::Split& split,
                         const calibrate::CalibratorStore* calibrators) {
    return run_with_strategy(pool, spec, gold, split, calibrators);
}

namespace {

json report_json(const metrics::EvalReport& report) {
    return json::parse(metrics::report_to_json(report, -1));
}

}  // namespace

std::string SearchOutcome::to_json(int indent) const {
    json trace_json = json::array();
    for (const TraceEntry& entry : trace) {
        trace_json.push_back(json{{"phase", entry.phase},
                                  {"ids", entry.ids},
                                  {"sa_f1", entry.sa_f1},
                                  {"la_f1", entry.la_f1}});
    }
    const json obj{{"s_prime", s_prime},
                   {"l_prime", l_prime},
                   {"train_report", report_json(train_report)},
                   {"test_report", report_json(test_report)},
                   {"evaluations", evaluations},
                   {"trace", trace_json}};
    return obj.dump(indent);
}

}  // namespace spanfuse::search
