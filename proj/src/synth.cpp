#include "spanfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <json.hpp>

#include "spanfuse/errors.hpp"
#include "spanfuse/rng.hpp"

namespace spanfuse::synth {

using nlohmann::json;

void SynthSpec::validate() const {
    if (n_examples == 0) throw ConfigError("n_examples must be >= 1");
    if (n_systems == 0) throw ConfigError("n_systems must be >= 1");
    if (!system_accuracies.empty() && system_accuracies.size() != n_systems) {
        throw ConfigError("system_accuracies must have one entry per system");
    }
    for (const double p : system_accuracies) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("accuracies must be in [0, 1]");
    }
    if (!(accuracy_min >= 0.0 && accuracy_min <= 1.0) ||
        !(accuracy_max >= 0.0 && accuracy_max <= 1.0)) {
        throw ConfigError("accuracy bounds must be in [0, 1]");
    }
    if (!(score_noise >= 0.0)) throw ConfigError("score noise must be >= 0");
    if (!(correlation >= 0.0 && correlation <= 1.0)) {
        throw ConfigError("correlation must be in [0, 1]");
    }
    if (correlated_systems > n_systems) {
        throw ConfigError("correlated_systems cannot exceed n_systems");
    }
    if (!(answerable_fraction >= 0.0 && answerable_fraction <= 1.0)) {
        throw ConfigError("answerable fraction must be in [0, 1]");
    }
    if (candidates_per_example < 1 || candidates_per_example > 20) {
        throw ConfigError("candidates per example must be in [1, 20]");
    }
}

std::string SynthSpec::to_json(int indent) const {
    const json obj{{"n_examples", n_examples},
                   {"n_systems", n_systems},
                   {"system_accuracies", system_accuracies},
                   {"accuracy_min", accuracy_min},
                   {"accuracy_max", accuracy_max},
                   {"score_noise", score_noise},
                   {"correlation", correlation},
                   {"correlated_systems", correlated_systems},
                   {"answerable_fraction", answerable_fraction},
                   {"candidates_per_example", candidates_per_example},
                   {"seed", seed}};
    return obj.dump(indent);
}

SynthSpec SynthSpec::from_json(const std::string& text) {
    json obj = json::parse(text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) throw ParseError("malformed synth spec JSON");
    SynthSpec spec;
    spec.n_examples = obj.value("n_examples", spec.n_examples);
    spec.n_systems = obj.value("n_systems", spec.n_systems);
    spec.system_accuracies = obj.value("system_accuracies", spec.system_accuracies);
    spec.accuracy_min = obj.value("accuracy_min", spec.accuracy_min);
    spec.accuracy_max = obj.value("accuracy_max", spec.accuracy_max);
    spec.score_noise = obj.value("score_noise", spec.score_noise);
    spec.correlation = obj.value("correlation", spec.correlation);
    spec.correlated_systems = obj.value("correlated_systems", spec.correlated_systems);
    spec.answerable_fraction = obj.value("answerable_fraction", spec.answerable_fraction);
    spec.candidates_per_example = obj.value("candidates_per_example", spec.candidates_per_example);
    spec.seed = obj.value("seed", spec.seed);
    spec.validate();
    return spec;
}

namespace {

// Standard normal CDF.
double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730951); }

// Inverse normal CDF by bisection; deterministic and precise enough for
// threshold tests against latent draws.
double probit(double p) {
    double lo = -12.0;
    double hi = 12.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct GoldExample {
    bool answerable = false;
    Span long_span = Span::null();
    Span short_span = Span::null();  // null = no gold short answer
    std::int32_t doc_tokens = 0;
};

std::string example_name(std::size_t index) {
    std::string digits = std::to_string(index);
    while (digits.size() < 5) digits.insert(digits.begin(), '0');
    return "ex" + digits;
}

std::string system_name(std::size_t index) {
    std::string digits = std::to_string(index);
    while (digits.size() < 2) digits.insert(digits.begin(), '0');
    return "sys" + digits;
}

Span random_long_span(Rng& rng, std::int32_t doc_tokens) {
    const auto start = static_cast<std::int32_t>(rng.next_below(doc_tokens - 45));
    const auto length = static_cast<std::int32_t>(10 + rng.next_below(30));
    return Span{start, start + length};
}

Span random_short_span_inside(Rng& rng, const Span& outer) {
    const std::int32_t max_start = outer.end - 2;
    const auto start =
        outer.start + static_cast<std::int32_t>(rng.next_below(max_start - outer.start + 1));
    const auto max_len = std::min<std::int32_t>(4, outer.end - start);
    const auto length = static_cast<std::int32_t>(1 + rng.next_below(max_len));
    return Span{start, start + length};
}

Span random_distractor(Rng& rng, std::int32_t doc_tokens, bool short_answer, const Span& avoid) {
    for (;;) {
        Span span;
        if (short_answer) {
            const auto start = static_cast<std::int32_t>(rng.next_below(doc_tokens - 5));
            span = Span{start, start + static_cast<std::int32_t>(1 + rng.next_below(4))};
        } else {
            const auto start = static_cast<std::int32_t>(rng.next_below(doc_tokens - 25));
            span = Span{start, start + static_cast<std::int32_t>(8 + rng.next_below(16))};
        }
        if (span != avoid) return span;
    }
}

}  // namespace

SynthCorpus generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(mix_seed(spec.seed, 0x737973));

    std::vector<double> accuracies = spec.system_accuracies;
    if (accuracies.empty()) {
        accuracies.resize(spec.n_systems);
        for (std::size_t m = 0; m < spec.n_systems; ++m) {
            const double t =
                spec.n_systems == 1
                    ? 0.0
                    : static_cast<double>(m) / static_cast<double>(spec.n_systems - 1);
            accuracies[m] = spec.accuracy_min + t * (spec.accuracy_max - spec.accuracy_min);
        }
    }
    std::vector<double> hit_thresholds(spec.n_systems);
    for (std::size_t m = 0; m < spec.n_systems; ++m) hit_thresholds[m] = probit(
        std::min(std::max(accuracies[m], 1e-12), 1.0 - 1e-12));

    const std::size_t cluster =
        spec.correlated_systems == 0 ? spec.n_systems : spec.correlated_systems;

    SynthCorpus corpus;
    corpus.systems.resize(spec.n_systems);
    for (std::size_t m = 0; m < spec.n_systems; ++m) {
        corpus.systems[m].system_id = system_name(m);
    }

    for (std::size_t e = 0; e < spec.n_examples; ++e) {
        const ExampleId id = example_name(e);

        GoldExample gold;
        gold.doc_tokens = static_cast<std::int32_t>(120 + rng.next_below(80));
        gold.answerable = rng.next_unit() < spec.answerable_fraction;
        if (gold.answerable) {
            gold.long_span = random_long_span(rng, gold.doc_tokens);
            if (rng.next_unit() < 0.8) {
                gold.short_span = random_short_span_inside(rng, gold.long_span);
            }
        }

        ingest::GoldAnnotation annotation;
        annotation.long_span = gold.long_span;
        if (!gold.short_span.is_null()) annotation.short_spans.push_back(gold.short_span);
        corpus.gold.examples.emplace(id, std::vector<ingest::GoldAnnotation>{annotation});
        corpus.gold.example_order.push_back(id);

        // Shared latent per answer type drives the correlated cluster.
        const double latent_long = rng.next_normal();
        const double latent_short = rng.next_normal();

        for (std::size_t m = 0; m < spec.n_systems; ++m) {
            ingest::ExampleCandidates entry;
            for (AnswerType type : kAnswerTypes) {
                const bool is_short = type == AnswerType::kShort;
                const double shared = is_short ? latent_short : latent_long;
                const double own = rng.next_normal();
                const double rho = m < cluster ? spec.correlation : 0.0;
                const double z = std::sqrt(rho) * shared + std::sqrt(1.0 - rho) * own;
                bool hit;
                if (accuracies[m] <= 0.0) {
                    hit = false;
                } else if (accuracies[m] >= 1.0) {
                    hit = true;
                } else {
                    hit = z < hit_thresholds[m];
                }

                // The target answer for this type: the gold span when one
                // exists, otherwise the null span (decline to answer).
                const Span gold_span = is_short ? gold.short_span : gold.long_span;
                const bool has_gold = !gold_span.is_null();

                std::vector<Candidate>& list = entry.of(type);
                auto emit = [&](const Span& span, double affinity) {
                    if (list.size() >= spec.candidates_per_example) return;
                    list.push_back(Candidate{span, affinity + spec.score_noise * rng.next_normal()});
                };

                if (hit) {
                    if (has_gold) {
                        emit(gold_span, 2.2);
                        if (rng.next_unit() < 0.3) emit(gold_span, 1.2);  // repeat decode window
                        emit(Span::null(), 0.3);
                    } else {
                        emit(Span::null(), 2.2);
                    }
                } else {
                    emit(Span::null(), 0.6);
                }
                while (list.size() < spec.candidates_per_example) {
                    const double rank_penalty = 0.35 * static_cast<double>(list.size());
                    emit(random_distractor(rng, gold.doc_tokens, is_short, gold_span),
                         0.8 - rank_penalty);
                }
            }
            corpus.systems[m].examples.emplace(id, std::move(entry));
        }
    }
    corpus.gold.file_boundaries.push_back(corpus.gold.example_order.size());
    return corpus;
}

// ---------------------------------------------------------------------------
// Oracle: straight-line reimplementation, no shared fusion/metric code.
// ---------------------------------------------------------------------------

namespace {

double oracle_sigmoid(double z) {
    double p;
    if (z >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        p = e / (1.0 + e);
    }
    return std::min(std::max(p, 1e-300), 1.0 - 1e-16);
}

// Higher score wins; ties prefer non-null, then smaller start, then smaller
// end (the same rule the pipeline states, spelled out independently).
bool oracle_prefer(const Span& a_span, double a_score, const Span& b_span, double b_score) {
    if (a_score != b_score) return a_score > b_score;
    const bool a_null = a_span.is_null();
    const bool b_null = b_span.is_null();
    if (a_null != b_null) return !a_null;
    if (a_span.start != b_span.start) return a_span.start < b_span.start;
    return a_span.end < b_span.end;
}

struct OracleCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;

    double f1() const {
        const double p = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double r = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
};

int oracle_answer_count(const std::vector<ingest::GoldAnnotation>& annotations, bool short_answer) {
    int count = 0;
    for (const auto& ann : annotations) {
        if (short_answer ? !ann.short_spans.empty() : !ann.long_span.is_null()) ++count;
    }
    return count;
}

bool oracle_match(const Span& predicted, const std::vector<ingest::GoldAnnotation>& annotations,
                  bool short_answer, bool relaxed) {
    for (const auto& ann : annotations) {
        if (!short_answer) {
            if (!ann.long_span.is_null() && ann.long_span == predicted) return true;
            continue;
        }
        if (ann.short_spans.empty()) continue;
        if (relaxed) {
            for (const Span& s : ann.short_spans) {
                if (s == predicted) return true;
            }
        } else {
            bool all = true;
            for (const Span& s : ann.short_spans) {
                if (!(s == predicted)) {
                    all = false;
                    break;
                }
            }
            if (all) return true;
        }
    }
    return false;
}

// Fused span scores for one (example, answer type): per system calibrate,
// group, aggregate; then sum across systems in subset order and divide by
// the subset size.
std::map<Span, double> oracle_fused_scores(
    const std::vector<const ingest::SystemPredictions*>& subset, const ExampleId& id,
    AnswerType type, const fuse::FusionConfig& fusion,
    const calibrate::CalibratorStore* calibrators) {
    const fuse::TypeFusion& cfg = fusion.of(type);
    std::map<Span, double> sums;
    for (const ingest::SystemPredictions* system : subset) {
        const auto example_it = system->examples.find(id);
        const std::vector<Candidate>* candidates =
            example_it == system->examples.end() ? nullptr : &example_it->second.of(type);
        if (candidates == nullptr || candidates->empty()) {
            sums[Span::null()] += 0.0;
            continue;
        }

        const calibrate::Calibrator* calibrator = nullptr;
        if (cfg.normalization == fuse::Normalization::kLogreg) {
            if (calibrators == nullptr) {
                throw ConfigError("logreg normalization requires calibrators");
            }
            calibrator = &calibrators->require(system->system_id, type);
        }

        std::map<Span, std::vector<double>> groups;
        for (const Candidate& candidate : *candidates) {
            double score = candidate.score;
            if (calibrator != nullptr) {
                score = oracle_sigmoid(calibrator->weight * score + calibrator->bias);
            }
            groups[candidate.span].push_back(score);
        }
        for (auto& [span, scores] : groups) {
            std::sort(scores.begin(), scores.end(), std::greater<double>());
            double value = 0.0;
            switch (cfg.aggregation.kind) {
                case agg::Aggregator::kMax: {
                    value = scores.front();
                    for (const double s : scores) value = std::max(value, s);
                    break;
                }
                case agg::Aggregator::kExpSum: {
                    double decay = 1.0;
                    for (const double s : scores) {
                        value += s * decay;
                        decay *= cfg.aggregation.beta;
                    }
                    break;
                }
                case agg::Aggregator::kRecipRankSum: {
                    for (std::size_t i = 0; i < scores.size(); ++i) {
                        value += scores[i] / static_cast<double>(i + 1);
                    }
                    break;
                }
                case agg::Aggregator::kNoisyOr: {
                    double miss = 1.0;
                    for (const double s : scores) {
                        if (!(s >= 0.0 && s <= 1.0)) {
                            throw ValidationError("oracle: noisy-or input outside [0, 1]");
                        }
                        miss *= 1.0 - s;
                    }
                    value = 1.0 - miss;
                    break;
                }
            }
            sums[span] += value;
        }
    }
    const double n = static_cast<double>(subset.size());
    for (auto& [span, sum] : sums) sum /= n;
    return sums;
}

Span oracle_argmax(const std::map<Span, double>& scores, const Span* containing) {
    Span best_span = Span::null();
    double best_score = 0.0;
    bool any = false;
    bool explicit_null = false;
    for (const auto& [span, score] : scores) {
        if (span.is_null()) {
            explicit_null = true;
        } else if (containing != nullptr &&
                   !(containing->start <= span.start && span.end <= containing->end)) {
            continue;
        }
        if (!any || oracle_prefer(span, score, best_span, best_score)) {
            best_span = span;
            best_score = score;
            any = true;
        }
    }
    if (!explicit_null) {
        if (!any || oracle_prefer(Span::null(), 0.0, best_span, best_score)) {
            best_span = Span::null();
        }
    }
    return best_span;
}

}  // namespace

std::pair<double, double> oracle_eval_subset(
    const std::vector<const ingest::SystemPredictions*>& subset, const ingest::GoldSet& gold,
    const std::vector<ExampleId>& split_ids, const fuse::FusionConfig& fusion,
    const calibrate::CalibratorStore* calibrators, const metrics::MatchConfig& match) {
    if (subset.empty()) throw ConfigError("oracle: empty subset");
    OracleCounts long_counts;
    OracleCounts short_counts;

    for (const ExampleId& id : split_ids) {
        const auto gold_it = gold.examples.find(id);
        if (gold_it == gold.examples.end()) {
            throw ValidationError("oracle: example '" + id + "' not in gold");
        }
        const auto& annotations = gold_it->second;

        const auto long_scores =
            oracle_fused_scores(subset, id, AnswerType::kLong, fusion, calibrators);
        const auto short_scores =
            oracle_fused_scores(subset, id, AnswerType::kShort, fusion, calibrators);

        const Span long_pred = oracle_argmax(long_scores, nullptr);
        Span short_pred = Span::null();
        if (!long_pred.is_null()) {
            const Span* containing = fusion.restrict_short_to_long ? &long_pred : nullptr;
            short_pred = oracle_argmax(short_scores, containing);
        }

        for (const bool short_answer : {false, true}) {
            OracleCounts& counts = short_answer ? short_counts : long_counts;
            const Span& predicted = short_answer ? short_pred : long_pred;
            const bool answerable =
                oracle_answer_count(annotations, short_answer) >= match.answerable_threshold;
            if (!predicted.is_null()) {
                const bool matched =
                    oracle_match(predicted, annotations, short_answer, match.relaxed_short);
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
    return {short_counts.f1(), long_counts.f1()};
}

OracleBest oracle_exhaustive(const std::vector<ingest::SystemPredictions>& pool, int k,
                             const ingest::GoldSet& gold,
                             const std::vector<ExampleId>& split_ids,
                             const fuse::FusionConfig& fusion,
                             const calibrate::CalibratorStore* calibrators,
                             const metrics::MatchConfig& match) {
    const std::size_t n = pool.size();
    if (n > 12) throw ConfigError("oracle: pool too large (max 12 systems)");
    if (k < 1 || static_cast<std::size_t>(k) > n) throw ConfigError("oracle: invalid k");

    OracleBest best;
    bool have = false;

    std::vector<std::size_t> combo(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = i;

    const auto evaluate_combo = [&] {
        std::vector<const ingest::SystemPredictions*> subset;
        std::vector<SystemId> ids;
        for (const std::size_t i : combo) {
            subset.push_back(&pool[i]);
            ids.push_back(pool[i].system_id);
        }
        std::sort(ids.begin(), ids.end());
        const auto [sa_f1, la_f1] =
            oracle_eval_subset(subset, gold, split_ids, fusion, calibrators, match);
        if (!have || sa_f1 > best.short_f1 || (sa_f1 == best.short_f1 && ids < best.short_best)) {
            best.short_f1 = sa_f1;
            best.short_best = ids;
        }
        if (!have || la_f1 > best.long_f1 || (la_f1 == best.long_f1 && ids < best.long_best)) {
            best.long_f1 = la_f1;
            best.long_best = ids;
        }
        have = true;
    };

    // Lexicographic combination walk.
    for (;;) {
        evaluate_combo();
        std::size_t i = combo.size();
        while (i > 0 && combo[i - 1] == n - combo.size() + (i - 1)) --i;
        if (i == 0) break;
        ++combo[i - 1];
        for (std::size_t j = i; j < combo.size(); ++j) combo[j] = combo[j - 1] + 1;
    }
    return best;
}

}  // namespace spanfuse::synth
