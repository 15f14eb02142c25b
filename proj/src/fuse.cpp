#include "spanfuse/fuse.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "spanfuse/errors.hpp"

namespace spanfuse::fuse {

using nlohmann::json;

const char* to_string(Normalization n) {
    return n == Normalization::kNone ? "none" : "logreg";
}

Normalization normalization_from_string(const std::string& name) {
    if (name == "none") return Normalization::kNone;
    if (name == "logreg") return Normalization::kLogreg;
    throw ConfigError("unknown normalization '" + name + "' (expected none or logreg)");
}

void FusionConfig::validate() const {
    for (AnswerType t : kAnswerTypes) {
        const TypeFusion& cfg = of(t);
        cfg.aggregation.validate();
        if (cfg.aggregation.kind == agg::Aggregator::kNoisyOr &&
            cfg.normalization != Normalization::kLogreg) {
            throw ConfigError(std::string("noisy-or aggregation for ") + spanfuse::to_string(t) +
                              " answers requires logreg normalization");
        }
    }
}

SpanScores fuse_scores(const std::vector<const SpanScores*>& per_system, std::size_t n_systems) {
    if (n_systems == 0) throw ConfigError("cannot fuse an empty ensemble");

    SpanScores merged;
    std::size_t total = 0;
    for (const SpanScores* scores : per_system) total += scores->size();
    merged.reserve(total);
    for (const SpanScores* scores : per_system) {
        merged.insert(merged.end(), scores->begin(), scores->end());
    }
    // Stable sort keeps per-span contributions in system order, so the
    // accumulated sums are bit-identical to any straight-line recomputation
    // that walks systems in the same order.
    std::stable_sort(merged.begin(), merged.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    SpanScores fused;
    const double n = static_cast<double>(n_systems);
    std::size_t i = 0;
    while (i < merged.size()) {
        const Span span = merged[i].first;
        double sum = 0.0;
        while (i < merged.size() && merged[i].first == span) {
            sum += merged[i].second;
            ++i;
        }
        fused.emplace_back(span, sum / n);
    }
    return fused;
}

namespace {

bool contained_in(const Span& inner, const Span& outer) {
    return outer.start <= inner.start && inner.end <= outer.end;
}

Candidate argmax_with_implicit_null(const SpanScores& scores, const Span* containing) {
    bool explicit_null = false;
    bool any = false;
    Candidate best;
    auto consider = [&](const Candidate& c) {
        if (!any || ranks_before(c, best)) {
            best = c;
            any = true;
        }
    };
    for (const auto& [span, score] : scores) {
        if (span.is_null()) {
            explicit_null = true;
        } else if (containing != nullptr && !contained_in(span, *containing)) {
            continue;  // the restriction never filters the null answer
        }
        consider(Candidate{span, score});
    }
    if (!explicit_null) consider(Candidate{Span::null(), 0.0});
    return best;
}

}  // namespace

Prediction predict_example(const SpanScores& long_scores, const SpanScores& short_scores,
                           const FusionConfig& config) {
    Prediction prediction;
    prediction.long_span = argmax_with_implicit_null(long_scores, nullptr).span;
    if (prediction.long_span.is_null()) {
        prediction.short_span = Span::null();
        return prediction;
    }
    const Span* containing = config.restrict_short_to_long ? &prediction.long_span : nullptr;
    prediction.short_span = argmax_with_implicit_null(short_scores, containing).span;
    return prediction;
}

std::map<ExampleId, Prediction> join_predictions(
    const std::map<ExampleId, Prediction>& short_source,
    const std::map<ExampleId, Prediction>& long_source) {
    if (short_source.size() != long_source.size()) {
        throw ValidationError("short and long prediction sources cover different example sets");
    }
    std::map<ExampleId, Prediction> joined;
    auto short_it = short_source.begin();
    auto long_it = long_source.begin();
    for (; short_it != short_source.end(); ++short_it, ++long_it) {
        if (short_it->first != long_it->first) {
            throw ValidationError("prediction sources disagree on example id '" + short_it->first +
                                  "' vs '" + long_it->first + "'");
        }
        Prediction joined_prediction;
        joined_prediction.long_span = long_it->second.long_span;
        joined_prediction.short_span =
            joined_prediction.long_span.is_null() ? Span::null() : short_it->second.short_span;
        joined.emplace(short_it->first, joined_prediction);
    }
    return joined;
}

namespace {

json span_or_null(const Span& span) {
    if (span.is_null()) return json(nullptr);
    return json{{"start", span.start}, {"end", span.end}};
}

Span parse_span_or_null(const json& value, const std::string& context) {
    if (value.is_null()) return Span::null();
    if (!value.is_object() || !value.contains("start") || !value.contains("end")) {
        throw ParseError(context + ": span must be null or {start, end}");
    }
    const auto start = value["start"].get<std::int64_t>();
    const auto end = value["end"].get<std::int64_t>();
    if (start == -1 && end == -1) return Span::null();
    if (start < 0 || start >= end || end > std::numeric_limits<std::int32_t>::max()) {
        throw ValidationError(context + ": invalid span offsets");
    }
    return Span{static_cast<std::int32_t>(start), static_cast<std::int32_t>(end)};
}

}  // namespace

void write_prediction_file(const std::filesystem::path& path,
                           const std::map<ExampleId, Prediction>& predictions) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open prediction file for writing: " + path.string());
    for (const auto& [id, prediction] : predictions) {
        const json obj{{"example_id", id},
                       {"long", span_or_null(prediction.long_span)},
                       {"short", span_or_null(prediction.short_span)}};
        out << obj.dump() << "\n";
    }
}

std::map<ExampleId, Prediction> parse_prediction_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open prediction file: " + path.string());
    std::map<ExampleId, Prediction> predictions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string context = path.string() + ":" + std::to_string(line_no);
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw ParseError(context + ": malformed JSON");
        if (!obj.contains("example_id") || !obj["example_id"].is_string()) {
            throw ParseError(context + ": missing string 'example_id'");
        }
        const ExampleId id = obj["example_id"].get<std::string>();
        if (predictions.count(id) != 0) {
            throw ValidationError(context + ": duplicate example id '" + id + "'");
        }
        Prediction prediction;
        prediction.long_span = parse_span_or_null(obj.value("long", json(nullptr)), context);
        prediction.short_span = parse_span_or_null(obj.value("short", json(nullptr)), context);
        if (prediction.long_span.is_null() && !prediction.short_span.is_null()) {
            throw ValidationError(context + ": a null long answer cannot carry a short answer");
        }
        predictions.emplace(id, prediction);
    }
    return predictions;
}

}  // namespace spanfuse::fuse
