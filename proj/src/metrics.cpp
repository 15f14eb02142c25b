#include "spanfuse/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "spanfuse/errors.hpp"

namespace spanfuse::metrics {

using nlohmann::json;

bool is_answerable(const std::vector<ingest::GoldAnnotation>& annotations, AnswerType type,
                   int threshold) {
    if (threshold < 1) throw ConfigError("answerable threshold must be >= 1");
    int non_null = 0;
    for (const auto& ann : annotations) {
        const bool has_answer =
            type == AnswerType::kLong ? !ann.long_span.is_null() : !ann.short_spans.empty();
        if (has_answer && ++non_null >= threshold) return true;
    }
    return false;
}

bool match_span(const Span& predicted, const std::vector<ingest::GoldAnnotation>& annotations,
                AnswerType type, const MatchConfig& config) {
    if (type == AnswerType::kLong) {
        for (const auto& ann : annotations) {
            if (!ann.long_span.is_null() && ann.long_span == predicted) return true;
        }
        return false;
    }
    for (const auto& ann : annotations) {
        if (ann.short_spans.empty()) continue;
        if (config.relaxed_short) {
            if (std::find(ann.short_spans.begin(), ann.short_spans.end(), predicted) !=
                ann.short_spans.end()) {
                return true;
            }
        } else {
            // The system predicts single short spans only, so strict mode
            // requires the annotation's short answer set to be exactly the
            // predicted singleton.
            const bool all_equal = std::all_of(ann.short_spans.begin(), ann.short_spans.end(),
                                               [&](const Span& s) { return s == predicted; });
            if (all_equal) return true;
        }
    }
    return false;
}

void TypeCounts::finalize() {
    precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

void accumulate_example(const Prediction& prediction,
                        const std::vector<ingest::GoldAnnotation>& annotations,
                        const MatchConfig& config, TypeCounts& long_counts,
                        TypeCounts& short_counts) {
    for (AnswerType type : kAnswerTypes) {
        TypeCounts& counts = type == AnswerType::kLong ? long_counts : short_counts;
        const Span& span = prediction.of(type);
        const bool answerable = is_answerable(annotations, type, config.answerable_threshold);
        if (!span.is_null()) {
            const bool matched = match_span(span, annotations, type, config);
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

EvalReport evaluate(const std::map<ExampleId, Prediction>& predictions, const ingest::GoldSet& gold,
                    const std::vector<ExampleId>& split_ids, const MatchConfig& config,
                    std::string split_name) {
    EvalReport report;
    report.split_name = std::move(split_name);
    report.n_examples = split_ids.size();
    static const Prediction kNullPrediction{};
    for (const ExampleId& id : split_ids) {
        const auto it = predictions.find(id);
        const Prediction& pred = it != predictions.end() ? it->second : kNullPrediction;
        accumulate_example(pred, gold.annotations(id), config, report.long_answer,
                           report.short_answer);
    }
    report.long_answer.finalize();
    report.short_answer.finalize();
    return report;
}

namespace {

json counts_to_json(const TypeCounts& c) {
    return json{{"tp", c.tp},       {"fp", c.fp},           {"fn", c.fn},
                {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}};
}

}  // namespace

std::string report_to_json(const EvalReport& report, int indent) {
    const json obj{{"split", report.split_name},
                   {"n_examples", report.n_examples},
                   {"long", counts_to_json(report.long_answer)},
                   {"short", counts_to_json(report.short_answer)}};
    return obj.dump(indent);
}

std::string report_to_display(const EvalReport& report) {
    char buffer[256];
    std::string out;
    for (AnswerType type : kAnswerTypes) {
        const TypeCounts& c = report.of(type);
        std::snprintf(buffer, sizeof(buffer),
                      "%-5s [%s]  P=%.4f R=%.4f F1=%.4f  (tp=%lld fp=%lld fn=%lld)\n",
                      to_string(type), report.split_name.c_str(), c.precision, c.recall, c.f1,
                      static_cast<long long>(c.tp), static_cast<long long>(c.fp),
                      static_cast<long long>(c.fn));
        out += buffer;
    }
    return out;
}

}  // namespace spanfuse::metrics
