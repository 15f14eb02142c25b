#include "spanfuse/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "spanfuse/errors.hpp"

namespace spanfuse::ingest {

using nlohmann::json;

namespace {

std::string where(const std::filesystem::path& path, std::size_t line_no) {
    return path.string() + ":" + std::to_string(line_no);
}

json parse_line(const std::filesystem::path& path, std::size_t line_no, const std::string& line) {
    json value = json::parse(line, nullptr, false);
    if (value.is_discarded()) {
        throw ParseError(where(path, line_no) + ": malformed JSON");
    }
    if (!value.is_object()) {
        throw ParseError(where(path, line_no) + ": expected a JSON object");
    }
    return value;
}

Span span_from_fields(const json& obj, const std::filesystem::path& path, std::size_t line_no) {
    if (!obj.contains("start") || !obj.contains("end") || !obj["start"].is_number_integer() ||
        !obj["end"].is_number_integer()) {
        throw ParseError(where(path, line_no) + ": span needs integer 'start' and 'end'");
    }
    const auto start = obj["start"].get<std::int64_t>();
    const auto end = obj["end"].get<std::int64_t>();
    if (start == -1 && end == -1) return Span::null();
    if (start < 0 || end < 0) {
        throw ValidationError(where(path, line_no) +
                              ": negative offsets are only valid as the null span (-1, -1)");
    }
    if (start >= end) {
        throw ValidationError(where(path, line_no) + ": span start " + std::to_string(start) +
                              " must be < end " + std::to_string(end));
    }
    if (end > std::numeric_limits<std::int32_t>::max()) {
        throw ValidationError(where(path, line_no) + ": token index " + std::to_string(end) +
                              " out of range");
    }
    return Span{static_cast<std::int32_t>(start), static_cast<std::int32_t>(end)};
}

double score_from_fields(const json& obj, const std::filesystem::path& path, std::size_t line_no) {
    if (!obj.contains("score") || !obj["score"].is_number()) {
        throw ParseError(where(path, line_no) + ": candidate needs a numeric 'score'");
    }
    const double score = obj["score"].get<double>();
    if (!std::isfinite(score)) {
        throw ValidationError(where(path, line_no) + ": score must be finite");
    }
    return score;
}

std::vector<Candidate> candidates_from_array(const json& arr, const std::filesystem::path& path,
                                             std::size_t line_no) {
    if (!arr.is_array()) {
        throw ParseError(where(path, line_no) + ": candidate list must be an array");
    }
    std::vector<Candidate> out;
    out.reserve(arr.size());
    for (const json& item : arr) {
        if (!item.is_object()) {
            throw ParseError(where(path, line_no) + ": candidate must be an object");
        }
        out.push_back(Candidate{span_from_fields(item, path, line_no),
                                score_from_fields(item, path, line_no)});
    }
    return out;
}

json span_to_json(const Span& span) {
    return json{{"start", span.start}, {"end", span.end}};
}

json candidates_to_json(const std::vector<Candidate>& candidates) {
    json arr = json::array();
    for (const Candidate& c : candidates) {
        arr.push_back(json{{"start", c.span.start}, {"end", c.span.end}, {"score", c.score}});
    }
    return arr;
}

}  // namespace

const std::vector<GoldAnnotation>& GoldSet::annotations(const ExampleId& id) const {
    const auto it = examples.find(id);
    if (it == examples.end()) {
        throw ValidationError("example id '" + id + "' not present in gold");
    }
    return it->second;
}

SystemPredictions parse_predictions(const std::filesystem::path& path,
                                    const std::string& fallback_system_id) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open predictions file: " + path.string());

    SystemPredictions preds;
    preds.system_id = fallback_system_id.empty() ? path.stem().string() : fallback_system_id;

    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj = parse_line(path, line_no, line);

        if (first_content_line && obj.contains("system_id") && !obj.contains("example_id")) {
            if (!obj["system_id"].is_string()) {
                throw ParseError(where(path, line_no) + ": 'system_id' must be a string");
            }
            preds.system_id = obj["system_id"].get<std::string>();
            first_content_line = false;
            continue;
        }
        first_content_line = false;

        if (!obj.contains("example_id") || !obj["example_id"].is_string()) {
            throw ParseError(where(path, line_no) + ": missing string 'example_id'");
        }
        const ExampleId id = obj["example_id"].get<std::string>();
        if (preds.examples.count(id) != 0) {
            throw ValidationError(where(path, line_no) + ": duplicate example id '" + id + "'");
        }

        ExampleCandidates entry;
        if (obj.contains("long")) entry.long_answers = candidates_from_array(obj["long"], path, line_no);
        if (obj.contains("short")) entry.short_answers = candidates_from_array(obj["short"], path, line_no);
        preds.examples.emplace(id, std::move(entry));
    }
    return preds;
}

void write_predictions(const std::filesystem::path& path, const SystemPredictions& preds) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open predictions file for writing: " + path.string());
    out << json{{"system_id", preds.system_id}}.dump() << "\n";
    for (const auto& [id, entry] : preds.examples) {
        json obj{{"example_id", id},
                 {"long", candidates_to_json(entry.long_answers)},
                 {"short", candidates_to_json(entry.short_answers)}};
        out << obj.dump() << "\n";
    }
}

GoldSet parse_gold(const std::vector<std::filesystem::path>& paths) {
    if (paths.empty()) throw ConfigError("at least one gold file is required");
    GoldSet gold;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open gold file: " + path.string());

        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json obj = parse_line(path, line_no, line);
            if (!obj.contains("example_id") || !obj["example_id"].is_string()) {
                throw ParseError(where(path, line_no) + ": missing string 'example_id'");
            }
            const ExampleId id = obj["example_id"].get<std::string>();
            if (gold.examples.count(id) != 0) {
                throw ValidationError(where(path, line_no) + ": duplicate example id '" + id + "'");
            }
            if (!obj.contains("annotations") || !obj["annotations"].is_array() ||
                obj["annotations"].empty()) {
                throw ValidationError(where(path, line_no) +
                                      ": 'annotations' must be a non-empty array");
            }
            if (obj["annotations"].size() > 5) {
                throw ValidationError(where(path, line_no) + ": more than 5 annotations");
            }

            std::vector<GoldAnnotation> annotations;
            for (const json& ann : obj["annotations"]) {
                if (!ann.is_object()) {
                    throw ParseError(where(path, line_no) + ": annotation must be an object");
                }
                GoldAnnotation parsed;
                if (ann.contains("long") && !ann["long"].is_null()) {
                    parsed.long_span = span_from_fields(ann["long"], path, line_no);
                    if (parsed.long_span.is_null()) {
                        throw ValidationError(where(path, line_no) +
                                              ": encode a null long answer as JSON null");
                    }
                }
                if (ann.contains("short") && !ann["short"].is_null()) {
                    if (!ann["short"].is_array()) {
                        throw ParseError(where(path, line_no) + ": 'short' must be an array");
                    }
                    for (const json& sp : ann["short"]) {
                        const Span span = span_from_fields(sp, path, line_no);
                        if (span.is_null()) {
                            throw ValidationError(where(path, line_no) +
                                                  ": null spans are not valid gold short answers");
                        }
                        parsed.short_spans.push_back(span);
                    }
                }
                if (parsed.long_span.is_null() && !parsed.short_spans.empty()) {
                    throw ValidationError(where(path, line_no) +
                                          ": short answers require a long answer");
                }
                annotations.push_back(std::move(parsed));
            }
            gold.examples.emplace(id, std::move(annotations));
            gold.example_order.push_back(id);
        }
        gold.file_boundaries.push_back(gold.example_order.size());
    }
    return gold;
}

void write_gold(const std::filesystem::path& path, const GoldSet& gold) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open gold file for writing: " + path.string());
    for (const ExampleId& id : gold.example_order) {
        json anns = json::array();
        for (const GoldAnnotation& ann : gold.examples.at(id)) {
            json shorts = json::array();
            for (const Span& s : ann.short_spans) shorts.push_back(span_to_json(s));
            anns.push_back(json{{"long", ann.long_span.is_null() ? json(nullptr) : span_to_json(ann.long_span)},
                                {"short", shorts}});
        }
        out << json{{"example_id", id}, {"annotations", anns}}.dump() << "\n";
    }
}

SystemPredictions truncate_top_k(SystemPredictions preds, int k) {
    if (k < 1) throw ConfigError("top-k must be >= 1");
    const auto cap = static_cast<std::size_t>(k);
    for (auto& [id, entry] : preds.examples) {
        for (AnswerType t : kAnswerTypes) {
            auto& list = entry.of(t);
            if (list.size() <= cap) continue;
            std::stable_sort(list.begin(), list.end(), ranks_before);
            list.resize(cap);
        }
    }
    return preds;
}

Split split_by_files(const GoldSet& gold, std::size_t train_files) {
    const std::size_t n_files = gold.file_boundaries.size();
    if (train_files < 1 || train_files >= n_files) {
        throw ConfigError("train file count must be in [1, " + std::to_string(n_files) +
                          ") for a " + std::to_string(n_files) + "-file gold set");
    }
    const std::size_t cut = gold.file_boundaries[train_files - 1];
    Split split;
    split.train_ids.assign(gold.example_order.begin(), gold.example_order.begin() + cut);
    split.test_ids.assign(gold.example_order.begin() + cut, gold.example_order.end());
    return split;
}

Split split_by_fraction(const GoldSet& gold, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train fraction must be in (0, 1)");
    }
    const auto n = static_cast<double>(gold.example_order.size());
    auto cut = static_cast<std::size_t>(std::llround(train_fraction * n));
    cut = std::min(cut, gold.example_order.size());
    Split split;
    split.train_ids.assign(gold.example_order.begin(), gold.example_order.begin() + cut);
    split.test_ids.assign(gold.example_order.begin() + cut, gold.example_order.end());
    return split;
}

ValidationReport validate_ensemble_inputs(const std::vector<SystemPredictions>& systems,
                                          const GoldSet& gold) {
    ValidationReport report;
    if (systems.empty()) {
        report.errors.push_back("no systems given");
        return report;
    }

    std::map<SystemId, std::size_t> seen;
    for (const auto& sys : systems) {
        if (++seen[sys.system_id] == 2) {
            report.errors.push_back("duplicate system id '" + sys.system_id + "'");
        }
    }

    for (const auto& sys : systems) {
        if (sys.examples.empty()) {
            report.warnings.push_back("system '" + sys.system_id + "' has no predictions");
            continue;
        }
        std::size_t missing = 0;
        ExampleId first_missing;
        for (const ExampleId& id : gold.example_order) {
            if (sys.examples.count(id) == 0) {
                if (missing == 0) first_missing = id;
                ++missing;
            }
        }
        if (missing > 0) {
            report.warnings.push_back("system '" + sys.system_id + "' missing " +
                                      std::to_string(missing) + " gold example(s), first '" +
                                      first_missing + "' (treated as null-only)");
        }
        for (const auto& [id, entry] : sys.examples) {
            if (gold.examples.count(id) == 0) {
                report.errors.push_back("system '" + sys.system_id + "' predicts example id '" +
                                        id + "' that is not in the gold set");
            }
        }
    }
    return report;
}

}  // namespace spanfuse::ingest
