// spanfuse: span-level ensembling of question answering prediction files.
//
// Subcommands: validate, calibrate, fuse, search, eval, synth. Every
// file-producing command drops a run_config.json next to its outputs; any
// command replays from one via --config. Parallelism comes from --jobs
// (SPANFUSE_JOBS overrides).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spanfuse/calibrate.hpp"
#include "spanfuse/core.hpp"
#include "spanfuse/errors.hpp"
#include "spanfuse/fuse.hpp"
#include "spanfuse/ingest.hpp"
#include "spanfuse/metrics.hpp"
#include "spanfuse/parallel.hpp"
#include "spanfuse/rng.hpp"
#include "spanfuse/search.hpp"
#include "spanfuse/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spanfuse;

namespace {

// --- config files: JSON run configs or TOML key = value files -------------

class JsonOrTomlConfig : public CLI::ConfigTOML {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::string content((std::istreambuf_iterator<char>(input)),
                            std::istreambuf_iterator<char>());
        const auto first = content.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || content[first] != '{') {
            std::istringstream toml(content);
            return CLI::ConfigTOML::from_config(toml);
        }
        json obj = json::parse(content, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw CLI::ConfigError("config file is not a JSON object");
        }
        std::vector<std::string> parents;
        if (obj.contains("command") && obj["command"].is_string()) {
            parents.push_back(obj["command"].get<std::string>());
        }
        if (obj.contains("options") && obj["options"].is_object()) obj = obj["options"];
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : obj.items()) {
            if (key == "command") continue;
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const json& element : value) item.inputs.push_back(scalar_text(element));
            } else {
                item.inputs.push_back(scalar_text(value));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    static std::string scalar_text(const json& value) {
        if (value.is_string()) return value.get<std::string>();
        if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
        return value.dump();
    }
};

// --- shared flag groups ----------------------------------------------------

struct IoFlags {
    std::vector<std::string> preds;
    std::string preds_dir;
    std::vector<std::string> gold;
    std::string out_dir;
};

struct SplitFlags {
    int train_files = 0;  // > 0 selects the file-boundary split
    double train_fraction = 0.6;
};

struct MetricFlags {
    int answerable_threshold = 2;
    bool relaxed_short = false;
};

struct FusionFlags {
    std::string sa_agg = "max";
    std::string la_agg = "max";
    std::string sa_norm;  // empty: none, or logreg when the aggregator is noisy-or
    std::string la_norm;
    double beta = 0.5;
    bool restrict_short_to_long = false;
    int top_k = ingest::kDefaultTopK;
};

struct CalibFlags {
    std::string calibrator_dir;
    std::vector<double> c_grid;
    int folds = 5;
};

struct RunFlags {
    unsigned jobs = 0;  // 0 = auto
    std::uint64_t seed = 1;
};

void add_io_flags(CLI::App* cmd, IoFlags& io, bool needs_out) {
    cmd->add_option("--preds", io.preds, "Prediction JSONL files (one per system)");
    cmd->add_option("--preds-dir", io.preds_dir,
                    "Directory scanned for *.jsonl prediction files (sorted by name)");
    cmd->add_option("--gold", io.gold, "Gold JSONL file(s), in split order")->required();
    auto* out = cmd->add_option("-o,--out", io.out_dir, "Output directory");
    if (needs_out) out->required();
}

void add_split_flags(CLI::App* cmd, SplitFlags& split) {
    cmd->add_option("--train-files", split.train_files,
                    "Dev-train takes the first N gold files (file-boundary split)")
        ->capture_default_str();
    cmd->add_option("--train-fraction", split.train_fraction,
                    "Positional dev-train fraction when no --train-files is given")
        ->capture_default_str();
}

void add_metric_flags(CLI::App* cmd, MetricFlags& metric) {
    cmd->add_option("--answerable-threshold", metric.answerable_threshold,
                    "Annotations that must be non-null for an example to be answerable")
        ->capture_default_str();
    cmd->add_flag("--relaxed-short", metric.relaxed_short,
                  "Short answer matches by membership instead of exact singleton");
}

void add_fusion_flags(CLI::App* cmd, FusionFlags& fusion) {
    cmd->add_option("--sa-agg", fusion.sa_agg, "Short answer aggregation: max|exs|rrs|noisy-or")
        ->capture_default_str();
    cmd->add_option("--la-agg", fusion.la_agg, "Long answer aggregation: max|exs|rrs|noisy-or")
        ->capture_default_str();
    cmd->add_option("--sa-norm", fusion.sa_norm,
                    "Short answer normalization: none|logreg (noisy-or defaults to logreg)");
    cmd->add_option("--la-norm", fusion.la_norm, "Long answer normalization: none|logreg");
    cmd->add_option("--beta", fusion.beta, "Exponential sum decay")->capture_default_str();
    cmd->add_flag("--restrict-short-to-long", fusion.restrict_short_to_long,
                  "Short answers must be contained in the predicted long span");
    cmd->add_option("--top-k", fusion.top_k, "Candidates kept per (example, type) at ingest")
        ->capture_default_str();
}

void add_run_flags(CLI::App* cmd, RunFlags& run) {
    cmd->add_option("--jobs", run.jobs, "Worker threads (0 = hardware, SPANFUSE_JOBS overrides)")
        ->capture_default_str();
    cmd->add_option("--seed", run.seed, "Seed for cross-validation folds and synthesis")
        ->capture_default_str();
}

// --- option -> domain conversions -------------------------------------------

fuse::TypeFusion make_type_fusion(const std::string& agg_name, const std::string& norm_name,
                                  double beta) {
    fuse::TypeFusion type_fusion;
    type_fusion.aggregation.kind = agg::aggregator_from_string(agg_name);
    type_fusion.aggregation.beta = beta;
    std::string norm = norm_name;
    if (norm.empty()) {
        norm = type_fusion.aggregation.kind == agg::Aggregator::kNoisyOr ? "logreg" : "none";
    }
    type_fusion.normalization = fuse::normalization_from_string(norm);
    return type_fusion;
}

fuse::FusionConfig make_fusion_config(const FusionFlags& flags) {
    fuse::FusionConfig config;
    config.short_answer = make_type_fusion(flags.sa_agg, flags.sa_norm, flags.beta);
    config.long_answer = make_type_fusion(flags.la_agg, flags.la_norm, flags.beta);
    config.restrict_short_to_long = flags.restrict_short_to_long;
    config.validate();
    return config;
}

metrics::MatchConfig make_match_config(const MetricFlags& flags) {
    if (flags.answerable_threshold < 1) throw ConfigError("--answerable-threshold must be >= 1");
    return metrics::MatchConfig{flags.answerable_threshold, flags.relaxed_short};
}

std::vector<fs::path> gold_paths(const IoFlags& io) {
    return {io.gold.begin(), io.gold.end()};
}

std::vector<ingest::SystemPredictions> load_systems(const IoFlags& io, int top_k, unsigned jobs,
                                                    bool truncate = true) {
    std::vector<fs::path> paths(io.preds.begin(), io.preds.end());
    if (!io.preds_dir.empty()) {
        std::vector<fs::path> scanned;
        for (const auto& entry : fs::directory_iterator(io.preds_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
                scanned.push_back(entry.path());
            }
        }
        std::sort(scanned.begin(), scanned.end());
        paths.insert(paths.end(), scanned.begin(), scanned.end());
    }
    if (paths.empty()) throw ConfigError("no prediction files given (--preds or --preds-dir)");

    std::vector<ingest::SystemPredictions> systems(paths.size());
    parallel_for(paths.size(), jobs, [&](std::size_t i) {
        ingest::SystemPredictions parsed = ingest::parse_predictions(paths[i]);
        systems[i] = truncate ? ingest::truncate_top_k(std::move(parsed), top_k)
                              : std::move(parsed);
    });
    for (std::size_t i = 0; i < systems.size(); ++i) {
        if (systems[i].examples.empty()) {
            std::cerr << "warning: prediction file " << paths[i].string() << " is empty\n";
        }
    }
    return systems;
}

ingest::Split resolve_split(const ingest::GoldSet& gold, const SplitFlags& flags) {
    if (flags.train_files > 0) {
        return ingest::split_by_files(gold, static_cast<std::size_t>(flags.train_files));
    }
    return ingest::split_by_fraction(gold, flags.train_fraction);
}

const std::vector<ExampleId>& split_ids(const ingest::GoldSet& gold, const ingest::Split& split,
                                        const std::string& name) {
    if (name == "train") return split.train_ids;
    if (name == "test") return split.test_ids;
    if (name == "all") return gold.example_order;
    throw ConfigError("--eval-split must be train, test or all");
}

std::string calibrator_filename(const SystemId& system, AnswerType type) {
    return "calibrator_" + system + "_" + to_string(type) + ".json";
}

calibrate::CalibratorStore load_calibrators(const std::string& dir) {
    calibrate::CalibratorStore store;
    if (dir.empty()) return store;
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind("calibrator_", 0) == 0 &&
            entry.path().extension() == ".json") {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    for (const fs::path& path : paths) {
        std::ifstream in(path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        store.insert(calibrate::Calibrator::from_json(buffer.str()));
    }
    return store;
}

// Fit any (system, type) calibrator required by the fusion configs that is
// not already loaded. Fits are seeded per (system, type) and parallel.
void fit_missing_calibrators(calibrate::CalibratorStore& store,
                             const std::vector<ingest::SystemPredictions>& systems,
                             const ingest::GoldSet& gold, const ingest::Split& split,
                             const metrics::MatchConfig& match,
                             const std::vector<fuse::FusionConfig>& configs,
                             const CalibFlags& calib, const RunFlags& run, unsigned jobs) {
    std::array<bool, 2> needed{false, false};
    for (const fuse::FusionConfig& config : configs) {
        for (AnswerType type : kAnswerTypes) {
            if (config.of(type).normalization == fuse::Normalization::kLogreg) {
                needed[type_index(type)] = true;
            }
        }
    }
    std::vector<std::pair<std::size_t, AnswerType>> missing;
    for (std::size_t m = 0; m < systems.size(); ++m) {
        for (AnswerType type : kAnswerTypes) {
            if (needed[type_index(type)] &&
                store.find(systems[m].system_id, type) == nullptr) {
                missing.emplace_back(m, type);
            }
        }
    }
    if (missing.empty()) return;
    if (split.train_ids.empty()) {
        throw ConfigError("logreg normalization needs calibrators: give --calibrator-dir or a "
                          "non-empty train split to fit on");
    }

    calibrate::LogregOptions options;
    if (!calib.c_grid.empty()) options.c_grid = calib.c_grid;
    options.folds = calib.folds;

    std::vector<calibrate::Calibrator> fitted(missing.size());
    parallel_for(missing.size(), jobs, [&](std::size_t i) {
        const auto& [m, type] = missing[i];
        const auto rows = calibrate::build_calibration_dataset(systems[m], gold, split.train_ids,
                                                               type, match);
        calibrate::LogregOptions local = options;
        local.seed = mix_seed(run.seed, m * 2 + type_index(type));
        fitted[i] = calibrate::fit_logreg(rows, local, systems[m].system_id, type);
    });
    for (calibrate::Calibrator& calibrator : fitted) store.insert(std::move(calibrator));
}

// --- output helpers ----------------------------------------------------------

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (text.empty() || text.back() != '\n') out << "\n";
}

void write_run_config(const fs::path& out_dir, const std::string& command, json options) {
    // Drop empty strings and empty arrays; scalars (including false/0) stay.
    json cleaned = json::object();
    for (const auto& [key, value] : options.items()) {
        if (value.is_string() && value.get<std::string>().empty()) continue;
        if (value.is_array() && value.empty()) continue;
        cleaned[key] = value;
    }
    const json config{{"command", command}, {"options", cleaned}};
    write_text(out_dir / "run_config.json", config.dump(2));
}

void ensure_out_dir(const IoFlags& io) {
    if (!io.out_dir.empty()) fs::create_directories(io.out_dir);
}

json io_options(const IoFlags& io) {
    return json{{"preds", io.preds},
                {"preds-dir", io.preds_dir},
                {"gold", io.gold},
                {"out", io.out_dir}};
}

void merge_options(json& options, const json& extra) {
    for (const auto& [key, value] : extra.items()) options[key] = value;
}

json split_options(const SplitFlags& split) {
    return json{{"train-files", split.train_files}, {"train-fraction", split.train_fraction}};
}

json metric_options(const MetricFlags& metric) {
    return json{{"answerable-threshold", metric.answerable_threshold},
                {"relaxed-short", metric.relaxed_short}};
}

json fusion_options(const FusionFlags& fusion) {
    return json{{"sa-agg", fusion.sa_agg},   {"la-agg", fusion.la_agg},
                {"sa-norm", fusion.sa_norm}, {"la-norm", fusion.la_norm},
                {"beta", fusion.beta},       {"restrict-short-to-long", fusion.restrict_short_to_long},
                {"top-k", fusion.top_k}};
}

json run_options(const RunFlags& run) {
    return json{{"jobs", run.jobs}, {"seed", run.seed}};
}

// --- subcommands -------------------------------------------------------------

struct ValidateArgs {
    IoFlags io;
};

int cmd_validate(const ValidateArgs& args) {
    const unsigned jobs = resolve_jobs(0);
    const ingest::GoldSet gold = ingest::parse_gold(gold_paths(args.io));
    const auto systems = load_systems(args.io, ingest::kDefaultTopK, jobs, /*truncate=*/false);
    const ingest::ValidationReport report = ingest::validate_ensemble_inputs(systems, gold);
    for (const std::string& warning : report.warnings) {
        std::cout << "warning: " << warning << "\n";
    }
    for (const std::string& error : report.errors) {
        std::cout << "error: " << error << "\n";
    }
    std::cout << systems.size() << " system(s), " << gold.example_order.size()
              << " gold example(s): " << (report.ok() ? "OK" : "FAILED") << "\n";
    return report.ok() ? 0 : 1;
}

struct CalibrateArgs {
    IoFlags io;
    SplitFlags split;
    MetricFlags metric;
    CalibFlags calib;
    RunFlags run;
    int top_k = ingest::kDefaultTopK;
};

int cmd_calibrate(const CalibrateArgs& args) {
    const unsigned jobs = resolve_jobs(args.run.jobs);
    const ingest::GoldSet gold = ingest::parse_gold(gold_paths(args.io));
    const auto systems = load_systems(args.io, args.top_k, jobs);
    const ingest::Split split = resolve_split(gold, args.split);
    const metrics::MatchConfig match = make_match_config(args.metric);

    calibrate::LogregOptions options;
    if (!args.calib.c_grid.empty()) options.c_grid = args.calib.c_grid;
    options.folds = args.calib.folds;

    ensure_out_dir(args.io);
    std::vector<calibrate::Calibrator> fitted(systems.size() * 2);
    parallel_for(fitted.size(), jobs, [&](std::size_t i) {
        const std::size_t m = i / 2;
        const AnswerType type = i % 2 == 0 ? AnswerType::kLong : AnswerType::kShort;
        const auto rows =
            calibrate::build_calibration_dataset(systems[m], gold, split.train_ids, type, match);
        calibrate::LogregOptions local = options;
        local.seed = mix_seed(args.run.seed, m * 2 + type_index(type));
        fitted[i] = calibrate::fit_logreg(rows, local, systems[m].system_id, type);
    });

    std::printf("%-12s %-6s %10s %10s %10s\n", "system", "type", "chosen_c", "w", "b");
    for (const calibrate::Calibrator& cal : fitted) {
        write_text(fs::path(args.io.out_dir) / calibrator_filename(cal.system_id, cal.answer_type),
                   cal.to_json());
        std::printf("%-12s %-6s %10.4g %10.4f %10.4f\n", cal.system_id.c_str(),
                    to_string(cal.answer_type), cal.chosen_c, cal.weight, cal.bias);
        for (const auto& [c, ll] : cal.cv_log) {
            std::printf("    c=%-10.4g mean held-out log-likelihood=%.6f\n", c, ll);
        }
    }

    json options_json = io_options(args.io);
    merge_options(options_json, split_options(args.split));
    merge_options(options_json, metric_options(args.metric));
    merge_options(options_json, run_options(args.run));
    merge_options(options_json, json{{"c-grid", args.calib.c_grid},
                                     {"folds", args.calib.folds},
                                     {"top-k", args.top_k}});
    write_run_config(args.io.out_dir, "calibrate", std::move(options_json));
    return 0;
}

struct FuseArgs {
    IoFlags io;
    SplitFlags split;
    MetricFlags metric;
    FusionFlags fusion;
    CalibFlags calib;
    RunFlags run;
    std::string eval_split = "all";
};

int cmd_fuse(const FuseArgs& args) {
    const unsigned jobs = resolve_jobs(args.run.jobs);
    const ingest::GoldSet gold = ingest::parse_gold(gold_paths(args.io));
    const auto systems = load_systems(args.io, args.fusion.top_k, jobs);
    const fuse::FusionConfig fusion = make_fusion_config(args.fusion);
    const metrics::MatchConfig match = make_match_config(args.metric);

    search::CandidatePool pool;
    pool.systems = systems;
    pool.validate(gold);
    for (const std::string& warning :
         ingest::validate_ensemble_inputs(pool.systems, gold).warnings) {
        std::cerr << "warning: " << warning << "\n";
    }

    const ingest::Split split = resolve_split(gold, args.split);
    calibrate::CalibratorStore calibrators = load_calibrators(args.calib.calibrator_dir);
    fit_missing_calibrators(calibrators, pool.systems, gold, split, match, {fusion}, args.calib,
                            args.run, jobs);

    const search::ScoreCache cache(pool, fusion, &calibrators, gold, jobs);
    std::vector<std::size_t> all_systems(pool.systems.size());
    for (std::size_t i = 0; i < all_systems.size(); ++i) all_systems[i] = i;
    const auto predictions = search::predict_subset(cache, all_systems, gold.example_order);

    const auto& ids = split_ids(gold, split, args.eval_split);
    const metrics::EvalReport report =
        metrics::evaluate(predictions, gold, ids, match, args.eval_split);
    std::cout << metrics::report_to_display(report);

    ensure_out_dir(args.io);
    if (!args.io.out_dir.empty()) {
        const fs::path out(args.io.out_dir);
        fuse::write_prediction_file(out / "predictions.jsonl", predictions);
        write_text(out / "report.json", metrics::report_to_json(report));

        json options_json = io_options(args.io);
        merge_options(options_json, split_options(args.split));
        merge_options(options_json, metric_options(args.metric));
        merge_options(options_json, fusion_options(args.fusion));
        merge_options(options_json, run_options(args.run));
        merge_options(options_json, json{{"eval-split", args.eval_split},
                                         {"calibrator-dir", args.calib.calibrator_dir},
                                         {"c-grid", args.calib.c_grid},
                                         {"folds", args.calib.folds}});
        write_run_config(out, "fuse", std::move(options_json));
    }
    return 0;
}

struct SearchArgs {
    IoFlags io;
    SplitFlags split;
    MetricFlags metric;
    FusionFlags fusion;
    CalibFlags calib;
    RunFlags run;
    std::string strategy = "greedy";
    int k = 4;
    int k_short = 0;
    int pool_top_n = 0;
    std::string select_agg;
    std::string select_norm;
    std::string predict_agg;
    std::string predict_norm;
    std::uint64_t max_evals = 1000000;
    bool force = false;
    // set while wiring flags, to honor per-type overrides
    bool sa_agg_given = false;
    bool la_agg_given = false;
    bool sa_norm_given = false;
    bool la_norm_given = false;
};

int cmd_search(const SearchArgs& args) {
    const unsigned jobs = resolve_jobs(args.run.jobs);
    const ingest::GoldSet gold = ingest::parse_gold(gold_paths(args.io));
    const auto systems = load_systems(args.io, args.fusion.top_k, jobs);
    const metrics::MatchConfig match = make_match_config(args.metric);

    // --predict-agg/--predict-norm set both answer types; explicit per-type
    // flags win.
    FusionFlags final_fusion = args.fusion;
    if (!args.predict_agg.empty()) {
        if (!args.sa_agg_given) final_fusion.sa_agg = args.predict_agg;
        if (!args.la_agg_given) final_fusion.la_agg = args.predict_agg;
    }
    if (!args.predict_norm.empty()) {
        if (!args.sa_norm_given) final_fusion.sa_norm = args.predict_norm;
        if (!args.la_norm_given) final_fusion.la_norm = args.predict_norm;
    }

    search::SearchSpec spec;
    spec.strategy = search::strategy_from_string(args.strategy);
    spec.k = args.k;
    spec.k_short = args.k_short;
    spec.fusion = make_fusion_config(final_fusion);
    spec.match = match;
    spec.max_evaluations = args.max_evals;
    spec.force_budget = args.force;
    spec.jobs = jobs;
    if (args.pool_top_n > 0) spec.pool_top_n = args.pool_top_n;
    if (!args.select_agg.empty() || !args.select_norm.empty()) {
        FusionFlags select = final_fusion;
        if (!args.select_agg.empty()) {
            select.sa_agg = args.select_agg;
            select.la_agg = args.select_agg;
            select.sa_norm = args.select_norm;
            select.la_norm = args.select_norm;
        } else {
            select.sa_norm = args.select_norm;
            select.la_norm = args.select_norm;
        }
        spec.selection_fusion = make_fusion_config(select);
    }

    search::CandidatePool pool;
    pool.systems = systems;
    const ingest::Split split = resolve_split(gold, args.split);

    calibrate::CalibratorStore calibrators = load_calibrators(args.calib.calibrator_dir);
    std::vector<fuse::FusionConfig> configs{spec.fusion};
    if (spec.selection_fusion) configs.push_back(*spec.selection_fusion);
    fit_missing_calibrators(calibrators, pool.systems, gold, split, match, configs, args.calib,
                            args.run, jobs);

    const search::SearchOutcome outcome =
        search::run_search(pool, spec, gold, split, &calibrators);

    std::cout << "S' = {";
    for (std::size_t i = 0; i < outcome.s_prime.size(); ++i) {
        std::cout << (i ? ", " : "") << outcome.s_prime[i];
    }
    std::cout << "}\nL' = {";
    for (std::size_t i = 0; i < outcome.l_prime.size(); ++i) {
        std::cout << (i ? ", " : "") << outcome.l_prime[i];
    }
    std::cout << "}\n" << metrics::report_to_display(outcome.train_report)
              << metrics::report_to_display(outcome.test_report);
    std::cout << outcome.evaluations << " ensemble evaluation(s)\n";

    ensure_out_dir(args.io);
    if (!args.io.out_dir.empty()) {
        const fs::path out(args.io.out_dir);
        write_text(out / "search_result.json", outcome.to_json());
        fuse::write_prediction_file(out / "predictions.jsonl", outcome.predictions);
        write_text(out / "report_train.json", metrics::report_to_json(outcome.train_report));
        write_text(out / "report_test.json", metrics::report_to_json(outcome.test_report));

        json options_json = io_options(args.io);
        merge_options(options_json, split_options(args.split));
        merge_options(options_json, metric_options(args.metric));
        merge_options(options_json, fusion_options(args.fusion));
        merge_options(options_json, run_options(args.run));
        merge_options(options_json,
                      json{{"strategy", args.strategy},
                           {"k", args.k},
                           {"ks", args.k_short},
                           {"pool-top-n", args.pool_top_n},
                           {"select-agg", args.select_agg},
                           {"select-norm", args.select_norm},
                           {"predict-agg", args.predict_agg},
                           {"predict-norm", args.predict_norm},
                           {"max-evals", args.max_evals},
                           {"force", args.force},
                           {"calibrator-dir", args.calib.calibrator_dir},
                           {"c-grid", args.calib.c_grid},
                           {"folds", args.calib.folds}});
        write_run_config(out, "search", std::move(options_json));
    }
    return 0;
}

struct EvalArgs {
    IoFlags io;
    SplitFlags split;
    MetricFlags metric;
    std::string pred_file;
    std::string eval_split = "all";
};

int cmd_eval(const EvalArgs& args) {
    const ingest::GoldSet gold = ingest::parse_gold(gold_paths(args.io));
    const auto predictions = fuse::parse_prediction_file(args.pred_file);
    const metrics::MatchConfig match = make_match_config(args.metric);
    const ingest::Split split = resolve_split(gold, args.split);
    const auto& ids = split_ids(gold, split, args.eval_split);
    const metrics::EvalReport report =
        metrics::evaluate(predictions, gold, ids, match, args.eval_split);
    std::cout << metrics::report_to_display(report);

    ensure_out_dir(args.io);
    if (!args.io.out_dir.empty()) {
        const fs::path out(args.io.out_dir);
        write_text(out / "report.json", metrics::report_to_json(report));
        json options_json{{"gold", args.io.gold},
                          {"out", args.io.out_dir},
                          {"pred-file", args.pred_file},
                          {"eval-split", args.eval_split}};
        merge_options(options_json, split_options(args.split));
        merge_options(options_json, metric_options(args.metric));
        write_run_config(out, "eval", std::move(options_json));
    }
    return 0;
}

struct SynthArgs {
    std::string out_dir;
    std::string spec_json;
    std::size_t examples = 200;
    std::size_t systems = 6;
    std::vector<double> accuracies;
    double acc_min = 0.55;
    double acc_max = 0.8;
    double noise = 0.25;
    double rho = 0.0;
    std::size_t correlated = 0;
    double answerable = 0.7;
    std::size_t cands = 10;
    RunFlags run;
};

int cmd_synth(const SynthArgs& args) {
    synth::SynthSpec spec;
    if (!args.spec_json.empty()) {
        std::ifstream in(args.spec_json);
        if (!in) throw ConfigError("cannot open synth spec: " + args.spec_json);
        std::stringstream buffer;
        buffer << in.rdbuf();
        spec = synth::SynthSpec::from_json(buffer.str());
    } else {
        spec.n_examples = args.examples;
        spec.n_systems = args.systems;
        spec.system_accuracies = args.accuracies;
        spec.accuracy_min = args.acc_min;
        spec.accuracy_max = args.acc_max;
        spec.score_noise = args.noise;
        spec.correlation = args.rho;
        spec.correlated_systems = args.correlated;
        spec.answerable_fraction = args.answerable;
        spec.candidates_per_example = args.cands;
        spec.seed = args.run.seed;
    }
    spec.validate();

    const synth::SynthCorpus corpus = synth::generate(spec);
    const fs::path out(args.out_dir);
    fs::create_directories(out / "systems");

    json manifest;
    manifest["spec"] = json::parse(spec.to_json());
    manifest["gold"] = "gold.jsonl";
    ingest::write_gold(out / "gold.jsonl", corpus.gold);
    json files = json::array();
    for (const auto& system : corpus.systems) {
        const std::string name = "systems/" + system.system_id + ".jsonl";
        ingest::write_predictions(out / name, system);
        files.push_back(name);
    }
    manifest["predictions"] = files;
    write_text(out / "manifest.json", manifest.dump(2));

    std::cout << "wrote gold.jsonl and " << corpus.systems.size()
              << " prediction file(s) under " << args.out_dir << "\n";

    json options_json{{"out", args.out_dir},
                      {"spec-json", args.spec_json},
                      {"examples", args.examples},
                      {"systems", args.systems},
                      {"accuracies", args.accuracies},
                      {"acc-min", args.acc_min},
                      {"acc-max", args.acc_max},
                      {"noise", args.noise},
                      {"rho", args.rho},
                      {"correlated", args.correlated},
                      {"answerable", args.answerable},
                      {"cands", args.cands}};
    merge_options(options_json, run_options(args.run));
    write_run_config(out, "synth", std::move(options_json));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"span-level ensembling for question answering prediction files"};
    app.config_formatter(std::make_shared<JsonOrTomlConfig>());
    app.set_config("--config", "", "Options from a JSON run config or a TOML file");
    app.fallthrough();
    app.require_subcommand(1);

    ValidateArgs validate_args;
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "Parse inputs and check cross-system consistency");
    validate_cmd->configurable();
    add_io_flags(validate_cmd, validate_args.io, false);

    CalibrateArgs calibrate_args;
    CLI::App* calibrate_cmd = app.add_subcommand(
        "calibrate", "Fit per-system logistic score calibrators on the dev-train split");
    calibrate_cmd->configurable();
    add_io_flags(calibrate_cmd, calibrate_args.io, true);
    add_split_flags(calibrate_cmd, calibrate_args.split);
    add_metric_flags(calibrate_cmd, calibrate_args.metric);
    add_run_flags(calibrate_cmd, calibrate_args.run);
    calibrate_cmd->add_option("--c-grid", calibrate_args.calib.c_grid,
                              "Inverse L2 strengths to cross-validate")
        ->delimiter(',');
    calibrate_cmd->add_option("--folds", calibrate_args.calib.folds, "Cross-validation folds")
        ->capture_default_str();
    calibrate_cmd->add_option("--top-k", calibrate_args.top_k,
                              "Candidates kept per (example, type) at ingest")
        ->capture_default_str();

    FuseArgs fuse_args;
    CLI::App* fuse_cmd = app.add_subcommand(
        "fuse", "Fuse an explicit system list into predictions and evaluate");
    fuse_cmd->configurable();
    add_io_flags(fuse_cmd, fuse_args.io, false);
    add_split_flags(fuse_cmd, fuse_args.split);
    add_metric_flags(fuse_cmd, fuse_args.metric);
    add_fusion_flags(fuse_cmd, fuse_args.fusion);
    add_run_flags(fuse_cmd, fuse_args.run);
    fuse_cmd->add_option("--calibrator-dir", fuse_args.calib.calibrator_dir,
                         "Directory of calibrator_*.json files");
    fuse_cmd->add_option("--c-grid", fuse_args.calib.c_grid,
                         "Inverse L2 strengths when fitting calibrators in-process")
        ->delimiter(',');
    fuse_cmd->add_option("--folds", fuse_args.calib.folds, "Cross-validation folds")
        ->capture_default_str();
    fuse_cmd->add_option("--eval-split", fuse_args.eval_split, "Report split: train|test|all")
        ->capture_default_str();

    SearchArgs search_args;
    CLI::App* search_cmd =
        app.add_subcommand("search", "Select an ensemble from a candidate pool");
    search_cmd->configurable();
    add_io_flags(search_cmd, search_args.io, false);
    add_split_flags(search_cmd, search_args.split);
    add_metric_flags(search_cmd, search_args.metric);
    add_fusion_flags(search_cmd, search_args.fusion);
    add_run_flags(search_cmd, search_args.run);
    search_cmd->add_option("--strategy", search_args.strategy,
                           "exhaustive | greedy | simple-greedy")
        ->capture_default_str();
    search_cmd->add_option("--k", search_args.k, "Ensemble size")->capture_default_str();
    search_cmd->add_option("--ks", search_args.k_short,
                           "Greedy steps optimizing short answers (k_L = k - k_S)")
        ->capture_default_str();
    search_cmd->add_option("--pool-top-n", search_args.pool_top_n,
                           "Truncate the pool to the top n by single-model train SA+LA F1");
    search_cmd->add_option("--select-agg", search_args.select_agg,
                           "Model-selection aggregation (both answer types)");
    search_cmd->add_option("--select-norm", search_args.select_norm,
                           "Model-selection normalization (both answer types)");
    search_cmd->add_option("--predict-agg", search_args.predict_agg,
                           "Prediction aggregation for both answer types (per-type flags win)");
    search_cmd->add_option("--predict-norm", search_args.predict_norm,
                           "Prediction normalization for both answer types (per-type flags win)");
    search_cmd->add_option("--max-evals", search_args.max_evals,
                           "Exhaustive evaluation budget")
        ->capture_default_str();
    search_cmd->add_flag("--force", search_args.force, "Ignore the evaluation budget");
    search_cmd->add_option("--calibrator-dir", search_args.calib.calibrator_dir,
                           "Directory of calibrator_*.json files");
    search_cmd->add_option("--c-grid", search_args.calib.c_grid,
                           "Inverse L2 strengths when fitting calibrators in-process")
        ->delimiter(',');
    search_cmd->add_option("--folds", search_args.calib.folds, "Cross-validation folds")
        ->capture_default_str();

    EvalArgs eval_args;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "Evaluate a fused prediction file against gold");
    eval_cmd->configurable();
    eval_cmd->add_option("--pred-file", eval_args.pred_file, "Fused predictions JSONL")
        ->required();
    eval_cmd->add_option("--gold", eval_args.io.gold, "Gold JSONL file(s)")->required();
    eval_cmd->add_option("-o,--out", eval_args.io.out_dir, "Output directory");
    add_split_flags(eval_cmd, eval_args.split);
    add_metric_flags(eval_cmd, eval_args.metric);
    eval_cmd->add_option("--eval-split", eval_args.eval_split, "Report split: train|test|all")
        ->capture_default_str();

    SynthArgs synth_args;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "Generate a synthetic gold set and prediction pool");
    synth_cmd->configurable();
    synth_cmd->add_option("-o,--out", synth_args.out_dir, "Output directory")->required();
    synth_cmd->add_option("--spec-json", synth_args.spec_json,
                          "Full corpus spec as a JSON file (overrides the knob flags)");
    synth_cmd->add_option("--examples", synth_args.examples, "Example count")
        ->capture_default_str();
    synth_cmd->add_option("--systems", synth_args.systems, "System count")
        ->capture_default_str();
    synth_cmd->add_option("--accuracies", synth_args.accuracies,
                          "Explicit per-system accuracies (comma separated)")
        ->delimiter(',');
    synth_cmd->add_option("--acc-min", synth_args.acc_min, "Accuracy range low end")
        ->capture_default_str();
    synth_cmd->add_option("--acc-max", synth_args.acc_max, "Accuracy range high end")
        ->capture_default_str();
    synth_cmd->add_option("--noise", synth_args.noise, "Score noise sigma")
        ->capture_default_str();
    synth_cmd->add_option("--rho", synth_args.rho, "Hit correlation inside the leading cluster")
        ->capture_default_str();
    synth_cmd->add_option("--correlated", synth_args.correlated,
                          "Cluster size sharing the correlation (0 = whole pool)")
        ->capture_default_str();
    synth_cmd->add_option("--answerable", synth_args.answerable, "Answerable fraction")
        ->capture_default_str();
    synth_cmd->add_option("--cands", synth_args.cands, "Candidates per (example, type), <= 20")
        ->capture_default_str();
    add_run_flags(synth_cmd, synth_args.run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    // Per-type flags only override --predict-agg/--predict-norm when passed.
    search_args.sa_agg_given = search_cmd->count("--sa-agg") > 0;
    search_args.la_agg_given = search_cmd->count("--la-agg") > 0;
    search_args.sa_norm_given = search_cmd->count("--sa-norm") > 0;
    search_args.la_norm_given = search_cmd->count("--la-norm") > 0;

    try {
        if (validate_cmd->parsed()) return cmd_validate(validate_args);
        if (calibrate_cmd->parsed()) return cmd_calibrate(calibrate_args);
        if (fuse_cmd->parsed()) return cmd_fuse(fuse_args);
        if (search_cmd->parsed()) return cmd_search(search_args);
        if (eval_cmd->parsed()) return cmd_eval(eval_args);
        if (synth_cmd->parsed()) return cmd_synth(synth_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
