#include "spanfuse/calibrate.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "spanfuse/errors.hpp"
#include "spanfuse/rng.hpp"

namespace spanfuse::calibrate {

using nlohmann::json;

double sigmoid(double z) {
    double p;
    if (z >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        p = e / (1.0 + e);
    }
    // Keep the output inside the open interval so downstream probability
    // semantics (noisy-or) never see an exact 0 or 1 from saturation.
    const double lo = 1e-300;
    const double hi = 1.0 - 1e-16;
    return std::min(std::max(p, lo), hi);
}

double Calibrator::apply(double score) const { return sigmoid(weight * score + bias); }

std::string Calibrator::to_json(int indent) const {
    json cv = json::array();
    for (const auto& [c, ll] : cv_log) cv.push_back(json::array({c, ll}));
    const json obj{{"system_id", system_id}, {"answer_type", to_string(answer_type)},
                   {"w", weight},            {"b", bias},
                   {"chosen_c", chosen_c},   {"cv_log", cv}};
    return obj.dump(indent);
}

Calibrator Calibrator::from_json(const std::string& text) {
    json obj = json::parse(text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) throw ParseError("malformed calibrator JSON");
    Calibrator cal;
    try {
        cal.system_id = obj.at("system_id").get<std::string>();
        cal.answer_type = answer_type_from_string(obj.at("answer_type").get<std::string>());
        cal.weight = obj.at("w").get<double>();
        cal.bias = obj.at("b").get<double>();
        cal.chosen_c = obj.at("chosen_c").get<double>();
        for (const json& row : obj.at("cv_log")) {
            cal.cv_log.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed calibrator JSON: ") + e.what());
    }
    if (!std::isfinite(cal.weight) || !std::isfinite(cal.bias)) {
        throw ValidationError("calibrator weight/bias must be finite");
    }
    return cal;
}

CalibrationDataset build_calibration_dataset(const ingest::SystemPredictions& preds,
                                             const ingest::GoldSet& gold,
                                             const std::vector<ExampleId>& train_ids,
                                             AnswerType type, const metrics::MatchConfig& match) {
    if (train_ids.empty()) throw ValidationError("empty train split for calibration");
    CalibrationDataset rows;
    rows.reserve(train_ids.size());
    for (const ExampleId& id : train_ids) {
        const auto& annotations = gold.annotations(id);
        Candidate top{Span::null(), 0.0};
        const auto it = preds.examples.find(id);
        if (it != preds.examples.end()) {
            if (const Candidate* best = best_candidate(it->second.of(type))) top = *best;
        }
        bool label;
        if (top.span.is_null()) {
            label = !metrics::is_answerable(annotations, type, match.answerable_threshold);
        } else {
            label = metrics::match_span(top.span, annotations, type, match);
        }
        rows.push_back(CalibrationRow{top.score, label});
    }
    return rows;
}

std::vector<double> default_c_grid() {
    std::vector<double> grid;
    for (int e = -4; e <= 4; ++e) grid.push_back(std::pow(10.0, e));
    return grid;
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

struct FitResult {
    double w = 0.0;
    double b = 0.0;
};

// Mean negative log-likelihood plus the ridge term on w.
double objective(const CalibrationDataset& rows, const std::vector<std::size_t>& index, double w,
                 double b, double c) {
    double nll = 0.0;
    for (const std::size_t i : index) {
        const double z = w * rows[i].score + b;
        nll += rows[i].label ? softplus(-z) : softplus(z);
    }
    return nll / static_cast<double>(index.size()) + w * w / (2.0 * c);
}

// Damped (backtracking) Newton minimization of the objective above.
FitResult fit_newton(const CalibrationDataset& rows, const std::vector<std::size_t>& index,
                     double c, double tolerance, int max_iterations) {
    const double n = static_cast<double>(index.size());
    double w = 0.0;
    double b = 0.0;
    double current = objective(rows, index, w, b, c);

    for (int iter = 0; iter < max_iterations; ++iter) {
        double gw = 0.0;
        double gb = 0.0;
        double hww = 0.0;
        double hwb = 0.0;
        double hbb = 0.0;
        for (const std::size_t i : index) {
            const double s = rows[i].score;
            const double p = sigmoid(w * s + b);
            const double y = rows[i].label ? 1.0 : 0.0;
            const double residual = p - y;
            const double curvature = p * (1.0 - p);
            gw += residual * s;
            gb += residual;
            hww += curvature * s * s;
            hwb += curvature * s;
            hbb += curvature;
        }
        gw = gw / n + w / c;
        gb = gb / n;
        if (std::sqrt(gw * gw + gb * gb) <= tolerance) break;

        hww = hww / n + 1.0 / c + 1e-12;
        hwb = hwb / n;
        hbb = hbb / n + 1e-12;
        const double det = hww * hbb - hwb * hwb;
        double dw;
        double db;
        if (det > 1e-300) {
            dw = (hbb * gw - hwb * gb) / det;
            db = (hww * gb - hwb * gw) / det;
        } else {
            dw = gw;
            db = gb;
        }

        const double slope = gw * dw + gb * db;
        double step = 1.0;
        bool moved = false;
        for (int halving = 0; halving < 60; ++halving) {
            const double trial =
                objective(rows, index, w - step * dw, b - step * db, c);
            if (trial <= current - 1e-4 * step * slope) {
                w -= step * dw;
                b -= step * db;
                current = trial;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return FitResult{w, b};
}

double mean_log_likelihood(const CalibrationDataset& rows, const std::vector<std::size_t>& index,
                           double w, double b) {
    double ll = 0.0;
    for (const std::size_t i : index) {
        const double z = w * rows[i].score + b;
        ll -= rows[i].label ? softplus(-z) : softplus(z);
    }
    return ll / static_cast<double>(index.size());
}

bool has_both_classes(const CalibrationDataset& rows, const std::vector<std::size_t>& index) {
    bool pos = false;
    bool neg = false;
    for (const std::size_t i : index) {
        (rows[i].label ? pos : neg) = true;
        if (pos && neg) return true;
    }
    return false;
}

// Stratified fold assignment: shuffle each class separately (seeded), then
// deal round-robin, so label proportions are preserved per fold within
// rounding.
std::vector<int> assign_folds(const CalibrationDataset& rows, int folds, std::uint64_t seed) {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        (rows[i].label ? positives : negatives).push_back(i);
    }
    Rng pos_rng(mix_seed(seed, 0x706f73));
    Rng neg_rng(mix_seed(seed, 0x6e6567));
    pos_rng.shuffle(positives);
    neg_rng.shuffle(negatives);

    std::vector<int> fold_of(rows.size(), 0);
    for (std::size_t i = 0; i < positives.size(); ++i) {
        fold_of[positives[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        fold_of[negatives[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
    return fold_of;
}

}  // namespace

Calibrator fit_logreg(const CalibrationDataset& data, const LogregOptions& options,
                      SystemId system_id, AnswerType type) {
    if (options.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (options.c_grid.empty()) throw ConfigError("empty regularization grid");
    for (const CalibrationRow& row : data) {
        if (!std::isfinite(row.score)) {
            throw ValidationError("non-finite calibration score for system '" + system_id + "'");
        }
    }

    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    if (!has_both_classes(data, all)) {
        throw ValidationError("calibration data for system '" + system_id + "' (" +
                              to_string(type) +
                              ") has a single class; cannot fit a calibrator");
    }

    const std::vector<int> fold_of = assign_folds(data, options.folds, options.seed);

    // Folds whose training complement is single-class are skipped for every
    // c, so all grid points are compared on the same folds.
    std::vector<std::vector<std::size_t>> fold_train(options.folds);
    std::vector<std::vector<std::size_t>> fold_heldout(options.folds);
    std::vector<bool> usable(options.folds, false);
    for (int f = 0; f < options.folds; ++f) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            (fold_of[i] == f ? fold_heldout[f] : fold_train[f]).push_back(i);
        }
        usable[f] = !fold_heldout[f].empty() && has_both_classes(data, fold_train[f]);
    }
    if (std::none_of(usable.begin(), usable.end(), [](bool u) { return u; })) {
        throw ValidationError("no usable cross-validation folds for system '" + system_id + "'");
    }

    Calibrator calibrator;
    calibrator.system_id = std::move(system_id);
    calibrator.answer_type = type;

    double best_ll = 0.0;
    bool have_best = false;
    for (const double c : options.c_grid) {
        if (!(c > 0.0)) throw ConfigError("regularization strengths must be positive");
        double total_ll = 0.0;
        int evaluated = 0;
        for (int f = 0; f < options.folds; ++f) {
            if (!usable[f]) continue;
            const FitResult fit = fit_newton(data, fold_train[f], c, options.gradient_tolerance,
                                             options.max_iterations);
            total_ll += mean_log_likelihood(data, fold_heldout[f], fit.w, fit.b);
            ++evaluated;
        }
        const double mean_ll = total_ll / static_cast<double>(evaluated);
        calibrator.cv_log.emplace_back(c, mean_ll);
        if (!have_best || mean_ll > best_ll || (mean_ll == best_ll && c > calibrator.chosen_c)) {
            best_ll = mean_ll;
            calibrator.chosen_c = c;
            have_best = true;
        }
    }

    const FitResult final_fit = fit_newton(data, all, calibrator.chosen_c,
                                           options.gradient_tolerance, options.max_iterations);
    calibrator.weight = final_fit.w;
    calibrator.bias = final_fit.b;
    return calibrator;
}

void CalibratorStore::insert(Calibrator calibrator) {
    const auto key = std::make_pair(calibrator.system_id, calibrator.answer_type);
    calibrators_[key] = std::move(calibrator);
}

const Calibrator* CalibratorStore::find(const SystemId& system, AnswerType type) const {
    const auto it = calibrators_.find(std::make_pair(system, type));
    return it == calibrators_.end() ? nullptr : &it->second;
}

const Calibrator& CalibratorStore::require(const SystemId& system, AnswerType type) const {
    if (const Calibrator* cal = find(system, type)) return *cal;
    throw ConfigError("no calibrator fitted for system '" + system + "' (" + to_string(type) +
                      ")");
}

}  // namespace spanfuse::calibrate
