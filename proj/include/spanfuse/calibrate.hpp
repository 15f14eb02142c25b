#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spanfuse/core.hpp"
#include "spanfuse/ingest.hpp"
#include "spanfuse/metrics.hpp"

namespace spanfuse::calibrate {

/// Monotone score -> probability map for one (system, answer type):
/// apply(s) = sigmoid(weight * s + bias). Fitted on dev-train top-1
/// correctness labels with an L2-regularized single-feature logistic
/// regression; chosen_c is the inverse regularization strength selected by
/// stratified cross-validation.
struct Calibrator {
    SystemId system_id;
    AnswerType answer_type = AnswerType::kLong;
    double weight = 0.0;
    double bias = 0.0;
    double chosen_c = 1.0;
    /// (c, mean held-out log-likelihood) per grid point, in grid order.
    std::vector<std::pair<double, double>> cv_log;

    double apply(double score) const;

    std::string to_json(int indent = 2) const;
    static Calibrator from_json(const std::string& text);
};

/// Numerically stable sigmoid, clamped into the open interval (0, 1).
double sigmoid(double z);

/// Identity normalization: scores are used as-is.
inline double normalize_none(double score) { return score; }

struct CalibrationRow {
    double score = 0.0;
    bool label = false;
};

/// One row per dev-train example: the system's top-1 score for the answer
/// type and whether that prediction counts as correct.
using CalibrationDataset = std::vector<CalibrationRow>;

/// Build the dataset from a system's (truncated) predictions. The top-1 is
/// chosen by ranks_before; a missing or empty example contributes the null
/// span at score zero. A non-null top-1 is labeled by the metric's match
/// rule; a null top-1 is labeled correct iff the example is unanswerable.
CalibrationDataset build_calibration_dataset(const ingest::SystemPredictions& preds,
                                             const ingest::GoldSet& gold,
                                             const std::vector<ExampleId>& train_ids,
                                             AnswerType type, const metrics::MatchConfig& match);

/// {1e-4, 1e-3, ..., 1e4}
std::vector<double> default_c_grid();

struct LogregOptions {
    std::vector<double> c_grid = default_c_grid();
    int folds = 5;
    std::uint64_t seed = 1;
    double gradient_tolerance = 1e-8;
    int max_iterations = 100;
};

/// Fit sigmoid(w * s + b) by damped Newton iteration on
///   mean NLL + (1 / (2c)) * w^2        (bias unpenalized)
/// selecting c from the grid by stratified k-fold cross-validated held-out
/// log-likelihood (ties go to the larger c), then refitting on all rows.
/// Fold assignment is seeded and deterministic. Single-class data is an
/// error.
Calibrator fit_logreg(const CalibrationDataset& data, const LogregOptions& options,
                      SystemId system_id, AnswerType type);

inline double apply_calibrator(const Calibrator& calibrator, double score) {
    return calibrator.apply(score);
}

/// Fitted calibrators keyed by (system, answer type).
class CalibratorStore {
public:
    void insert(Calibrator calibrator);
    /// nullptr when absent.
    const Calibrator* find(const SystemId& system, AnswerType type) const;
    /// Throws ConfigError when absent.
    const Calibrator& require(const SystemId& system, AnswerType type) const;
    bool empty() const { return calibrators_.empty(); }
    std::size_t size() const { return calibrators_.size(); }

    const std::map<std::pair<SystemId, AnswerType>, Calibrator>& all() const {
        return calibrators_;
    }

private:
    std::map<std::pair<SystemId, AnswerType>, Calibrator> calibrators_;
};

}  // namespace spanfuse::calibrate
