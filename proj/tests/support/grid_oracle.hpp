#pragma once

// Test-side oracles for the calibration fit: a brute-force grid minimizer of
// the same objective (mean NLL + w^2 / (2c)) over (w, b) in [-5, 5]^2, kept
// independent of the Newton implementation, plus the shared synthetic
// dataset generators the frozen expected values were computed from.

#include <cmath>
#include <cstddef>
#include <vector>

#include "spanfuse/calibrate.hpp"
#include "spanfuse/parallel.hpp"
#include "spanfuse/rng.hpp"

namespace spanfuse::testsupport {

struct GridFit {
    double w = 0.0;
    double b = 0.0;
    double objective = 0.0;
};

inline double grid_softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

inline double grid_objective(const calibrate::CalibrationDataset& rows, double w, double b,
                             double c) {
    double nll = 0.0;
    for (const calibrate::CalibrationRow& row : rows) {
        const double z = w * row.score + b;
        nll += row.label ? grid_softplus(-z) : grid_softplus(z);
    }
    return nll / static_cast<double>(rows.size()) + w * w / (2.0 * c);
}

/// Exhaustive scan; ties resolve to the smallest (w, b) in scan order.
inline GridFit grid_search_fit(const calibrate::CalibrationDataset& rows, double c,
                               double lo = -5.0, double hi = 5.0, double step = 0.01,
                               unsigned jobs = 1) {
    const auto steps = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    std::vector<GridFit> row_best(steps);
    parallel_for(steps, jobs, [&](std::size_t wi) {
        const double w = lo + static_cast<double>(wi) * step;
        GridFit best{w, lo, grid_objective(rows, w, lo, c)};
        for (std::size_t bi = 1; bi < steps; ++bi) {
            const double b = lo + static_cast<double>(bi) * step;
            const double value = grid_objective(rows, w, b, c);
            if (value < best.objective) best = GridFit{w, b, value};
        }
        row_best[wi] = best;
    });
    GridFit best = row_best[0];
    for (const GridFit& candidate : row_best) {
        if (candidate.objective < best.objective) best = candidate;
    }
    return best;
}

/// 200-point style dataset: scores uniform in [-3, 3], labels drawn from
/// sigmoid(w_true * s + b_true).
inline calibrate::CalibrationDataset make_sigmoid_dataset(std::uint64_t seed, std::size_t n,
                                                          double w_true, double b_true) {
    Rng rng(seed);
    calibrate::CalibrationDataset rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double score = -3.0 + 6.0 * rng.next_unit();
        const double p = 1.0 / (1.0 + std::exp(-(w_true * score + b_true)));
        rows.push_back({score, rng.next_unit() < p});
    }
    return rows;
}

/// Balanced labels independent of the scores.
inline calibrate::CalibrationDataset make_uninformative_dataset(std::uint64_t seed,
                                                                std::size_t n) {
    Rng rng(seed);
    calibrate::CalibrationDataset rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows.push_back({-2.0 + 4.0 * rng.next_unit(), (rng.next_u64() & 1) == 0});
    }
    return rows;
}

}  // namespace spanfuse::testsupport
