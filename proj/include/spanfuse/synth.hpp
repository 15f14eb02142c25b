#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spanfuse/calibrate.hpp"
#include "spanfuse/core.hpp"
#include "spanfuse/fuse.hpp"
#include "spanfuse/ingest.hpp"
#include "spanfuse/metrics.hpp"

namespace spanfuse::synth {

/// Synthetic corpus controls. Each system's chance of surfacing the gold
/// answer is its accuracy; the first `correlated_systems` systems share a
/// latent draw with weight `correlation`, so they make the same mistakes
/// (one strong correlated cluster plus independent diverse systems
/// reproduces the pool-size dynamics at desk scale). A value of 0 for
/// correlated_systems applies the correlation to the whole pool.
struct SynthSpec {
    std::size_t n_examples = 200;
    std::size_t n_systems = 6;
    /// Per-system accuracy. When empty, linearly spaced over
    /// [accuracy_min, accuracy_max].
    std::vector<double> system_accuracies;
    double accuracy_min = 0.55;
    double accuracy_max = 0.80;
    /// Gaussian noise added to every raw candidate score.
    double score_noise = 0.25;
    /// Inter-system correlation of hit/miss patterns, in [0, 1].
    double correlation = 0.0;
    std::size_t correlated_systems = 0;
    double answerable_fraction = 0.7;
    /// Candidates emitted per (example, answer type), at most 20.
    std::size_t candidates_per_example = 10;
    std::uint64_t seed = 1;

    void validate() const;

    std::string to_json(int indent = 2) const;
    static SynthSpec from_json(const std::string& text);
};

struct SynthCorpus {
    ingest::GoldSet gold;
    std::vector<ingest::SystemPredictions> systems;
};

/// Deterministic given the seed: same spec, same bytes after serialization.
SynthCorpus generate(const SynthSpec& spec);

/// Straight-line re-computation of calibrate -> group -> aggregate ->
/// zero-fill mean -> argmax -> null-join -> F1 for one ensemble. Shares only
/// the domain types with the main pipeline (no fuse/aggregate/metrics code),
/// so it can serve as an independent oracle in tests.
std::pair<double, double> oracle_eval_subset(
    const std::vector<const ingest::SystemPredictions*>& subset, const ingest::GoldSet& gold,
    const std::vector<ExampleId>& split_ids, const fuse::FusionConfig& fusion,
    const calibrate::CalibratorStore* calibrators, const metrics::MatchConfig& match);

struct OracleBest {
    std::vector<SystemId> short_best;
    double short_f1 = 0.0;
    std::vector<SystemId> long_best;
    double long_f1 = 0.0;
};

/// Enumerate every C(n, k) subset of the pool (n <= 12) and return the
/// argmax subsets for short and long answer F1, ties broken by the
/// lexicographically smallest sorted id set.
OracleBest oracle_exhaustive(const std::vector<ingest::SystemPredictions>& pool, int k,
                             const ingest::GoldSet& gold,
                             const std::vector<ExampleId>& split_ids,
                             const fuse::FusionConfig& fusion,
                             const calibrate::CalibratorStore* calibrators,
                             const metrics::MatchConfig& match);

}  // namespace spanfuse::synth
