#include <doctest.h>

#include <cmath>
#include <vector>

#include "spanfuse/calibrate.hpp"
#include "spanfuse/errors.hpp"
#include "spanfuse/rng.hpp"
#include "support/grid_oracle.hpp"

using namespace spanfuse;
using namespace spanfuse::calibrate;
using spanfuse::testsupport::make_sigmoid_dataset;
using spanfuse::testsupport::make_uninformative_dataset;

TEST_CASE("apply_calibrator sigmoid identities") {
    Calibrator cal;
    cal.weight = 1.0;
    cal.bias = 0.0;
    CHECK(cal.apply(0.0) == 0.5);

    cal.weight = 2.0;
    cal.bias = -1.0;
    CHECK(cal.apply(0.5) == 0.5);

    cal.weight = 0.0;
    cal.bias = 0.0;
    CHECK(cal.apply(-17.3) == 0.5);
    CHECK(cal.apply(42.0) == 0.5);
}

TEST_CASE("normalize_none is the identity") {
    CHECK(normalize_none(3.7) == 3.7);
    CHECK(normalize_none(-1.2) == -1.2);
    CHECK(normalize_none(0.0) == 0.0);
}

TEST_CASE("calibrated output stays strictly inside (0, 1)") {
    Calibrator cal;
    cal.weight = 50.0;
    cal.bias = 0.0;
    for (const double s : {-1e6, -100.0, -1.0, 0.0, 1.0, 100.0, 1e6}) {
        const double p = cal.apply(s);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("perfectly separable symmetric data") {
    const CalibrationDataset rows{{-2.0, false}, {-1.0, false}, {1.0, true}, {2.0, true}};
    LogregOptions options;
    options.c_grid = {1e6};
    options.folds = 2;
    const Calibrator cal = fit_logreg(rows, options, "sys", AnswerType::kLong);
    CHECK(cal.weight > 0.0);
    CHECK(std::abs(cal.bias) < 1e-3);  // symmetry
    CHECK(cal.apply(0.0) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("labels independent of score: flat calibrator near the positive rate") {
    const CalibrationDataset rows = make_uninformative_dataset(555, 400);
    double rate = 0.0;
    for (const CalibrationRow& row : rows) rate += row.label ? 1.0 : 0.0;
    rate /= static_cast<double>(rows.size());

    LogregOptions options;
    const Calibrator cal = fit_logreg(rows, options, "sys", AnswerType::kLong);
    for (const double s : {-2.0, -0.5, 0.0, 0.5, 2.0}) {
        CHECK(std::abs(cal.apply(s) - rate) < 0.05);
    }
}

TEST_CASE("newton fit matches the brute-force grid oracle") {
    // Frozen oracle values, computed with grid_search_fit over [-5, 5]^2 at
    // step 0.01 on these exact seeded datasets.
    LogregOptions options;
    options.c_grid = {1e3};
    options.seed = 7;

    SUBCASE("200 points from sigmoid(2s - 1)") {
        const CalibrationDataset rows = make_sigmoid_dataset(4242, 200, 2.0, -1.0);
        const double grid_w = 2.36;
        const double grid_b = -1.34;
        const Calibrator cal = fit_logreg(rows, options, "sys", AnswerType::kLong);
        CHECK(std::abs(cal.weight - grid_w) <= 0.15);
        CHECK(std::abs(cal.bias - grid_b) <= 0.15);
    }

    SUBCASE("40-point set") {
        const CalibrationDataset rows = make_sigmoid_dataset(99, 40, 2.0, -1.0);
        const double grid_w = 3.03;
        const double grid_b = -1.94;
        const Calibrator cal = fit_logreg(rows, options, "sys", AnswerType::kLong);
        CHECK(std::abs(cal.weight - grid_w) <= 0.15);
        CHECK(std::abs(cal.bias - grid_b) <= 0.15);
    }
}

TEST_CASE("cross-validation: one row per grid point, argmax with larger-c ties") {
    const CalibrationDataset rows = make_sigmoid_dataset(123, 120, 1.5, 0.2);
    LogregOptions options;
    options.c_grid = {0.1, 1.0, 10.0};
    options.seed = 3;
    const Calibrator cal = fit_logreg(rows, options, "sys", AnswerType::kShort);

    REQUIRE(cal.cv_log.size() == 3);
    double best_ll = cal.cv_log[0].second;
    for (const auto& [c, ll] : cal.cv_log) best_ll = std::max(best_ll, ll);
    double chosen_ll = 0.0;
    for (const auto& [c, ll] : cal.cv_log) {
        if (c == cal.chosen_c) chosen_ll = ll;
    }
    CHECK(chosen_ll == best_ll);
    for (const auto& [c, ll] : cal.cv_log) {
        if (ll == best_ll) CHECK(cal.chosen_c >= c);  // ties resolve to larger c
    }
}

TEST_CASE("fit is deterministic given data order and seed") {
    const CalibrationDataset rows = make_sigmoid_dataset(77, 90, 2.0, -0.5);
    LogregOptions options;
    options.seed = 11;
    const Calibrator a = fit_logreg(rows, options, "sys", AnswerType::kLong);
    const Calibrator b = fit_logreg(rows, options, "sys", AnswerType::kLong);
    CHECK(a.weight == b.weight);
    CHECK(a.bias == b.bias);
    CHECK(a.chosen_c == b.chosen_c);
    CHECK(a.cv_log == b.cv_log);
}

TEST_CASE("single-class data is a hard error naming the system") {
    CalibrationDataset rows;
    for (int i = 0; i < 10; ++i) rows.push_back({static_cast<double>(i), true});
    CHECK_THROWS_WITH_AS(fit_logreg(rows, LogregOptions{}, "bert-7", AnswerType::kLong),
                         doctest::Contains("bert-7"), ValidationError);
}

TEST_CASE("invalid options are config errors") {
    const CalibrationDataset rows{{0.0, false}, {1.0, true}, {2.0, false}, {3.0, true}};
    LogregOptions options;
    options.folds = 1;
    CHECK_THROWS_AS(fit_logreg(rows, options, "s", AnswerType::kLong), ConfigError);
    options.folds = 2;
    options.c_grid = {};
    CHECK_THROWS_AS(fit_logreg(rows, options, "s", AnswerType::kLong), ConfigError);
}

TEST_CASE("calibration with positive weight preserves the candidate argmax") {
    Rng rng(987);
    for (int trial = 0; trial < 500; ++trial) {
        Calibrator cal;
        cal.weight = 0.25 + 1.75 * rng.next_unit();
        cal.bias = -1.0 + 2.0 * rng.next_unit();

        std::vector<Candidate> raw;
        const std::size_t size = 1 + rng.next_below(15);
        for (std::size_t i = 0; i < size; ++i) {
            Span span;
            if (rng.next_unit() < 0.1) {
                span = Span::null();
            } else {
                const auto start = static_cast<std::int32_t>(rng.next_below(60));
                span = Span{start, start + static_cast<std::int32_t>(1 + rng.next_below(8))};
            }
            // Scores on a coarse grid in [-5, 5]: ties survive calibration
            // exactly and distinct scores stay distinct after the sigmoid.
            const double score = static_cast<double>(rng.next_below(2001)) * 0.005 - 5.0;
            raw.push_back(Candidate{span, score});
        }
        std::vector<Candidate> calibrated;
        for (const Candidate& c : raw) calibrated.push_back({c.span, cal.apply(c.score)});

        const Candidate* raw_best = best_candidate(raw);
        const Candidate* cal_best = best_candidate(calibrated);
        CHECK(raw_best->span == cal_best->span);
    }
}

TEST_CASE("calibrator JSON round-trip") {
    Calibrator cal;
    cal.system_id = "bert-a";
    cal.answer_type = AnswerType::kShort;
    cal.weight = 2.25;
    cal.bias = -0.75;
    cal.chosen_c = 10.0;
    cal.cv_log = {{1.0, -0.6931}, {10.0, -0.5012}};
    const Calibrator parsed = Calibrator::from_json(cal.to_json());
    CHECK(parsed.system_id == cal.system_id);
    CHECK(parsed.answer_type == cal.answer_type);
    CHECK(parsed.weight == cal.weight);
    CHECK(parsed.bias == cal.bias);
    CHECK(parsed.chosen_c == cal.chosen_c);
    CHECK(parsed.cv_log == cal.cv_log);
}

TEST_CASE("build_calibration_dataset labels top-1 predictions") {
    ingest::GoldSet gold;
    const auto add_gold = [&](const ExampleId& id, ingest::GoldAnnotation ann) {
        gold.examples.emplace(id, std::vector<ingest::GoldAnnotation>{std::move(ann)});
        gold.example_order.push_back(id);
    };
    ingest::GoldAnnotation answerable;
    answerable.long_span = Span{5, 12};
    add_gold("hit", answerable);
    add_gold("wrong", answerable);
    add_gold("declined", answerable);
    add_gold("null_right", ingest::GoldAnnotation{});

    ingest::SystemPredictions preds;
    preds.system_id = "m";
    const auto add_pred = [&](const ExampleId& id, std::vector<Candidate> longs) {
        ingest::ExampleCandidates entry;
        entry.long_answers = std::move(longs);
        preds.examples.emplace(id, std::move(entry));
    };
    add_pred("hit", {{Span{5, 12}, 2.0}, {Span{1, 2}, 0.5}});
    add_pred("wrong", {{Span{6, 12}, 1.5}});
    add_pred("declined", {{Span::null(), 0.9}});
    add_pred("null_right", {{Span::null(), 1.1}});

    const metrics::MatchConfig match{1, false};
    const CalibrationDataset rows = build_calibration_dataset(
        preds, gold, {"hit", "wrong", "declined", "null_right"}, AnswerType::kLong, match);

    REQUIRE(rows.size() == 4);
    CHECK(rows[0].score == 2.0);
    CHECK(rows[0].label);         // top-1 equals gold
    CHECK_FALSE(rows[1].label);   // top-1 mismatches gold
    CHECK_FALSE(rows[2].label);   // null top-1 on an answerable example
    CHECK(rows[3].label);         // null top-1 on an unanswerable example

    CHECK_THROWS_AS(
        build_calibration_dataset(preds, gold, {}, AnswerType::kLong, match), ValidationError);
}
