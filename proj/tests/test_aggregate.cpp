#include <doctest.h>

#include <cmath>
#include <vector>

#include "spanfuse/aggregate.hpp"
#include "spanfuse/calibrate.hpp"
#include "spanfuse/errors.hpp"
#include "spanfuse/rng.hpp"

using namespace spanfuse;
using namespace spanfuse::agg;

TEST_CASE("group_by_span collects descending score vectors") {
    const Span a{1, 4};
    const Span b{6, 9};
    const auto groups = group_by_span({{a, 0.3}, {b, 0.5}, {a, 0.7}});
    REQUIRE(groups.size() == 2);
    CHECK(groups.at(a) == ScoreVector{0.7, 0.3});
    CHECK(groups.at(b) == ScoreVector{0.5});
}

TEST_CASE("group_by_span empty and null cases") {
    CHECK(group_by_span({}).empty());
    const auto groups = group_by_span({{Span::null(), 0.2}});
    REQUIRE(groups.size() == 1);
    CHECK(groups.at(Span::null()) == ScoreVector{0.2});
}

TEST_CASE("group_by_span conserves the score count") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Candidate> candidates;
        const std::size_t size = rng.next_below(30);
        for (std::size_t i = 0; i < size; ++i) {
            const auto start = static_cast<std::int32_t>(rng.next_below(5));
            candidates.push_back(Candidate{Span{start, start + 2}, rng.next_unit()});
        }
        std::size_t total = 0;
        for (const auto& [span, scores] : group_by_span(candidates)) total += scores.size();
        CHECK(total == candidates.size());
    }
}

TEST_CASE("aggregator formulas") {
    CHECK(agg_max({0.7, 0.3}) == 0.7);
    CHECK(agg_max({0.5}) == 0.5);
    CHECK(agg_max({-1.0, -2.0}) == -1.0);

    CHECK(agg_exp_sum({0.8, 0.4}, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(agg_exp_sum({0.5}, 0.9) == 0.5);
    CHECK(agg_exp_sum({0.6, 0.6, 0.6}, 0.5) == doctest::Approx(1.05).epsilon(1e-12));

    CHECK(agg_recip_rank_sum({0.8, 0.4}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(agg_recip_rank_sum({0.9}) == 0.9);
    CHECK(agg_recip_rank_sum({0.6, 0.6, 0.6}) == doctest::Approx(1.1).epsilon(1e-12));

    CHECK(agg_noisy_or({0.5, 0.5}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(agg_noisy_or({0.3}) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(agg_noisy_or({1.0, 0.4}) == 1.0);
}

TEST_CASE("noisy-or rejects scores outside [0, 1]") {
    CHECK_THROWS_AS(agg_noisy_or({0.5, 1.2}), std::domain_error);
    CHECK_THROWS_AS(agg_noisy_or({-0.1}), std::domain_error);
}

TEST_CASE("all strategies agree on singleton vectors") {
    Rng rng(88);
    for (int trial = 0; trial < 100; ++trial) {
        const double p = rng.next_unit();
        const ScoreVector single{p};
        CHECK(agg_max(single) == p);
        CHECK(agg_exp_sum(single, 0.5) == p);
        CHECK(agg_recip_rank_sum(single) == p);
        CHECK(agg_noisy_or(single) == doctest::Approx(p).epsilon(1e-15));
    }
}

TEST_CASE("exponential sum approaches max as beta approaches zero") {
    const ScoreVector scores{0.9, 0.7, 0.2};
    CHECK(std::abs(agg_exp_sum(scores, 1e-9) - agg_max(scores)) < 1e-6);
}

TEST_CASE("max and noisy-or are monotone, noisy-or dominates max on [0,1]") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        ScoreVector scores;
        const std::size_t size = 1 + rng.next_below(6);
        for (std::size_t i = 0; i < size; ++i) scores.push_back(rng.next_unit());
        std::sort(scores.begin(), scores.end(), std::greater<double>());

        CHECK(agg_noisy_or(scores) >= agg_max(scores) - 1e-15);

        // Bump one element; both must be non-decreasing.
        ScoreVector bumped = scores;
        const std::size_t at = rng.next_below(size);
        bumped[at] = std::min(1.0, bumped[at] + 0.1);
        std::sort(bumped.begin(), bumped.end(), std::greater<double>());
        CHECK(agg_max(bumped) >= agg_max(scores));
        CHECK(agg_noisy_or(bumped) >= agg_noisy_or(scores) - 1e-15);
    }
}

TEST_CASE("aggregate_system composes calibration, grouping and aggregation") {
    const Span a{2, 5};
    const std::vector<Candidate> candidates{{a, 0.7}, {a, 0.3}};

    SUBCASE("max without calibration") {
        const SpanScores out = aggregate_system(candidates, {Aggregator::kMax, 0.5}, nullptr);
        REQUIRE(out.size() == 1);
        CHECK(out[0].first == a);
        CHECK(out[0].second == 0.7);
    }

    SUBCASE("strategies are permutation invariant in candidate order") {
        std::vector<Candidate> shuffled{{a, 0.3}, {a, 0.7}};
        for (const Aggregator kind :
             {Aggregator::kMax, Aggregator::kExpSum, Aggregator::kRecipRankSum}) {
            const AggregationStrategy strategy{kind, 0.5};
            CHECK(aggregate_system(candidates, strategy, nullptr) ==
                  aggregate_system(shuffled, strategy, nullptr));
        }
    }

    SUBCASE("noisy-or on raw scores fails loudly") {
        CHECK_THROWS_AS(
            aggregate_system({{a, 3.2}}, {Aggregator::kNoisyOr, 0.5}, nullptr, "system s1"),
            ValidationError);
    }

    SUBCASE("noisy-or after calibration stays in range") {
        calibrate::Calibrator cal;
        cal.weight = 1.0;
        cal.bias = 0.0;
        const SpanScores out =
            aggregate_system({{a, 3.2}, {a, -1.0}}, {Aggregator::kNoisyOr, 0.5}, &cal);
        REQUIRE(out.size() == 1);
        CHECK(out[0].second > 0.0);
        CHECK(out[0].second <= 1.0);
    }

    SUBCASE("empty candidate list becomes a null-span zero") {
        const SpanScores out = aggregate_system({}, {Aggregator::kMax, 0.5}, nullptr);
        REQUIRE(out.size() == 1);
        CHECK(out[0].first.is_null());
        CHECK(out[0].second == 0.0);
    }

    SUBCASE("single candidate per span: all strategies agree") {
        calibrate::Calibrator cal;
        cal.weight = 2.0;
        cal.bias = -1.0;
        const std::vector<Candidate> one{{a, 0.4}};
        SpanScores reference;
        for (const Aggregator kind : {Aggregator::kMax, Aggregator::kExpSum,
                                      Aggregator::kRecipRankSum, Aggregator::kNoisyOr}) {
            const SpanScores out = aggregate_system(one, {kind, 0.5}, &cal);
            REQUIRE(out.size() == 1);
            if (reference.empty()) {
                reference = out;
            } else {
                CHECK(out[0].first == reference[0].first);
                CHECK(out[0].second == doctest::Approx(reference[0].second).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("strategy names round-trip") {
    for (const Aggregator kind : {Aggregator::kMax, Aggregator::kExpSum,
                                  Aggregator::kRecipRankSum, Aggregator::kNoisyOr}) {
        CHECK(aggregator_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(aggregator_from_string("median"), ConfigError);
}
