#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "grouprank/rewards.hpp"

using namespace grouprank;
using namespace grouprank::rewards;

TEST_CASE("ordering by scores") {
    GroupScoreMap m({3, 9, 3, 10});
    CHECK(order_by_scores(m) == std::vector<int>{4, 2, 1, 3});
    const std::vector<double> gt{0.1, 0.1, 0.9};
    CHECK(order_by_scores(gt) == std::vector<int>{3, 1, 2});
}

TEST_CASE("recall reward") {
    const std::vector<double> gt{0.9, 0.2, 0.5, 0.0};
    const std::vector<int> order{2, 1, 4, 3};
    CHECK(recall_reward(order, gt, 2) == doctest::Approx(0.5));
    CHECK(recall_reward(order, gt, 4) == doctest::Approx(1.0));
    const std::vector<double> none{0.1, 0.1, 0.1, 0.1};
    CHECK(recall_reward(order, none, 2) == 0.0);
    const std::vector<int> bad{1, 1, 2, 3};
    CHECK_THROWS_AS(recall_reward(bad, gt, 2), std::invalid_argument);
}

TEST_CASE("ranking reward on a fixed instance") {
    // gt order 1..5; prediction swaps positions 2 and 3
    const std::vector<double> gt{1, 0.75, 0.5, 0.25, 0};
    GroupScoreMap pred({10, 7, 8, 5, 1});
    CHECK(ranking_reward(pred, gt) == doctest::Approx(0.9673083083027847).epsilon(1e-12));
    GroupScoreMap perfect({10, 8, 6, 4, 2});
    CHECK(ranking_reward(perfect, gt) == doctest::Approx(1.0));
}

TEST_CASE("distribution reward") {
    const std::vector<double> gt{0.8, 0.2};
    GroupScoreMap pred({2, 8});
    CHECK(distribution_reward(pred, gt) == doctest::Approx(0.16822377468324046).epsilon(1e-9));
    GroupScoreMap same({8, 2});
    CHECK(distribution_reward(same, gt) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("heterogeneous reward and gating") {
    CHECK(heterogeneous_reward(1, 1, 1) == doctest::Approx(0.8));
    CHECK(heterogeneous_reward(0.5, 0.2, -1) == doctest::Approx(0.1 + 0.1 - 0.1));
    CHECK(final_reward({true, true}, 0.42) == 0.42);
    CHECK(final_reward({true, false}, 0.42) == 0.0);
    CHECK(final_reward({false, false}, 0.42) == -1.0);
}

TEST_CASE("score_response ignores the map unless the answer is well-formed") {
    const std::vector<double> gt{1, 0};
    GroupScoreMap pred({10, 0});
    auto good = score_response({true, true}, &pred, gt);
    CHECK(good.final == doctest::Approx(good.r_h));
    CHECK(good.r_recall == doctest::Approx(1.0));
    auto half = score_response({true, false}, &pred, gt);
    CHECK(half.final == 0.0);
    auto bad = score_response({false, false}, nullptr, gt);
    CHECK(bad.final == -1.0);
    CHECK_THROWS_AS(score_response({true, true}, nullptr, gt), std::invalid_argument);
}

TEST_CASE("heterogeneous reward clamp is opt-in") {
    RewardParams p;
    p.clamp_heterogeneous_at_zero = true;
    const std::vector<double> gt{1, 0, 0, 0};
    GroupScoreMap pred({0, 10, 10, 10});
    auto clamped = score_response({true, true}, &pred, gt, p);
    CHECK(clamped.r_h >= 0.0);
    p.clamp_heterogeneous_at_zero = false;
    auto raw = score_response({true, true}, &pred, gt, p);
    CHECK(raw.r_h <= clamped.r_h);
}

TEST_CASE("parameter validation") {
    RewardParams p;
    validate(p);
    p.weights.alpha = -0.1;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = {};
    p.rbo_persistence = 1.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("grpo advantages") {
    const std::vector<double> r{-1, 0, 0.8, 0.8};
    const auto a = grpo_advantages(r);
    const double expected[] = {-1.5541959703188175, -0.20272121351984582, 0.8784585919193317,
                               0.8784585919193317};
    for (int i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    const std::vector<double> flat{0.3, 0.3, 0.3};
    CHECK(grpo_advantages(flat) == std::vector<double>{0, 0, 0});
    const std::vector<double> one{5};
    CHECK(grpo_advantages(one) == std::vector<double>{0});
}
