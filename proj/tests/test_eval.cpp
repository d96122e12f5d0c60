/*
 * Copyright 2026 The skillcf Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "skillcf/eval.hpp"
#include "test_support.hpp"

namespace skillcf {
namespace {

using testing::linear;
using testing::vec;

constexpr SkillId a = 0, b = 1, c = 2;

ThresholdClassifier hand_classifier() { return ThresholdClassifier(linear({5, 3, 1}), 4.0); }

std::vector<BinaryVector> hand_instances() { return {BinaryVector(3), vec(3, {c})}; }

Counterfactual found_with(std::vector<SkillId> ids, double elapsed = 0.0) {
  Counterfactual cf;
  cf.status = SearchStatus::kFound;
  for (SkillId id : ids) cf.changes.push_back(Change{id, Direction::kAdd});
  cf.elapsed_s = elapsed;
  return cf;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(SequentialFlip, HandExample) {
  const auto clf = hand_classifier();
  const auto xs = hand_instances();
  const std::vector<MethodRankings> methods{{"m", {{b, a}, {b, a}}}};
  const auto curves = sequential_flip_eval(clf, xs, methods, 2);
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_EQ(curves[0].flip_pct, (std::vector<double>{0.0, 100.0}));
}

TEST(SequentialFlip, ShortRankingLeavesCurveFlat) {
  const auto clf = hand_classifier();
  const auto xs = hand_instances();
  const std::vector<MethodRankings> methods{{"m", {{a}, {b}}}};
  const auto curves = sequential_flip_eval(clf, xs, methods, 4);
  EXPECT_EQ(curves[0].flip_pct, (std::vector<double>{50.0, 50.0, 50.0, 50.0}));
}

TEST(SequentialFlip, InputErrors) {
  const auto clf = hand_classifier();
  const std::vector<MethodRankings> none{{"m", {}}};
  EXPECT_EQ(code_of([&] { sequential_flip_eval(clf, {}, none, 2); }), ErrorCode::kEmptyBatch);
  const auto xs = hand_instances();
  const std::vector<MethodRankings> two{{"m", {{a}, {b}}}};
  EXPECT_EQ(code_of([&] { sequential_flip_eval(clf, xs, two, 0); }), ErrorCode::kInvalidK);
  const std::vector<BinaryVector> favorable{vec(3, {a, b})};
  const std::vector<MethodRankings> one{{"m", {{a}}}};
  EXPECT_EQ(code_of([&] { sequential_flip_eval(clf, favorable, one, 1); }),
            ErrorCode::kPreconditionError);
  const std::vector<MethodRankings> dup{{"m", {{a, a}, {b}}}};
  EXPECT_EQ(code_of([&] { sequential_flip_eval(clf, xs, dup, 2); }),
            ErrorCode::kPreconditionError);
}

TEST(SequentialFlip, CounterfactualRankingsReachFullFlipAtMaxSize) {
  const auto ds = testing::small_market(21, 500);
  GbtParams params;
  params.n_trees = 40;
  const auto r = train_gbt(ds, params, 21);
  std::vector<double> labels;
  for (std::size_t i : r.train_rows) labels.push_back(ds.profiles[i].label);
  const ThresholdClassifier clf(std::make_shared<const GbtModel>(r.model),
                                percentile_threshold(labels, 90));
  std::vector<BinaryVector> xs;
  MethodRankings sedc{"sedc", {}};
  std::size_t max_size = 0;
  for (const auto& p : ds.profiles) {
    const auto x = to_feature_vector(p, ds.universe.size());
    if (clf.classify(x) != Outcome::kUnfavorable) continue;
    const auto cf = search_counterfactual(clf, x, SearchConfig::Addition());
    if (cf.status != SearchStatus::kFound) continue;
    xs.push_back(x);
    sedc.per_instance.push_back(change_ranking(cf));
    max_size = std::max(max_size, cf.size());
  }
  ASSERT_GT(xs.size(), 20u);
  const std::vector<MethodRankings> methods{sedc};
  const auto curve = sequential_flip_eval(clf, xs, methods, max_size + 2, 4)[0];
  EXPECT_TRUE(is_monotone(curve));
  EXPECT_EQ(curve.flip_pct[max_size - 1], 100.0);
  EXPECT_EQ(curve.flip_pct, sequential_flip_eval(clf, xs, methods, max_size + 2, 1)[0].flip_pct);
}

TEST(GlobalFlip, HandExamples) {
  const auto clf = hand_classifier();
  const auto xs = hand_instances();
  const std::vector<SkillId> top_a{a}, top_c{c};
  EXPECT_EQ(global_topk_flip_eval(clf, xs, top_a, 1, "x").flip_pct,
            (std::vector<double>{100.0}));
  EXPECT_EQ(global_topk_flip_eval(clf, xs, top_c, 1, "x").flip_pct,
            (std::vector<double>{0.0}));
  EXPECT_EQ(global_topk_flip_eval(clf, xs, top_c, 3, "x").flip_pct,
            (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(GlobalFlip, AlreadyPresentFeatureStaysPresent) {
  // {c} + c + b = {b, c} scores 4 (not > 4); adding a then flips it.
  const auto clf = hand_classifier();
  const std::vector<BinaryVector> xs{vec(3, {c})};
  const std::vector<SkillId> ranked{c, b, a};
  EXPECT_EQ(global_topk_flip_eval(clf, xs, ranked, 3, "x").flip_pct,
            (std::vector<double>{0.0, 0.0, 100.0}));
}

TEST(Sparsity, Examples) {
  const std::vector<Counterfactual> one{found_with({a, b})};
  const std::vector<BinaryVector> x1{vec(3, {c})};
  const auto s1 = sparsity_stats(one, x1);
  EXPECT_DOUBLE_EQ(s1.mean_changes, 2.0);
  EXPECT_DOUBLE_EQ(s1.std_changes, 0.0);
  EXPECT_DOUBLE_EQ(s1.mean_active, 1.0);

  const std::vector<Counterfactual> three{found_with({a}), found_with({a, b}),
                                          found_with({a, b, c})};
  const std::vector<BinaryVector> x3(3, BinaryVector(3));
  const auto s3 = sparsity_stats(three, x3);
  EXPECT_DOUBLE_EQ(s3.mean_changes, 2.0);
  EXPECT_NEAR(s3.std_changes, std::sqrt(2.0 / 3.0), 1e-12);
}

TEST(Sparsity, NotFoundIsExcluded) {
  Counterfactual missing;
  missing.status = SearchStatus::kNotFound;
  const std::vector<Counterfactual> cfs{found_with({a}), missing};
  const std::vector<BinaryVector> xs(2, BinaryVector(3));
  EXPECT_EQ(sparsity_stats(cfs, xs).n, 1u);
  const std::vector<Counterfactual> only_missing{missing};
  const std::vector<BinaryVector> x1(1, BinaryVector(3));
  EXPECT_EQ(code_of([&] { sparsity_stats(only_missing, x1); }), ErrorCode::kEmptyBatch);
}

TEST(Timing, Examples) {
  const std::vector<Counterfactual> one{found_with({a}, 1.0)};
  const auto t1 = timing_stats(one);
  EXPECT_DOUBLE_EQ(t1.mean_s, 1.0);
  EXPECT_DOUBLE_EQ(t1.max_s, 1.0);
  const std::vector<Counterfactual> three{found_with({a}, 1.0), found_with({a}, 2.0),
                                          found_with({a}, 3.0)};
  const auto t3 = timing_stats(three);
  EXPECT_DOUBLE_EQ(t3.mean_s, 2.0);
  EXPECT_DOUBLE_EQ(t3.max_s, 3.0);
  EXPECT_EQ(code_of([&] { timing_stats({}); }), ErrorCode::kEmptyBatch);
}

TEST(Frequency, CounterfactualTallies) {
  const std::vector<Counterfactual> two{found_with({a}), found_with({a, b})};
  EXPECT_EQ(counterfactual_frequency(two), (FrequencyTable{{a, 2}, {b, 1}}));
  const std::vector<Counterfactual> empty{found_with({}), found_with({})};
  EXPECT_TRUE(counterfactual_frequency(empty).empty());
  const std::vector<Counterfactual> three{found_with({a, b}), found_with({b}),
                                          found_with({b, c})};
  EXPECT_EQ(counterfactual_frequency(three), (FrequencyTable{{b, 3}, {a, 1}, {c, 1}}));
}

TEST(Frequency, DemandTallies) {
  const std::vector<JobPosting> jobs{{0, {a, b}}, {1, {b}}};
  EXPECT_EQ(demand_frequency(jobs), (FrequencyTable{{b, 2}, {a, 1}}));
  const std::vector<JobPosting> single{{0, {a}}};
  EXPECT_EQ(demand_frequency(single), (FrequencyTable{{a, 1}}));
  EXPECT_EQ(code_of([&] { demand_frequency({}); }), ErrorCode::kEmptyBatch);
}

TEST(Frequency, DemandHeadMatchesRecount) {
  const auto ds = testing::small_market(17);
  std::vector<std::uint64_t> counts(ds.universe.size(), 0);
  for (const auto& job : ds.jobs) for (SkillId s : job.required) ++counts[s];
  const auto table = demand_frequency(ds.jobs);
  ASSERT_FALSE(table.empty());
  EXPECT_EQ(table.front().second, *std::max_element(counts.begin(), counts.end()));
  for (const auto& [id, n] : table) EXPECT_EQ(counts[id], n);
  for (std::size_t i = 1; i < table.size(); ++i) {
    EXPECT_TRUE(table[i - 1].second > table[i].second ||
                (table[i - 1].second == table[i].second && table[i - 1].first < table[i].first));
  }
}

TEST(Reports, CsvLayout) {
  const std::vector<FlipCurve> curves{{"lime", {0.0, 50.0}}, {"sedc", {12.5, 100.0}}};
  EXPECT_EQ(flip_curves_csv(curves),
            "method,k,flip_pct\nlime,1,0.0000\nlime,2,50.0000\n"
            "sedc,1,12.5000\nsedc,2,100.0000\n");
  EXPECT_TRUE(dominates(curves[1], curves[0]));
  EXPECT_FALSE(dominates(curves[0], curves[1]));
  EXPECT_FALSE(is_monotone(FlipCurve{"x", {2.0, 1.0}}));
}

}  // namespace
}  // namespace skillcf
