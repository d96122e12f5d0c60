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
#include <vector>

#include "skillcf/model.hpp"
#include "test_support.hpp"

namespace skillcf {
namespace {

using testing::TempDir;
using testing::linear;
using testing::vec;

// Dataset over a tiny universe whose profiles carry arbitrary labels. The
// labels are not job reach, which is fine for the trainer.
MarketDataset labelled(std::size_t dim, const std::vector<std::pair<std::vector<SkillId>, std::uint64_t>>& rows) {
  MarketDataset d;
  d.universe = generate_universe(UniverseSizes{dim, 0, 0, 0}, 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.profiles.push_back(CandidateProfile{i, rows[i].first, rows[i].second});
  }
  return d;
}

TEST(Gbt, ConstantLabelsPredictTheConstant) {
  std::vector<std::pair<std::vector<SkillId>, std::uint64_t>> rows;
  for (SkillId i = 0; i < 16; ++i) rows.push_back({{static_cast<SkillId>(i % 4)}, 3});
  const auto r = train_gbt(labelled(4, rows), GbtParams{}, 1);
  EXPECT_DOUBLE_EQ(r.test_rmse, 0.0);
  for (SkillId f = 0; f < 4; ++f) EXPECT_DOUBLE_EQ(r.model.score(vec(4, {f})), 3.0);
  EXPECT_DOUBLE_EQ(r.model.score(BinaryVector(4)), 3.0);
}

TEST(Gbt, FitsFivePerFeatureAOnTheFourPoints) {
  // y = 5 * x_a over all four instances of {a, b}, each repeated four times.
  const std::vector<std::vector<SkillId>> points{{}, {0}, {1}, {0, 1}};
  std::vector<std::pair<std::vector<SkillId>, std::uint64_t>> rows;
  for (int rep = 0; rep < 4; ++rep) {
    for (const auto& p : points) {
      const bool has_a = !p.empty() && p[0] == 0;
      rows.push_back({p, has_a ? 5u : 0u});
    }
  }
  GbtParams params;
  params.n_trees = 400;
  const auto r = train_gbt(labelled(2, rows), params, 3);
  for (const auto& p : points) {
    const bool has_a = !p.empty() && p[0] == 0;
    EXPECT_NEAR(r.model.score(vec(2, p)), has_a ? 5.0 : 0.0, 1e-6);
  }
}

TEST(Gbt, SameInputsSameSerializedModel) {
  const auto ds = testing::small_market(5);
  GbtParams params;
  params.n_trees = 20;
  const auto a = train_gbt(ds, params, 9);
  const auto b = train_gbt(ds, params, 9);
  EXPECT_EQ(serialize_model(a.model), serialize_model(b.model));
  EXPECT_EQ(a.test_rmse, b.test_rmse);
}

TEST(Gbt, SplitIsThreeToOneAndDisjoint) {
  const auto ds = testing::small_market(5);
  GbtParams params;
  params.n_trees = 2;
  const auto r = train_gbt(ds, params, 9);
  EXPECT_EQ(r.train_rows.size(), 300u);
  EXPECT_EQ(r.test_rows.size(), 100u);
  std::vector<std::size_t> all = r.train_rows;
  all.insert(all.end(), r.test_rows.begin(), r.test_rows.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);
}

TEST(Gbt, ScoreFollowsTheBoostingRecurrence) {
  const auto ds = testing::small_market(6);
  GbtParams params;
  params.n_trees = 30;
  const auto r = train_gbt(ds, params, 2);
  const auto& m = r.model;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto x = to_feature_vector(ds.profiles[i], ds.universe.size());
    EXPECT_DOUBLE_EQ(m.score_prefix(x, 0), m.base_score());
    for (std::size_t t = 0; t < m.trees().size(); ++t) {
      const double expected =
          m.score_prefix(x, t) + m.learning_rate() * m.trees()[t].evaluate(x.bits());
      ASSERT_NEAR(m.score_prefix(x, t + 1), expected, 1e-9);
    }
  }
}

TEST(Gbt, TrainingReducesErrorBelowTheMeanPredictor) {
  const auto ds = testing::small_market(8, 800);
  const auto r = train_gbt(ds, GbtParams{}, 1);
  double mean = 0.0;
  for (std::size_t i : r.train_rows) mean += static_cast<double>(ds.profiles[i].label);
  mean /= static_cast<double>(r.train_rows.size());
  double sq = 0.0;
  for (std::size_t i : r.test_rows) {
    const double e = static_cast<double>(ds.profiles[i].label) - mean;
    sq += e * e;
  }
  const double baseline = std::sqrt(sq / static_cast<double>(r.test_rows.size()));
  EXPECT_TRUE(std::isfinite(r.test_rmse));
  EXPECT_LT(r.test_rmse, baseline);
}

TEST(Gbt, RejectsBadParameters) {
  const auto ds = testing::small_market(1, 20);
  GbtParams p;
  p.n_trees = 0;
  EXPECT_THROW(train_gbt(ds, p, 1), Error);
  p = GbtParams{};
  p.train_fraction = 1.0;
  EXPECT_THROW(train_gbt(ds, p, 1), Error);
  try {
    train_gbt(testing::small_market(1, 7), GbtParams{}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewSamples);
  }
}

TEST(Percentile, NearestRankExamples) {
  std::vector<double> tens;
  for (int v = 10; v <= 100; v += 10) tens.push_back(v);
  EXPECT_EQ(percentile_threshold(tens, 90), 90.0);
  EXPECT_EQ(percentile_threshold(std::vector<double>{7, 7, 7}, 90), 7.0);
  for (double p : {1.0, 50.0, 90.0, 100.0}) {
    EXPECT_EQ(percentile_threshold(std::vector<double>{42}, p), 42.0);
  }
  EXPECT_EQ(percentile_threshold(tens, 100), 100.0);
}

TEST(Percentile, EmptyInputIsAnError) {
  try {
    percentile_threshold(std::vector<double>{}, 90);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

// Oracle: the smallest list value v with at least p% of the values <= v.
double nearest_rank_oracle(const std::vector<double>& values, int p) {
  double best = 1e300;
  for (double v : values) {
    std::size_t at_most = 0;
    for (double w : values) at_most += w <= v;
    if (100 * at_most >= static_cast<std::size_t>(p) * values.size()) best = std::min(best, v);
  }
  return best;
}

TEST(Percentile, AgreesWithOracleOnAllShortLists) {
  for (std::size_t len = 1; len <= 8; ++len) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < len; ++i) total *= 4;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<double> values;
      for (std::size_t i = 0, c = code; i < len; ++i, c /= 4) values.push_back(c % 4);
      for (int p : {10, 25, 50, 90, 100}) {
        ASSERT_EQ(percentile_threshold(values, p), nearest_rank_oracle(values, p))
            << "len " << len << " code " << code << " p " << p;
      }
    }
  }
}

TEST(Classifier, StrictThreshold) {
  const auto c5 = ThresholdClassifier(linear({5.0}), 4.0);
  EXPECT_EQ(c5.classify(vec(1, {0})), Outcome::kFavorable);
  const auto c4 = ThresholdClassifier(linear({4.0}), 4.0);
  EXPECT_EQ(c4.classify(vec(1, {0})), Outcome::kUnfavorable);
}

TEST(Classifier, LinearHandExample) {
  const ThresholdClassifier c(linear({5, 3, 1}), 4.0);
  const auto x = vec(3, {0, 1, 2});
  EXPECT_DOUBLE_EQ(c.score(x), 9.0);
  EXPECT_EQ(classify(c, x), Outcome::kFavorable);
}

TEST(Classifier, DimensionMismatchIsShapeError) {
  const ThresholdClassifier c(linear({5, 3, 1}), 4.0);
  try {
    c.classify(BinaryVector(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeError);
  }
}

TEST(ModelFile, GbtRoundTripKeepsScores) {
  const auto ds = testing::small_market(2);
  GbtParams params;
  params.n_trees = 10;
  const auto r = train_gbt(ds, params, 4);
  TempDir dir("model");
  save_model(r.model, dir.file("m.json"));
  const auto loaded = std::get<GbtModel>(load_model(dir.file("m.json")));
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    BinaryVector x(ds.universe.size());
    for (SkillId f = 0; f < x.size(); ++f) if (rng.bernoulli(0.2)) x.set(f);
    ASSERT_EQ(loaded.score(x), r.model.score(x));
  }
}

TEST(ModelFile, LinearRoundTripKeepsWeights) {
  const LinearPredictor m({0.5, -1.25, 3.0}, 0.75);
  const auto back = std::get<LinearPredictor>(parse_model(serialize_model(m)));
  EXPECT_EQ(back, m);
}

TEST(ModelFile, TruncatedFileIsModelLoadError) {
  const auto ds = testing::small_market(2, 40);
  GbtParams params;
  params.n_trees = 3;
  const auto text = serialize_model(train_gbt(ds, params, 4).model);
  TempDir dir("model");
  write_text_file(dir.file("m.json"), text.substr(0, text.size() / 2));
  try {
    load_model(dir.file("m.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kModelLoadError);
  }
}

}  // namespace
}  // namespace skillcf
