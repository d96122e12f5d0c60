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

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "skillcf/pipeline.hpp"
#include "test_support.hpp"

namespace skillcf {
namespace {

using testing::TempDir;

BenchConfig small_bench(std::size_t workers) {
  BenchConfig c;
  c.market.sizes = UniverseSizes{300, 30, 0, 10};
  c.market.n_jobs = 600;
  c.market.skills_per_job_mean = 4.0;
  c.market.n_profiles = 800;
  c.market.skills_per_profile_mean = 8.0;
  c.market.seed = 5;
  c.gbt.n_trees = 40;
  c.n_guide = 60;
  c.n_explain = 20;
  c.attribution.lime.n_samples = 200;
  c.attribution.shap_permutations = 40;
  c.workers = workers;
  return c;
}

std::vector<std::string> deterministic_files(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.find("timing") == std::string::npos) names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  return names;
}

TEST(Bench, WritesAllReportsAndIsIdenticalAcrossWorkerCounts) {
  TempDir one("bench1"), many("bench8");
  const auto r1 = run_bench(small_bench(1), one.path().string());
  run_bench(small_bench(8), many.path().string());
  const auto names = deterministic_files(one.path());
  for (const char* expected :
       {"data.jsonl", "model.json", "metrics.json", "guide.jsonl", "explain.jsonl",
        "table1.csv", "table1.json", "table2.csv", "table2.json", "cf_frequency.csv",
        "demand_frequency.csv", "report.json"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), expected), names.end()) << expected;
  }
  EXPECT_TRUE(std::filesystem::exists(one.file("guide.timing.jsonl")));
  EXPECT_EQ(names, deterministic_files(many.path()));
  for (const auto& name : names) {
    EXPECT_EQ(read_text_file(one.file(name)), read_text_file(many.file(name))) << name;
  }
  for (const auto& curve : r1.sequential.curves) EXPECT_TRUE(is_monotone(curve));
  EXPECT_FALSE(r1.checks.empty());
}

TEST(Bench, GuideRecordsRoundTripAndStayValid) {
  TempDir dir("guide");
  const auto r = run_bench(small_bench(2), dir.path().string());
  const auto records = read_counterfactuals(dir.file("guide.jsonl"));
  ASSERT_EQ(records.size(), r.guide.instances.size());
  const auto batch = batch_from_records(r.dataset, records);
  for (std::size_t i = 0; i < batch.instances.size(); ++i) {
    const auto& cf = batch.counterfactuals[i];
    if (cf.status != SearchStatus::kFound) continue;
    EXPECT_EQ(r.classifier->classify(apply_changes(batch.instances[i], cf.changes)),
              Outcome::kFavorable);
    EXPECT_EQ(cf.changes, r.guide.counterfactuals[i].changes);
  }
}

TEST(Metrics, RoundTrip) {
  TrainingMetrics m;
  m.test_rmse = 0.125;
  m.threshold = 3.0;
  m.train_profile_ids = {0, 2, 3};
  m.test_profile_ids = {1};
  const auto back = parse_metrics(serialize_metrics(m));
  EXPECT_EQ(back.test_rmse, m.test_rmse);
  EXPECT_EQ(back.threshold, m.threshold);
  EXPECT_EQ(back.train_profile_ids, m.train_profile_ids);
  EXPECT_EQ(back.test_profile_ids, m.test_profile_ids);
}

TEST(LabelFlip, MatchesDirectReachOracle) {
  const auto ds = testing::small_market(4);
  const std::size_t dim = ds.universe.size();
  std::vector<BinaryVector> instances;
  for (std::size_t i = 0; i < 50; ++i) instances.push_back(to_feature_vector(ds.profiles[i], dim));
  const std::vector<SkillId> ranked{3, 1, 4, 15, 9, 26};
  const double threshold = 2.0;
  const auto curve = global_topk_label_flip(ds, instances, ranked, 6, threshold, "x", 3);
  for (std::size_t k = 1; k <= 6; ++k) {
    std::size_t flipped = 0;
    for (const auto& x : instances) {
      for (std::size_t j = 1; j <= k; ++j) {
        auto active = x.active();
        active.insert(active.end(), ranked.begin(), ranked.begin() + static_cast<long>(j));
        std::sort(active.begin(), active.end());
        active.erase(std::unique(active.begin(), active.end()), active.end());
        if (static_cast<double>(job_reach(active, ds.jobs, ds.fulfillment_fraction)) > threshold) {
          ++flipped;
          break;
        }
      }
    }
    EXPECT_DOUBLE_EQ(curve.flip_pct[k - 1], 100.0 * static_cast<double>(flipped) / 50.0) << k;
  }
}

TEST(Selection, FiltersByClassAndLimit) {
  const auto ds = testing::small_market(3);
  GbtParams params;
  params.n_trees = 20;
  const auto r = train_gbt(ds, params, 3);
  const auto metrics = training_metrics(ds, r, 90);
  const ThresholdClassifier clf(std::make_shared<const GbtModel>(r.model), metrics.threshold);
  const auto rows = select_rows(ds, metrics, Split::kTest, clf, Outcome::kUnfavorable, 10, 1);
  EXPECT_EQ(rows.size(), 10u);
  EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
  for (std::size_t row : rows) {
    EXPECT_TRUE(std::binary_search(r.test_rows.begin(), r.test_rows.end(), row));
    EXPECT_EQ(clf.classify(to_feature_vector(ds.profiles[row], ds.universe.size())),
              Outcome::kUnfavorable);
  }
  EXPECT_EQ(rows, select_rows(ds, metrics, Split::kTest, clf, Outcome::kUnfavorable, 10, 1));
}

}  // namespace
}  // namespace skillcf
