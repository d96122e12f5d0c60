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

// End-to-end steps shared by the command-line tool and the acceptance
// suite: training metrics, instance selection, batch search, attribution
// rankings, the two flip protocols, and the report files they produce.
//
// Every file written here is a pure function of its inputs and seeds.
// Wall-clock measurements go to separate `*.timing.*` sidecar files.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "skillcf/attribution.hpp"
#include "skillcf/common.hpp"
#include "skillcf/dataset.hpp"
#include "skillcf/eval.hpp"
#include "skillcf/model.hpp"
#include "skillcf/random.hpp"
#include "skillcf/search.hpp"

namespace skillcf {

// ---------------------------------------------------------------------------
// Training metrics

struct TrainingMetrics {
  double test_rmse = 0.0;
  double threshold = 0.0;
  double percentile = 90.0;
  std::vector<std::uint64_t> train_profile_ids;
  std::vector<std::uint64_t> test_profile_ids;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

inline TrainingMetrics training_metrics(const MarketDataset& dataset,
                                        const TrainResult& trained, double percentile) {
  TrainingMetrics m;
  m.test_rmse = trained.test_rmse;
  m.percentile = percentile;
  std::vector<double> labels;
  for (std::size_t r : trained.train_rows) {
    labels.push_back(static_cast<double>(dataset.profiles[r].label));
    m.train_profile_ids.push_back(dataset.profiles[r].id);
  }
  for (std::size_t r : trained.test_rows) m.test_profile_ids.push_back(dataset.profiles[r].id);
  m.threshold = percentile_threshold(labels, percentile);
  return m;
}

inline std::string serialize_metrics(const TrainingMetrics& m) {
  nlohmann::ordered_json j;
  j["test_rmse"] = m.test_rmse;
  j["threshold"] = m.threshold;
  j["percentile"] = m.percentile;
  j["n_train"] = m.train_profile_ids.size();
  j["n_test"] = m.test_profile_ids.size();
  j["train_profile_ids"] = m.train_profile_ids;
  j["test_profile_ids"] = m.test_profile_ids;
  j["config"] = m.config;
  return j.dump(2) + "\n";
}

inline TrainingMetrics parse_metrics(std::string_view text) {
  TrainingMetrics m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.test_rmse = j.at("test_rmse").get<double>();
    m.threshold = j.at("threshold").get<double>();
    m.percentile = j.at("percentile").get<double>();
    m.train_profile_ids = j.at("train_profile_ids").get<std::vector<std::uint64_t>>();
    m.test_profile_ids = j.at("test_profile_ids").get<std::vector<std::uint64_t>>();
    if (j.contains("config")) m.config = j["config"];
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("metrics file: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Instance selection

enum class Split { kTrain, kTest, kAll };

// Rows of `dataset.profiles` in the requested split whose predicted class is
// `wanted` (any class when `wanted` is empty). When more than `limit` rows
// qualify, a seeded uniform sample of `limit` rows is kept. Result is in
// ascending row order.
inline std::vector<std::size_t> select_rows(const MarketDataset& dataset,
                                            const TrainingMetrics& metrics, Split split,
                                            const ThresholdClassifier& classifier,
                                            std::optional<Outcome> wanted,
                                            std::size_t limit, std::uint64_t seed) {
  std::vector<std::uint64_t> ids;
  if (split == Split::kAll) {
    for (const auto& p : dataset.profiles) ids.push_back(p.id);
  } else {
    ids = split == Split::kTrain ? metrics.train_profile_ids : metrics.test_profile_ids;
  }
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  for (std::size_t r = 0; r < dataset.profiles.size(); ++r) {
    row_of[dataset.profiles[r].id] = r;
  }
  std::vector<std::size_t> rows;
  for (std::uint64_t id : ids) {
    const auto it = row_of.find(id);
    if (it == row_of.end()) {
      throw Error(ErrorCode::kIntegrityError,
                  "metrics refer to unknown profile " + std::to_string(id));
    }
    rows.push_back(it->second);
  }
  std::sort(rows.begin(), rows.end());
  if (wanted) {
    std::vector<std::size_t> keep;
    for (std::size_t row : rows) {
      const auto x = to_feature_vector(dataset.profiles[row], dataset.universe.size());
      if (classifier.classify(x) == *wanted) keep.push_back(row);
    }
    rows = std::move(keep);
  }
  if (rows.size() > limit) {
    Rng rng(derive_seed(seed, 0x73656c));
    rng.shuffle(std::span<std::size_t>(rows));
    rows.resize(limit);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

// ---------------------------------------------------------------------------
// Batch search

struct ExplainedBatch {
  std::vector<std::uint64_t> profile_ids;
  std::vector<BinaryVector> instances;
  std::vector<Counterfactual> counterfactuals;
};

inline ExplainedBatch run_batch(const MarketDataset& dataset,
                                std::span<const std::size_t> rows,
                                const ThresholdClassifier& classifier,
                                const SearchConfig& config, std::size_t workers) {
  ExplainedBatch b;
  for (std::size_t r : rows) {
    b.profile_ids.push_back(dataset.profiles[r].id);
    b.instances.push_back(to_feature_vector(dataset.profiles[r], dataset.universe.size()));
  }
  b.counterfactuals.resize(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    b.counterfactuals[i] = search_counterfactual(classifier, b.instances[i], config);
  });
  return b;
}

inline std::string timing_sidecar_path(const std::string& path) {
  const std::string ext = ".jsonl";
  if (path.size() > ext.size() && path.ends_with(ext)) {
    return path.substr(0, path.size() - ext.size()) + ".timing.jsonl";
  }
  return path + ".timing.jsonl";
}

// Writes one record per counterfactual to `path` (without elapsed times) and
// the elapsed times to the timing sidecar.
inline void write_counterfactuals(const std::string& path, const ExplainedBatch& b) {
  std::string main;
  std::string timing;
  for (std::size_t i = 0; i < b.counterfactuals.size(); ++i) {
    main += counterfactual_to_json(b.counterfactuals[i], b.profile_ids[i], false).dump();
    main += '\n';
    timing += nlohmann::ordered_json{{"profile_id", b.profile_ids[i]},
                                     {"elapsed_s", b.counterfactuals[i].elapsed_s}}
                  .dump();
    timing += '\n';
  }
  write_text_file(path, main);
  write_text_file(timing_sidecar_path(path), timing);
}

// Reads counterfactual records and, when present, their timing sidecar.
inline std::vector<CounterfactualRecord> read_counterfactuals(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<CounterfactualRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(counterfactual_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError,
                  path + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError,
                  path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  const std::string sidecar = timing_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    const std::string t = read_text_file(sidecar);
    std::size_t i = 0;
    pos = 0;
    while (pos < t.size() && i < out.size()) {
      std::size_t end = t.find('\n', pos);
      if (end == std::string::npos) end = t.size();
      const std::string line = t.substr(pos, end - pos);
      pos = end + 1;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        if (j.at("profile_id").get<std::uint64_t>() == out[i].profile_id) {
          out[i].cf.elapsed_s = j.at("elapsed_s").get<double>();
        }
      } catch (const nlohmann::json::exception&) {
        // a damaged sidecar only loses timing information
      }
      ++i;
    }
  }
  return out;
}

// Rebuilds the batch (instances from the dataset) for records whose factual
// instance was not already in the target class.
inline ExplainedBatch batch_from_records(const MarketDataset& dataset,
                                         std::span<const CounterfactualRecord> records) {
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  for (std::size_t r = 0; r < dataset.profiles.size(); ++r) {
    row_of[dataset.profiles[r].id] = r;
  }
  ExplainedBatch b;
  for (const auto& rec : records) {
    if (rec.cf.status == SearchStatus::kAlreadyTarget) continue;
    const auto it = row_of.find(rec.profile_id);
    if (it == row_of.end()) {
      throw Error(ErrorCode::kIntegrityError,
                  "counterfactual for unknown profile " + std::to_string(rec.profile_id));
    }
    b.profile_ids.push_back(rec.profile_id);
    b.instances.push_back(
        to_feature_vector(dataset.profiles[it->second], dataset.universe.size()));
    b.counterfactuals.push_back(rec.cf);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Attribution rankings for the sequential flip protocol

struct AttributionSettings {
  LimeConfig lime;                // seed is replaced per instance
  std::size_t lime_absent_pool = 50;
  std::size_t shap_permutations = 200;
  std::uint64_t seed = 7;
};

struct AttributionRankings {
  MethodRankings lime{"lime", {}};
  MethodRankings shap{"shap", {}};
};

// LIME perturbs the active features plus the absent features with the largest
// single-toggle gain toward the favorable class; SHAP uses the empty profile
// as baseline. Each instance gets its own RNG stream keyed by profile id.
inline AttributionRankings attribution_rankings(const Predictor& predictor,
                                                const ExplainedBatch& batch,
                                                const AttributionSettings& s,
                                                std::size_t workers) {
  const std::size_t n = batch.instances.size();
  AttributionRankings out;
  out.lime.per_instance.resize(n);
  out.shap.per_instance.resize(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const BinaryVector& x = batch.instances[i];
    const std::uint64_t id = batch.profile_ids[i];
    std::vector<SkillId> absent;
    for (std::size_t f = 0; f < x.size(); ++f) {
      if (!x.test(static_cast<SkillId>(f))) absent.push_back(static_cast<SkillId>(f));
    }
    auto ranked = rank_single_toggles(predictor, x, absent, Outcome::kFavorable);
    std::vector<SkillId> pool;
    for (std::size_t j = 0; j < ranked.size() && j < s.lime_absent_pool; ++j) {
      pool.push_back(ranked[j].first);
    }
    LimeConfig lc = s.lime;
    lc.seed = derive_seed(s.seed, 2 * id);
    out.lime.per_instance[i] = lime_like(predictor, x, pool, lc).ranking;
    if (x.count() > 0) {
      out.shap.per_instance[i] =
          shap_like(predictor, x, BinaryVector(x.size()), s.shap_permutations,
                    derive_seed(s.seed, 2 * id + 1))
              .ranking;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Protocol reports

struct SequentialReport {
  std::vector<FlipCurve> curves;  // lime, shap, sedc
  std::size_t max_counterfactual_size = 0;
  std::size_t n_found = 0;
  std::size_t n_instances = 0;
};

inline SequentialReport sequential_report(const ThresholdClassifier& classifier,
                                          const ExplainedBatch& batch,
                                          const AttributionRankings& attribution,
                                          std::size_t k_max, std::size_t workers) {
  SequentialReport r;
  MethodRankings sedc{"sedc", {}};
  for (const auto& cf : batch.counterfactuals) {
    sedc.per_instance.push_back(change_ranking(cf));
    r.max_counterfactual_size = std::max(r.max_counterfactual_size, cf.size());
    if (cf.status == SearchStatus::kFound) ++r.n_found;
  }
  r.n_instances = batch.instances.size();
  const std::vector<MethodRankings> methods{attribution.lime, attribution.shap, sedc};
  r.curves = sequential_flip_eval(classifier, batch.instances, methods, k_max, workers);
  return r;
}

struct AggregateReport {
  FlipCurve demand;     // "avg"
  FlipCurve aggregate;  // "sedc"
  FrequencyTable counterfactual_counts;
  FrequencyTable demand_counts;
  // Same protocol scored with the exact job-reach label instead of the model.
  FlipCurve demand_by_label;
  FlipCurve aggregate_by_label;
};

// Global top-k protocol where an instance counts as flipped once its true job
// reach exceeds `threshold`. A diagnostic for how much of a model-scored
// curve reflects the market rather than the model.
inline FlipCurve global_topk_label_flip(const MarketDataset& dataset,
                                        std::span<const BinaryVector> instances,
                                        std::span<const SkillId> ranked, std::size_t k_max,
                                        double threshold, std::string method,
                                        std::size_t workers) {
  if (instances.empty()) throw Error(ErrorCode::kEmptyBatch, "no instances");
  if (k_max < 1) throw Error(ErrorCode::kInvalidK, "k_max must be >= 1");
  const ReachIndex index(dataset.jobs, dataset.universe.size(), dataset.fulfillment_fraction);
  std::vector<std::size_t> first(instances.size(), 0);
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    BinaryVector work = instances[i];
    for (std::size_t k = 1; k <= std::min(k_max, ranked.size()); ++k) {
      work.set(ranked[k - 1]);
      if (static_cast<double>(index.reach(work.active())) > threshold) {
        first[i] = k;
        return;
      }
    }
  });
  FlipCurve curve{std::move(method), std::vector<double>(k_max, 0.0)};
  for (std::size_t k = 1; k <= k_max; ++k) {
    const auto n = std::count_if(first.begin(), first.end(),
                                 [k](std::size_t f) { return f >= 1 && f <= k; });
    curve.flip_pct[k - 1] =
        100.0 * static_cast<double>(n) / static_cast<double>(instances.size());
  }
  return curve;
}

inline AggregateReport aggregate_report(const ThresholdClassifier& classifier,
                                        const MarketDataset& dataset,
                                        const ExplainedBatch& batch, std::size_t k_max,
                                        std::size_t workers) {
  AggregateReport r;
  r.counterfactual_counts = counterfactual_frequency(batch.counterfactuals);
  r.demand_counts = demand_frequency(dataset.jobs);
  r.demand = global_topk_flip_eval(classifier, batch.instances,
                                   frequency_ranking(r.demand_counts, k_max), k_max, "avg",
                                   workers);
  r.aggregate = global_topk_flip_eval(classifier, batch.instances,
                                      frequency_ranking(r.counterfactual_counts, k_max),
                                      k_max, "sedc", workers);
  r.demand_by_label = global_topk_label_flip(
      dataset, batch.instances, frequency_ranking(r.demand_counts, k_max), k_max,
      classifier.threshold(), "avg", workers);
  r.aggregate_by_label = global_topk_label_flip(
      dataset, batch.instances, frequency_ranking(r.counterfactual_counts, k_max), k_max,
      classifier.threshold(), "sedc", workers);
  return r;
}

inline nlohmann::ordered_json sparsity_json(const SparsityStats& s) {
  return nlohmann::ordered_json{{"n", s.n},
                                {"mean_changes", s.mean_changes},
                                {"std_changes_population", s.std_changes},
                                {"mean_active", s.mean_active}};
}

inline nlohmann::ordered_json timing_json(const TimingStats& t) {
  return nlohmann::ordered_json{{"n", t.n},
                                {"mean_s", t.mean_s},
                                {"std_s_population", t.std_s},
                                {"max_s", t.max_s}};
}

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline nlohmann::ordered_json checks_json(std::span<const Check> checks) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    arr.push_back(nlohmann::ordered_json{
        {"check", c.name}, {"status", c.passed ? "pass" : "fail"}, {"detail", c.detail}});
  }
  return arr;
}

inline std::vector<Check> sequential_checks(const SequentialReport& r) {
  std::vector<Check> checks;
  bool monotone = true;
  for (const auto& c : r.curves) monotone = monotone && is_monotone(c);
  checks.push_back({"flip curves monotone", monotone, ""});
  const FlipCurve& sedc = r.curves.back();
  bool dominates_all = true;
  for (std::size_t m = 0; m + 1 < r.curves.size(); ++m) {
    dominates_all = dominates_all && dominates(sedc, r.curves[m]);
  }
  checks.push_back({"sedc >= lime and shap at every k", dominates_all, ""});
  if (r.max_counterfactual_size >= 1 && r.max_counterfactual_size <= sedc.flip_pct.size()) {
    const double at_max = sedc.flip_pct[r.max_counterfactual_size - 1];
    checks.push_back({"sedc reaches 100% at k = max counterfactual size",
                      at_max == 100.0,
                      "k=" + std::to_string(r.max_counterfactual_size) +
                          " flip_pct=" + format_real(at_max)});
  } else {
    checks.push_back({"sedc reaches 100% at k = max counterfactual size", false,
                      "max counterfactual size " +
                          std::to_string(r.max_counterfactual_size) + " outside 1..k_max"});
  }
  return checks;
}

inline std::vector<Check> aggregate_checks(const AggregateReport& r, std::uint64_t seed) {
  std::vector<Check> checks;
  checks.push_back({"aggregate curves monotone",
                    is_monotone(r.demand) && is_monotone(r.aggregate), ""});
  std::string detail;
  for (std::size_t k = 0; k < r.aggregate.flip_pct.size(); ++k) {
    if (r.aggregate.flip_pct[k] < r.demand.flip_pct[k]) {
      detail += "k=" + std::to_string(k + 1) + " sedc=" +
                format_real(r.aggregate.flip_pct[k]) +
                " avg=" + format_real(r.demand.flip_pct[k]) + "; ";
    }
  }
  const bool ok = detail.empty();
  if (!ok) detail = "violated on seed " + std::to_string(seed) + ": " + detail;
  checks.push_back({"sedc-aggregate >= avg at every k", ok, detail});
  return checks;
}

// ---------------------------------------------------------------------------
// Full benchmark run

struct BenchConfig {
  MarketSpec market;
  GbtParams gbt;
  double percentile = 90.0;
  std::size_t n_guide = 1000;
  std::size_t n_explain = 200;
  SearchConfig guide = SearchConfig::Addition();
  SearchConfig explain = SearchConfig::Removal();
  std::size_t k_sequential = 5;
  std::size_t k_aggregate = 10;
  AttributionSettings attribution;
  std::size_t workers = 0;
};

inline nlohmann::ordered_json bench_config_json(const BenchConfig& c) {
  using nlohmann::ordered_json;
  auto search_json = [](const SearchConfig& s) {
    return ordered_json{{"mode", mode_name(s.mode)},
                        {"target", outcome_name(s.target)},
                        {"max_set_size", s.max_set_size},
                        {"max_expansions", s.max_expansions},
                        {"time_budget_s", s.time_budget_s},
                        {"candidate_pool", s.candidate_pool},
                        {"locked", s.locked}};
  };
  return ordered_json{
      {"seed", c.market.seed},
      {"competencies", c.market.sizes.competency},
      {"studies", c.market.sizes.study},
      {"study_areas", c.market.sizes.study_area},
      {"languages", c.market.sizes.language},
      {"jobs", c.market.n_jobs},
      {"skills_per_job", c.market.skills_per_job_mean},
      {"profiles", c.market.n_profiles},
      {"skills_per_profile", c.market.skills_per_profile_mean},
      {"rho", c.market.fulfillment_fraction},
      {"trees", c.gbt.n_trees},
      {"depth", c.gbt.max_depth},
      {"learning_rate", c.gbt.learning_rate},
      {"train_fraction", c.gbt.train_fraction},
      {"min_samples_leaf", c.gbt.min_samples_leaf},
      {"percentile", c.percentile},
      {"n_guide", c.n_guide},
      {"n_explain", c.n_explain},
      {"guide_search", search_json(c.guide)},
      {"explain_search", search_json(c.explain)},
      {"k_sequential", c.k_sequential},
      {"k_aggregate", c.k_aggregate},
      {"lime_samples", c.attribution.lime.n_samples},
      {"lime_top", c.attribution.lime.n_top},
      {"lime_absent_pool", c.attribution.lime_absent_pool},
      {"shap_permutations", c.attribution.shap_permutations},
  };
}

struct BenchResult {
  MarketDataset dataset;
  TrainResult trained;
  TrainingMetrics metrics;
  std::shared_ptr<const Predictor> predictor;
  std::unique_ptr<ThresholdClassifier> classifier;
  ExplainedBatch guide;
  ExplainedBatch explain;
  SequentialReport sequential;
  AggregateReport aggregate;
  SparsityStats sparsity;
  TimingStats guide_timing;
  std::vector<Check> checks;
};

// Runs data generation, training, guidance and explanation batches and both
// protocols, writing every artifact into `out_dir`.
inline BenchResult run_bench(const BenchConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
  const std::size_t workers = config.workers;
  const std::uint64_t seed = config.market.seed;

  BenchResult r;
  r.dataset = generate_dataset(config.market, workers);
  save_dataset(r.dataset, path("data.jsonl"));

  r.trained = train_gbt(r.dataset, config.gbt, seed);
  save_model(r.trained.model, path("model.json"));
  r.metrics = training_metrics(r.dataset, r.trained, config.percentile);
  r.metrics.config = bench_config_json(config);
  write_text_file(path("metrics.json"), serialize_metrics(r.metrics));

  r.predictor = std::make_shared<const GbtModel>(r.trained.model);
  r.classifier = std::make_unique<ThresholdClassifier>(r.predictor, r.metrics.threshold);

  const auto guide_rows = select_rows(r.dataset, r.metrics, Split::kTest, *r.classifier,
                                      Outcome::kUnfavorable, config.n_guide, seed);
  r.guide = run_batch(r.dataset, guide_rows, *r.classifier, config.guide, workers);
  write_counterfactuals(path("guide.jsonl"), r.guide);

  const auto explain_rows = select_rows(r.dataset, r.metrics, Split::kTest, *r.classifier,
                                        Outcome::kFavorable, config.n_explain, seed + 1);
  r.explain = run_batch(r.dataset, explain_rows, *r.classifier, config.explain, workers);
  write_counterfactuals(path("explain.jsonl"), r.explain);

  AttributionSettings attribution = config.attribution;
  attribution.seed = seed;
  const auto rankings = attribution_rankings(*r.predictor, r.guide, attribution, workers);
  r.sequential = sequential_report(*r.classifier, r.guide, rankings, config.k_sequential,
                                   workers);
  write_text_file(path("table1.csv"), flip_curves_csv(r.sequential.curves));
  write_text_file(path("table1.json"), flip_curves_json(r.sequential.curves).dump(2) + "\n");

  r.aggregate = aggregate_report(*r.classifier, r.dataset, r.guide, config.k_aggregate,
                                 workers);
  const std::vector<FlipCurve> table2{r.aggregate.demand, r.aggregate.aggregate};
  write_text_file(path("table2.csv"), flip_curves_csv(table2));
  write_text_file(path("table2.json"), flip_curves_json(table2).dump(2) + "\n");
  write_text_file(path("cf_frequency.csv"),
                  frequency_csv(r.aggregate.counterfactual_counts, r.dataset.universe));
  write_text_file(path("demand_frequency.csv"),
                  frequency_csv(r.aggregate.demand_counts, r.dataset.universe));

  r.sparsity = sparsity_stats(r.guide.counterfactuals, r.guide.instances);
  r.guide_timing = timing_stats(r.guide.counterfactuals);
  write_text_file(path("timing.json"),
                  nlohmann::ordered_json{{"guide", timing_json(r.guide_timing)}}.dump(2) +
                      "\n");

  r.checks = sequential_checks(r.sequential);
  for (auto& c : aggregate_checks(r.aggregate, seed)) r.checks.push_back(std::move(c));
  r.checks.push_back({"sparsity: mean changes <= 0.5 x mean active",
                      r.sparsity.mean_changes <= 0.5 * r.sparsity.mean_active,
                      format_real(r.sparsity.mean_changes) + " vs " +
                          format_real(r.sparsity.mean_active)});

  nlohmann::ordered_json report;
  report["config"] = bench_config_json(config);
  report["test_rmse"] = r.metrics.test_rmse;
  report["threshold"] = r.metrics.threshold;
  report["guide"] = nlohmann::ordered_json{{"instances", r.guide.instances.size()},
                                           {"found", r.sequential.n_found}};
  report["sparsity"] = sparsity_json(r.sparsity);
  report["table1"] = flip_curves_json(r.sequential.curves);
  report["table2"] = flip_curves_json(table2);
  const std::vector<FlipCurve> by_label{r.aggregate.demand_by_label,
                                        r.aggregate.aggregate_by_label};
  report["table2_by_label"] = flip_curves_json(by_label);
  report["checks"] = checks_json(r.checks);
  write_text_file(path("report.json"), report.dump(2) + "\n");
  return r;
}

}  // namespace skillcf
