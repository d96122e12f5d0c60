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

// Evaluation protocols: per-instance sequential flipping along each method's
// ranking, global top-k flipping with one shared ranking, and sparsity and
// timing statistics of counterfactual batches.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "skillcf/common.hpp"
#include "skillcf/dataset.hpp"
#include "skillcf/model.hpp"
#include "skillcf/search.hpp"

namespace skillcf {

// flip_pct[k - 1] is the percentage of instances that reached the favorable
// class with at most k changes.
struct FlipCurve {
  std::string method;
  std::vector<double> flip_pct;
};

struct MethodRankings {
  std::string method;
  std::vector<std::vector<SkillId>> per_instance;
};

struct SparsityStats {
  double mean_changes = 0.0;
  double std_changes = 0.0;  // population
  double mean_active = 0.0;
  std::size_t n = 0;
};

struct TimingStats {
  double mean_s = 0.0;
  double std_s = 0.0;  // population
  double max_s = 0.0;
  std::size_t n = 0;
};

using FrequencyTable = std::vector<std::pair<SkillId, std::uint64_t>>;

namespace detail {

inline void check_flip_inputs(const ThresholdClassifier& classifier,
                              std::span<const BinaryVector> instances,
                              std::size_t k_max) {
  if (instances.empty()) throw Error(ErrorCode::kEmptyBatch, "no instances");
  if (k_max < 1) throw Error(ErrorCode::kInvalidK, "k_max must be >= 1");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (classifier.classify(instances[i]) != Outcome::kUnfavorable) {
      throw Error(ErrorCode::kPreconditionError,
                  "instance " + std::to_string(i) + " is not unfavorable");
    }
  }
}

inline void check_duplicate_free(std::span<const SkillId> ranking,
                                 std::size_t dimension) {
  std::vector<SkillId> sorted(ranking.begin(), ranking.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::kPreconditionError, "ranking contains duplicates");
  }
  if (!sorted.empty() && sorted.back() >= dimension) {
    throw Error(ErrorCode::kPreconditionError, "ranking feature out of range");
  }
}

// Converts per-instance "first flipped at k" into a flipped-by-k curve.
inline FlipCurve to_curve(std::string method, std::span<const std::size_t> first_flip,
                          std::size_t k_max) {
  FlipCurve curve;
  curve.method = std::move(method);
  curve.flip_pct.assign(k_max, 0.0);
  std::vector<std::size_t> count(k_max + 1, 0);
  for (std::size_t k : first_flip) {
    if (k >= 1 && k <= k_max) ++count[k];
  }
  std::size_t cumulative = 0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    cumulative += count[k];
    curve.flip_pct[k - 1] =
        100.0 * static_cast<double>(cumulative) / static_cast<double>(first_flip.size());
  }
  return curve;
}

inline FrequencyTable sorted_counts(const std::map<SkillId, std::uint64_t>& counts) {
  FrequencyTable out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  return out;
}

}  // namespace detail

// For each method and k, inverts the first min(k, |ranking|) ranked features
// of each instance and records whether the instance is favorable; an instance
// counts from the first k at which it flips.
inline std::vector<FlipCurve> sequential_flip_eval(
    const ThresholdClassifier& classifier, std::span<const BinaryVector> instances,
    std::span<const MethodRankings> rankings, std::size_t k_max,
    std::size_t workers = 1) {
  detail::check_flip_inputs(classifier, instances, k_max);
  std::vector<FlipCurve> curves;
  for (const auto& method : rankings) {
    if (method.per_instance.size() != instances.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "method '" + method.method + "' has " +
                      std::to_string(method.per_instance.size()) + " rankings for " +
                      std::to_string(instances.size()) + " instances");
    }
    for (const auto& r : method.per_instance) {
      detail::check_duplicate_free(r, classifier.dimension());
    }
    std::vector<std::size_t> first_flip(instances.size(), 0);
    parallel_for(instances.size(), workers, [&](std::size_t i) {
      BinaryVector work = instances[i];
      const auto& ranking = method.per_instance[i];
      const std::size_t steps = std::min(k_max, ranking.size());
      for (std::size_t k = 1; k <= steps; ++k) {
        work.flip(ranking[k - 1]);
        if (classifier.classify(work) == Outcome::kFavorable) {
          first_flip[i] = k;
          return;
        }
      }
    });
    curves.push_back(detail::to_curve(method.method, first_flip, k_max));
  }
  return curves;
}

// Sets the same top-k features to present in every instance.
inline FlipCurve global_topk_flip_eval(const ThresholdClassifier& classifier,
                                       std::span<const BinaryVector> instances,
                                       std::span<const SkillId> ranked_features,
                                       std::size_t k_max, std::string method,
                                       std::size_t workers = 1) {
  detail::check_flip_inputs(classifier, instances, k_max);
  detail::check_duplicate_free(ranked_features, classifier.dimension());
  std::vector<std::size_t> first_flip(instances.size(), 0);
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    BinaryVector work = instances[i];
    const std::size_t steps = std::min(k_max, ranked_features.size());
    for (std::size_t k = 1; k <= steps; ++k) {
      work.set(ranked_features[k - 1]);
      if (classifier.classify(work) == Outcome::kFavorable) {
        first_flip[i] = k;
        return;
      }
    }
  });
  return detail::to_curve(std::move(method), first_flip, k_max);
}

namespace detail {

inline std::pair<double, double> mean_and_population_std(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

}  // namespace detail

// Statistics over the found counterfactuals; `instances[i]` is the factual
// instance of `counterfactuals[i]`.
inline SparsityStats sparsity_stats(std::span<const Counterfactual> counterfactuals,
                                    std::span<const BinaryVector> instances) {
  if (counterfactuals.size() != instances.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one instance per counterfactual required");
  }
  std::vector<double> sizes;
  double active = 0.0;
  for (std::size_t i = 0; i < counterfactuals.size(); ++i) {
    if (counterfactuals[i].status != SearchStatus::kFound) continue;
    sizes.push_back(static_cast<double>(counterfactuals[i].size()));
    active += static_cast<double>(instances[i].count());
  }
  if (sizes.empty()) throw Error(ErrorCode::kEmptyBatch, "no found counterfactuals");
  SparsityStats s;
  std::tie(s.mean_changes, s.std_changes) = detail::mean_and_population_std(sizes);
  s.mean_active = active / static_cast<double>(sizes.size());
  s.n = sizes.size();
  return s;
}

inline TimingStats timing_stats(std::span<const Counterfactual> counterfactuals) {
  std::vector<double> times;
  for (const auto& cf : counterfactuals) {
    if (cf.status == SearchStatus::kFound) times.push_back(cf.elapsed_s);
  }
  if (times.empty()) throw Error(ErrorCode::kEmptyBatch, "no found counterfactuals");
  TimingStats t;
  std::tie(t.mean_s, t.std_s) = detail::mean_and_population_std(times);
  t.max_s = *std::max_element(times.begin(), times.end());
  t.n = times.size();
  return t;
}

// Occurrences of each skill across all change sets, by count descending then
// id ascending.
inline FrequencyTable counterfactual_frequency(
    std::span<const Counterfactual> counterfactuals) {
  std::map<SkillId, std::uint64_t> counts;
  for (const auto& cf : counterfactuals) {
    for (const Change& c : cf.changes) ++counts[c.skill];
  }
  return detail::sorted_counts(counts);
}

inline FrequencyTable demand_frequency(std::span<const JobPosting> jobs) {
  if (jobs.empty()) throw Error(ErrorCode::kEmptyBatch, "no jobs");
  std::map<SkillId, std::uint64_t> counts;
  for (const auto& job : jobs) {
    for (SkillId s : job.required) ++counts[s];
  }
  return detail::sorted_counts(counts);
}

inline std::vector<SkillId> frequency_ranking(const FrequencyTable& table,
                                              std::size_t limit) {
  std::vector<SkillId> out;
  for (std::size_t i = 0; i < table.size() && i < limit; ++i) {
    out.push_back(table[i].first);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string format_real(double v, int precision = 4) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed,
                                 precision);
  return std::string(buf, res.ptr);
}

// method,k,flip_pct
inline std::string flip_curves_csv(std::span<const FlipCurve> curves) {
  std::string out = "method,k,flip_pct\n";
  for (const auto& c : curves) {
    for (std::size_t k = 1; k <= c.flip_pct.size(); ++k) {
      out += c.method + "," + std::to_string(k) + "," + format_real(c.flip_pct[k - 1]) +
             "\n";
    }
  }
  return out;
}

inline nlohmann::ordered_json flip_curves_json(std::span<const FlipCurve> curves) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : curves) {
    arr.push_back(nlohmann::ordered_json{{"method", c.method}, {"flip_pct", c.flip_pct}});
  }
  return arr;
}

// skill_id,name,count
inline std::string frequency_csv(const FrequencyTable& table,
                                 const SkillUniverse& universe) {
  std::string out = "skill_id,name,count\n";
  for (const auto& [id, count] : table) {
    const std::string name = id < universe.size() ? universe.skills[id].name : "";
    out += std::to_string(id) + "," + name + "," + std::to_string(count) + "\n";
  }
  return out;
}

inline bool is_monotone(const FlipCurve& c) {
  for (std::size_t k = 1; k < c.flip_pct.size(); ++k) {
    if (c.flip_pct[k] < c.flip_pct[k - 1]) return false;
  }
  return true;
}

// True when `a` is at least `b` at every k.
inline bool dominates(const FlipCurve& a, const FlipCurve& b) {
  const std::size_t n = std::min(a.flip_pct.size(), b.flip_pct.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (a.flip_pct[k] < b.flip_pct[k]) return false;
  }
  return true;
}

}  // namespace skillcf
