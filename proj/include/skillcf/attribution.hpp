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

// Feature-attribution baselines: a local weighted linear surrogate
// (LIME-like), a Monte-Carlo permutation Shapley estimator, and exact
// Shapley values by subset enumeration for small instances.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "json.hpp"
#include "skillcf/common.hpp"
#include "skillcf/model.hpp"
#include "skillcf/random.hpp"

namespace skillcf {

struct AttributionResult {
  std::vector<SkillId> features;  // considered features, ascending id
  std::vector<double> scores;     // parallel to `features`
  std::vector<SkillId> ranking;   // by |score| descending, ties by lower id
  std::size_t n_samples_used = 0;

  double score_of(SkillId id) const {
    const auto it = std::lower_bound(features.begin(), features.end(), id);
    if (it == features.end() || *it != id) {
      throw Error(ErrorCode::kInvalidArgument,
                  "feature " + std::to_string(id) + " was not considered");
    }
    return scores[static_cast<std::size_t>(it - features.begin())];
  }
};

namespace detail {

inline AttributionResult make_attribution(std::vector<SkillId> features,
                                          std::vector<double> scores,
                                          std::size_t n_samples) {
  std::vector<std::size_t> idx(features.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return features[a] < features[b];
  });
  AttributionResult r;
  r.n_samples_used = n_samples;
  for (std::size_t i : idx) {
    r.features.push_back(features[i]);
    r.scores.push_back(scores[i]);
  }
  std::vector<std::size_t> order(r.features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = std::abs(r.scores[a]);
    const double sb = std::abs(r.scores[b]);
    return sa > sb || (sa == sb && r.features[a] < r.features[b]);
  });
  for (std::size_t i : order) r.ranking.push_back(r.features[i]);
  return r;
}

inline std::vector<SkillId> differing_features(const BinaryVector& x,
                                               const BinaryVector& baseline) {
  if (x.size() != baseline.size()) {
    throw Error(ErrorCode::kShapeError, "baseline dimension does not match x");
  }
  std::vector<SkillId> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto f = static_cast<SkillId>(i);
    if (x.test(f) != baseline.test(f)) out.push_back(f);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// LIME-like local surrogate

struct LimeConfig {
  std::size_t n_samples = 1000;
  double kernel_width = 0.0;  // <= 0: 0.75 * sqrt(number of perturbed features)
  std::size_t n_top = 20;
  double ridge = 1e-3;
  std::uint64_t seed = 0;
};

// Perturbs x by toggling each active feature off and each of the given absent
// candidates on, independently with probability 1/2. Samples are weighted by
// exp(-H^2 / w^2) with H the Hamming distance to x, and a ridge-damped
// weighted least-squares fit maps toggle indicators to predictor scores. A
// feature's score is the fitted effect of toggling it. The first sample is x
// itself.
inline AttributionResult lime_like(const Predictor& predictor, const BinaryVector& x,
                                   std::span<const SkillId> absent_candidates,
                                   const LimeConfig& config) {
  if (config.n_samples < 50) {
    throw Error(ErrorCode::kInvalidArgument, "lime_like needs n_samples >= 50");
  }
  if (config.n_top < 1) throw Error(ErrorCode::kInvalidArgument, "n_top must be >= 1");
  if (x.size() != predictor.dimension()) {
    throw Error(ErrorCode::kShapeError, "instance dimension does not match predictor");
  }
  std::vector<SkillId> features = x.active();
  for (SkillId f : absent_candidates) {
    if (f >= x.size() || x.test(f)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "absent candidate " + std::to_string(f) + " is not absent in x");
    }
    features.push_back(f);
  }
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  const std::size_t d = features.size();
  if (d == 0) {
    throw Error(ErrorCode::kDegenerateSample, "no features to perturb");
  }
  const double width = config.kernel_width > 0.0
                           ? config.kernel_width
                           : 0.75 * std::sqrt(static_cast<double>(d));

  Rng rng(config.seed);
  const std::size_t n = config.n_samples;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + 1));
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  std::vector<double> log_weight(n);
  BinaryVector work = x;
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    design(row, 0) = 1.0;
    std::size_t hamming = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const bool toggle = s > 0 && rng.bernoulli(0.5);
      design(row, static_cast<Eigen::Index>(j + 1)) = toggle ? 1.0 : 0.0;
      if (toggle) {
        work.flip(features[j]);
        ++hamming;
      }
    }
    target(row) = predictor.score(work);
    for (std::size_t j = 0; j < d; ++j) {
      if (design(row, static_cast<Eigen::Index>(j + 1)) != 0.0) work.flip(features[j]);
    }
    const double h = static_cast<double>(hamming);
    log_weight[s] = -(h * h) / (width * width);
  }
  // All rows but the first are random; identical rows leave nothing to fit.
  bool varied = false;
  for (Eigen::Index r = 1; r < design.rows() && !varied; ++r) {
    varied = design.row(r) != design.row(0);
  }
  if (!varied) throw Error(ErrorCode::kDegenerateSample, "all samples identical");

  // Normalizing by the largest weight keeps tiny kernels from underflowing.
  const double max_log = *std::max_element(log_weight.begin(), log_weight.end());
  Eigen::VectorXd weight(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    weight(static_cast<Eigen::Index>(s)) = std::exp(log_weight[s] - max_log);
  }
  const Eigen::MatrixXd weighted = weight.asDiagonal() * design;
  Eigen::MatrixXd normal = design.transpose() * weighted;
  for (std::size_t j = 1; j <= d; ++j) {
    normal(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += config.ridge;
  }
  const Eigen::VectorXd rhs = weighted.transpose() * target;
  const Eigen::VectorXd coef = normal.ldlt().solve(rhs);

  std::vector<double> scores(d);
  for (std::size_t j = 0; j < d; ++j) scores[j] = coef(static_cast<Eigen::Index>(j + 1));
  AttributionResult full = detail::make_attribution(features, scores, n);
  if (full.ranking.size() <= config.n_top) return full;
  std::vector<SkillId> top(full.ranking.begin(),
                           full.ranking.begin() + static_cast<std::ptrdiff_t>(config.n_top));
  std::vector<double> top_scores;
  for (SkillId f : top) top_scores.push_back(full.score_of(f));
  return detail::make_attribution(std::move(top), std::move(top_scores), n);
}

// ---------------------------------------------------------------------------
// Shapley values

// Monte-Carlo permutation Shapley over the features where x differs from the
// baseline. Permutations are drawn in antithetic pairs (a random order and its
// reverse); each permutation switches the differing features from baseline to
// x one at a time and credits every feature with its marginal change.
inline AttributionResult shap_like(const Predictor& predictor, const BinaryVector& x,
                                   const BinaryVector& baseline,
                                   std::size_t n_permutations, std::uint64_t seed) {
  if (n_permutations < 10) {
    throw Error(ErrorCode::kInvalidArgument, "shap_like needs n_permutations >= 10");
  }
  if (x.size() != predictor.dimension()) {
    throw Error(ErrorCode::kShapeError, "instance dimension does not match predictor");
  }
  const auto features = detail::differing_features(x, baseline);
  const std::size_t n = features.size();
  if (n == 0) throw Error(ErrorCode::kEmptyCoalition, "x equals the baseline");

  Rng rng(seed);
  std::vector<double> phi(n, 0.0);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  BinaryVector work = baseline;
  const double start = predictor.score(baseline);
  auto walk = [&](auto begin, auto end) {
    double prev = start;
    for (auto it = begin; it != end; ++it) {
      work.flip(features[*it]);
      const double cur = predictor.score(work);
      phi[*it] += cur - prev;
      prev = cur;
    }
    for (auto it = begin; it != end; ++it) work.flip(features[*it]);
  };
  for (std::size_t p = 0; p < n_permutations; ++p) {
    if (p % 2 == 0) {
      rng.shuffle(std::span<std::size_t>(perm));
      walk(perm.begin(), perm.end());
    } else {
      walk(perm.rbegin(), perm.rend());
    }
  }
  for (double& v : phi) v /= static_cast<double>(n_permutations);
  return detail::make_attribution(features, phi, n_permutations);
}

inline constexpr std::size_t kMaxExactShapleyFeatures = 15;

// Exact Shapley values by enumerating all 2^n coalitions of the differing
// features: phi_i = sum_S |S|! (n-|S|-1)! / n! * (v(S + i) - v(S)).
inline AttributionResult exact_shapley(const Predictor& predictor, const BinaryVector& x,
                                       const BinaryVector& baseline) {
  if (x.size() != predictor.dimension()) {
    throw Error(ErrorCode::kShapeError, "instance dimension does not match predictor");
  }
  const auto features = detail::differing_features(x, baseline);
  const std::size_t n = features.size();
  if (n == 0) throw Error(ErrorCode::kEmptyCoalition, "x equals the baseline");
  if (n > kMaxExactShapleyFeatures) {
    throw Error(ErrorCode::kTooLarge, std::to_string(n) + " differing features exceeds " +
                                          std::to_string(kMaxExactShapleyFeatures));
  }
  const std::size_t n_masks = std::size_t{1} << n;
  std::vector<double> value(n_masks);
  BinaryVector work = baseline;
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool on = (mask >> i) & 1U;
      work.set(features[i], on ? x.test(features[i]) : baseline.test(features[i]));
    }
    value[mask] = predictor.score(work);
  }
  // weight[s] = s! (n-s-1)! / n!
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = std::exp(std::lgamma(static_cast<double>(s + 1)) +
                         std::lgamma(static_cast<double>(n - s)) -
                         std::lgamma(static_cast<double>(n + 1)));
  }
  std::vector<double> phi(n, 0.0);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    const auto s = static_cast<std::size_t>(std::popcount(mask));
    for (std::size_t i = 0; i < n; ++i) {
      if ((mask >> i) & 1U) continue;
      phi[i] += weight[s] * (value[mask | (std::size_t{1} << i)] - value[mask]);
    }
  }
  return detail::make_attribution(features, phi, n_masks);
}

// {"profile_id","method","scores":{id:score},"ranking":[ids]}
inline nlohmann::ordered_json attribution_to_json(const AttributionResult& r,
                                                  std::uint64_t profile_id,
                                                  std::string_view method) {
  using nlohmann::ordered_json;
  ordered_json scores = ordered_json::object();
  for (std::size_t i = 0; i < r.features.size(); ++i) {
    scores[std::to_string(r.features[i])] = r.scores[i];
  }
  ordered_json j;
  j["profile_id"] = profile_id;
  j["method"] = method;
  j["scores"] = std::move(scores);
  j["ranking"] = r.ranking;
  return j;
}

}  // namespace skillcf
