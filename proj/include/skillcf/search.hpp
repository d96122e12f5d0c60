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

// Greedy best-first counterfactual search over sets of binary feature
// toggles (SEDC-style). Removal mode switches present features off to
// explain a decision; addition mode switches absent features on to give
// guidance.
//
// A search node is a set of toggles. Nodes are ordered by
//   1. distance to the threshold in the target direction plus a small
//      cost term (lambda * total cost, lambda = 1e-6 * (|threshold| + 1)),
//   2. total feature cost,
//   3. lexicographic order of the sorted feature ids.
// Expanding a node generates every one-feature extension. As soon as an
// expansion produces children that reach the target class, the best of
// them is pruned to an irreducible set and returned.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "skillcf/common.hpp"
#include "skillcf/model.hpp"

namespace skillcf {

enum class SearchMode { kRemoval, kAddition };

inline std::string_view mode_name(SearchMode m) {
  return m == SearchMode::kRemoval ? "removal" : "addition";
}

enum class Direction { kRemove, kAdd };  // 1->0 and 0->1

inline std::string_view direction_name(Direction d) {
  return d == Direction::kRemove ? "1->0" : "0->1";
}

struct Change {
  SkillId skill = 0;
  Direction direction = Direction::kRemove;

  friend bool operator==(const Change&, const Change&) = default;
};

enum class SearchStatus { kFound, kNotFound, kAlreadyTarget };

inline std::string_view status_name(SearchStatus s) {
  switch (s) {
    case SearchStatus::kFound: return "found";
    case SearchStatus::kNotFound: return "not_found";
    case SearchStatus::kAlreadyTarget: return "already_target";
  }
  return "not_found";
}

struct SearchConfig {
  SearchMode mode = SearchMode::kRemoval;
  Outcome target = Outcome::kUnfavorable;
  std::size_t max_set_size = 10;
  std::size_t max_expansions = 50'000;
  double time_budget_s = 120.0;
  std::size_t candidate_pool = 200;  // addition mode only
  std::vector<SkillId> locked;
  std::vector<double> feature_costs;  // empty: unit cost for every feature

  static SearchConfig Removal() { return {}; }

  static SearchConfig Addition() {
    SearchConfig c;
    c.mode = SearchMode::kAddition;
    c.target = Outcome::kFavorable;
    return c;
  }

  void validate(std::size_t dimension) const {
    if (max_set_size < 1) {
      throw Error(ErrorCode::kInvalidArgument, "max_set_size must be >= 1");
    }
    if (mode == SearchMode::kAddition && candidate_pool < max_set_size) {
      throw Error(ErrorCode::kInvalidArgument,
                  "candidate_pool must be >= max_set_size in addition mode");
    }
    if (!feature_costs.empty()) {
      if (feature_costs.size() != dimension) {
        throw Error(ErrorCode::kInvalidArgument,
                    "feature_costs must have one entry per feature");
      }
      for (double c : feature_costs) {
        if (!(c >= 1.0) || !std::isfinite(c)) {
          throw Error(ErrorCode::kInvalidArgument, "feature costs must be >= 1");
        }
      }
    }
    for (SkillId id : locked) {
      if (id >= dimension) {
        throw Error(ErrorCode::kInvalidArgument,
                    "locked feature " + std::to_string(id) + " out of range");
      }
    }
  }
};

struct Counterfactual {
  SearchStatus status = SearchStatus::kNotFound;
  SearchMode mode = SearchMode::kRemoval;
  std::vector<Change> changes;  // best-first inclusion order
  double score_before = 0.0;
  double score_after = 0.0;
  Outcome class_before = Outcome::kUnfavorable;
  Outcome class_after = Outcome::kUnfavorable;
  std::size_t expansions_used = 0;
  double elapsed_s = 0.0;
  std::string reason;  // set when not found

  std::size_t size() const { return changes.size(); }
};

class NoCounterfactualFound : public Error {
 public:
  NoCounterfactualFound(const std::string& reason, std::size_t expansions,
                        double best_score)
      : Error(ErrorCode::kNoCounterfactualFound,
              reason + " after " + std::to_string(expansions) + " expansions"),
        reason_(reason),
        expansions_used_(expansions),
        best_score_(best_score) {}

  const std::string& reason() const { return reason_; }
  std::size_t expansions_used() const { return expansions_used_; }
  double best_score() const { return best_score_; }

 private:
  std::string reason_;
  std::size_t expansions_used_;
  double best_score_;
};

// Applies the toggles to a copy of x. Each change must match the current
// value of its feature (a removal needs a present feature and vice versa).
inline BinaryVector apply_changes(const BinaryVector& x,
                                  std::span<const Change> changes) {
  BinaryVector out = x;
  for (const Change& c : changes) {
    if (c.skill >= out.size()) {
      throw Error(ErrorCode::kShapeError, "change outside feature range");
    }
    const bool present = out.test(c.skill);
    if (present != (c.direction == Direction::kRemove)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "change " + std::to_string(c.skill) +
                      " does not match the instance's value");
    }
    out.flip(c.skill);
  }
  return out;
}

inline std::vector<SkillId> change_ranking(const Counterfactual& cf) {
  std::vector<SkillId> out;
  out.reserve(cf.changes.size());
  for (const Change& c : cf.changes) out.push_back(c.skill);
  return out;
}

// Single-toggle effect of every candidate, sorted by gain toward `target`
// (largest first, ties by lower id). Gain is the score increase when the
// target is favorable and the score decrease otherwise.
inline std::vector<std::pair<SkillId, double>> rank_single_toggles(
    const Predictor& predictor, const BinaryVector& x,
    std::span<const SkillId> candidates, Outcome target) {
  const double sign = target == Outcome::kFavorable ? 1.0 : -1.0;
  BinaryVector w = x;
  const double base = predictor.score(w);
  std::vector<std::pair<SkillId, double>> out;
  out.reserve(candidates.size());
  for (SkillId f : candidates) {
    w.flip(f);
    out.emplace_back(f, sign * (predictor.score(w) - base));
    w.flip(f);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second > b.second || (a.second == b.second && a.first < b.first);
  });
  return out;
}

// Removes toggles whose removal keeps the target class, scanning from the
// most recently added toggle backwards until nothing more can be dropped.
inline std::vector<Change> irreducibility_pass(const ThresholdClassifier& classifier,
                                               const BinaryVector& x,
                                               std::vector<Change> changes,
                                               Outcome target) {
  classifier.check_shape(x);
  auto reaches = [&](std::span<const Change> cs) {
    return classifier.classify(apply_changes(x, cs)) == target;
  };
  if (!reaches(changes)) {
    throw Error(ErrorCode::kNotACounterfactual,
                "the given changes do not reach the target class");
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = changes.size(); i-- > 0;) {
      std::vector<Change> trial;
      trial.reserve(changes.size() - 1);
      for (std::size_t j = 0; j < changes.size(); ++j) {
        if (j != i) trial.push_back(changes[j]);
      }
      if (reaches(trial)) {
        changes = std::move(trial);
        changed = true;
      }
    }
  }
  return changes;
}

namespace detail {

class BestFirstSearch {
 public:
  BestFirstSearch(const ThresholdClassifier& classifier, const BinaryVector& x,
                  const SearchConfig& config)
      : classifier_(classifier),
        predictor_(classifier.predictor()),
        x_(x),
        config_(config),
        lambda_(1e-6 * (std::abs(classifier.threshold()) + 1.0)) {}

  Counterfactual run() {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
    };
    classifier_.check_shape(x_);
    config_.validate(x_.size());

    Counterfactual cf;
    cf.mode = config_.mode;
    cf.score_before = predictor_.score(x_);
    cf.class_before = classifier_.outcome_of(cf.score_before);
    cf.score_after = cf.score_before;
    cf.class_after = cf.class_before;
    if (cf.class_before == config_.target) {
      cf.status = SearchStatus::kAlreadyTarget;
      cf.elapsed_s = elapsed();
      return cf;
    }

    const std::vector<SkillId> candidates = collect_candidates();
    best_distance_ = distance(cf.score_before);
    best_score_ = cf.score_before;
    if (candidates.empty()) {
      return not_found(cf, "no candidate features", elapsed());
    }
    std::vector<std::uint8_t> in_node(x_.size(), 0);
    BinaryVector work = x_;

    nodes_.push_back(Node{distance(cf.score_before), 0.0, 0, 0, 0});
    visited_.insert(0);
    std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, Worse> frontier{
        Worse{this}};
    frontier.push(0);

    while (!frontier.empty()) {
      if (expansions_ >= config_.max_expansions) {
        return not_found(cf, "expansion budget exhausted", elapsed());
      }
      if (elapsed() > config_.time_budget_s) {
        return not_found(cf, "time budget exhausted", elapsed());
      }
      const std::uint32_t parent_index = frontier.top();
      frontier.pop();
      ++expansions_;
      const Node parent = nodes_[parent_index];
      const std::vector<SkillId> parent_order(order_of(parent).begin(),
                                              order_of(parent).end());
      for (SkillId f : parent_order) {
        work.flip(f);
        in_node[f] = 1;
      }

      std::int64_t best_flip = -1;
      for (SkillId c : candidates) {
        if (in_node[c]) continue;
        const std::uint64_t h = parent.hash ^ zobrist(c);
        if (!visited_.insert(h).second) continue;
        work.flip(c);
        const double s = predictor_.score(work);
        work.flip(c);
        const bool flips = classifier_.outcome_of(s) == config_.target;
        const std::size_t child_size = parent.size + 1;
        if (!flips && child_size >= config_.max_set_size) continue;

        const auto child_index = static_cast<std::uint32_t>(nodes_.size());
        push_child(parent, parent_order, c, s);
        if (distance(s) < best_distance_) {
          best_distance_ = distance(s);
          best_score_ = s;
        }
        if (flips) {
          if (best_flip < 0 || worse(static_cast<std::uint32_t>(best_flip), child_index)) {
            best_flip = child_index;
          }
        } else {
          frontier.push(child_index);
        }
      }

      for (SkillId f : parent_order) {
        work.flip(f);
        in_node[f] = 0;
      }

      if (best_flip >= 0) {
        const auto order = order_of(nodes_[static_cast<std::size_t>(best_flip)]);
        std::vector<Change> changes;
        changes.reserve(order.size());
        for (SkillId f : order) {
          changes.push_back(Change{f, x_.test(f) ? Direction::kRemove : Direction::kAdd});
        }
        cf.changes = irreducibility_pass(classifier_, x_, std::move(changes),
                                         config_.target);
        cf.score_after = predictor_.score(apply_changes(x_, cf.changes));
        cf.class_after = classifier_.outcome_of(cf.score_after);
        cf.status = SearchStatus::kFound;
        cf.expansions_used = expansions_;
        cf.elapsed_s = elapsed();
        return cf;
      }
    }
    return not_found(cf, "candidate pool exhausted", elapsed());
  }

 private:
  struct Node {
    double key;
    double cost;
    std::uint64_t hash;
    std::uint32_t offset;  // into arena_: `size` ids in inclusion order, then sorted
    std::uint32_t size;
  };

  struct Worse {
    const BestFirstSearch* self;
    bool operator()(std::uint32_t a, std::uint32_t b) const { return self->worse(a, b); }
  };

  // True when node a should be expanded after node b.
  bool worse(std::uint32_t a, std::uint32_t b) const {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.key != nb.key) return na.key > nb.key;
    if (na.cost != nb.cost) return na.cost > nb.cost;
    const auto sa = sorted_of(na);
    const auto sb = sorted_of(nb);
    return std::lexicographical_compare(sb.begin(), sb.end(), sa.begin(), sa.end());
  }

  std::span<const SkillId> order_of(const Node& n) const {
    return {arena_.data() + n.offset, n.size};
  }
  std::span<const SkillId> sorted_of(const Node& n) const {
    return {arena_.data() + n.offset + n.size, n.size};
  }

  // How far the score still is from the target side of the threshold;
  // <= 0 for favorable targets means crossed, and the class test is the
  // authority on the boundary.
  double distance(double score) const {
    return config_.target == Outcome::kFavorable ? classifier_.threshold() - score
                                                 : score - classifier_.threshold();
  }

  double cost_of(SkillId f) const {
    return config_.feature_costs.empty() ? 1.0 : config_.feature_costs[f];
  }

  static std::uint64_t zobrist(SkillId f) {
    return mix64(0x5eed5eed00000000ULL + f);
  }

  void push_child(const Node& parent, std::span<const SkillId> parent_order,
                  SkillId c, double score) {
    Node child;
    child.cost = parent.cost + cost_of(c);
    child.key = distance(score) + lambda_ * child.cost;
    child.hash = parent.hash ^ zobrist(c);
    child.size = parent.size + 1;
    const auto parent_sorted = sorted_of(parent);
    std::vector<SkillId> sorted(parent_sorted.begin(), parent_sorted.end());
    sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), c), c);
    child.offset = static_cast<std::uint32_t>(arena_.size());
    arena_.insert(arena_.end(), parent_order.begin(), parent_order.end());
    arena_.push_back(c);
    arena_.insert(arena_.end(), sorted.begin(), sorted.end());
    nodes_.push_back(child);
  }

  std::vector<SkillId> collect_candidates() const {
    std::vector<std::uint8_t> locked(x_.size(), 0);
    for (SkillId id : config_.locked) locked[id] = 1;
    const bool want_present = config_.mode == SearchMode::kRemoval;
    std::vector<SkillId> out;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const auto f = static_cast<SkillId>(i);
      if (!locked[f] && x_.test(f) == want_present) out.push_back(f);
    }
    if (config_.mode == SearchMode::kAddition && out.size() > config_.candidate_pool) {
      auto ranked = rank_single_toggles(predictor_, x_, out, config_.target);
      ranked.resize(config_.candidate_pool);
      out.clear();
      for (const auto& [f, gain] : ranked) out.push_back(f);
      std::sort(out.begin(), out.end());
    }
    return out;
  }

  Counterfactual& not_found(Counterfactual& cf, const std::string& reason,
                            double elapsed_s) {
    cf.status = SearchStatus::kNotFound;
    cf.reason = reason;
    cf.changes.clear();
    cf.score_after = best_score_;
    cf.class_after = classifier_.outcome_of(best_score_);
    cf.expansions_used = expansions_;
    cf.elapsed_s = elapsed_s;
    return cf;
  }

  const ThresholdClassifier& classifier_;
  const Predictor& predictor_;
  const BinaryVector& x_;
  const SearchConfig& config_;
  double lambda_;
  std::vector<Node> nodes_;
  std::vector<SkillId> arena_;
  std::unordered_set<std::uint64_t> visited_;
  std::size_t expansions_ = 0;
  double best_distance_ = std::numeric_limits<double>::infinity();
  double best_score_ = 0.0;
};

}  // namespace detail

// Runs the search and reports every outcome through `status`; never throws
// NoCounterfactualFound. For a not-found result `score_after` holds the best
// score reached.
inline Counterfactual search_counterfactual(const ThresholdClassifier& classifier,
                                            const BinaryVector& x,
                                            const SearchConfig& config) {
  return detail::BestFirstSearch(classifier, x, config).run();
}

inline Counterfactual find_counterfactual(const ThresholdClassifier& classifier,
                                          const BinaryVector& x,
                                          const SearchConfig& config) {
  Counterfactual cf = search_counterfactual(classifier, x, config);
  if (cf.status == SearchStatus::kNotFound) {
    throw NoCounterfactualFound(cf.reason, cf.expansions_used, cf.score_after);
  }
  return cf;
}

// ---------------------------------------------------------------------------
// JSON records
//
// {"profile_id","mode","changes":[{"skill_id","direction"}...],"score_before",
//  "score_after","expansions","elapsed_s","status"}; not-found records add
// "reason".

inline nlohmann::ordered_json counterfactual_to_json(const Counterfactual& cf,
                                                     std::uint64_t profile_id,
                                                     bool include_elapsed = true) {
  using nlohmann::ordered_json;
  ordered_json changes = ordered_json::array();
  for (const Change& c : cf.changes) {
    changes.push_back(
        ordered_json{{"skill_id", c.skill}, {"direction", direction_name(c.direction)}});
  }
  ordered_json j;
  j["profile_id"] = profile_id;
  j["mode"] = mode_name(cf.mode);
  j["changes"] = std::move(changes);
  j["score_before"] = cf.score_before;
  j["score_after"] = cf.score_after;
  j["expansions"] = cf.expansions_used;
  if (include_elapsed) j["elapsed_s"] = cf.elapsed_s;
  j["status"] = status_name(cf.status);
  if (cf.status == SearchStatus::kNotFound) j["reason"] = cf.reason;
  return j;
}

struct CounterfactualRecord {
  std::uint64_t profile_id = 0;
  Counterfactual cf;
};

inline CounterfactualRecord counterfactual_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& what) -> void {
    throw Error(ErrorCode::kParseError, "counterfactual record: " + what);
  };
  if (!j.is_object()) fail("not an object");
  for (const char* key : {"profile_id", "mode", "changes", "score_before",
                          "score_after", "expansions", "status"}) {
    if (!j.contains(key)) fail(std::string("missing '") + key + "'");
  }
  CounterfactualRecord r;
  try {
    r.profile_id = j["profile_id"].get<std::uint64_t>();
    const auto mode = j["mode"].get<std::string>();
    if (mode == "removal") {
      r.cf.mode = SearchMode::kRemoval;
    } else if (mode == "addition") {
      r.cf.mode = SearchMode::kAddition;
    } else {
      fail("unknown mode '" + mode + "'");
    }
    for (const auto& c : j["changes"]) {
      const auto dir = c.at("direction").get<std::string>();
      if (dir != "1->0" && dir != "0->1") fail("unknown direction '" + dir + "'");
      r.cf.changes.push_back(Change{c.at("skill_id").get<SkillId>(),
                                    dir == "1->0" ? Direction::kRemove : Direction::kAdd});
    }
    r.cf.score_before = j["score_before"].get<double>();
    r.cf.score_after = j["score_after"].get<double>();
    r.cf.expansions_used = j["expansions"].get<std::size_t>();
    if (j.contains("elapsed_s")) r.cf.elapsed_s = j["elapsed_s"].get<double>();
    const auto status = j["status"].get<std::string>();
    if (status == "found") {
      r.cf.status = SearchStatus::kFound;
    } else if (status == "not_found") {
      r.cf.status = SearchStatus::kNotFound;
    } else if (status == "already_target") {
      r.cf.status = SearchStatus::kAlreadyTarget;
    } else {
      fail("unknown status '" + status + "'");
    }
    if (j.contains("reason")) r.cf.reason = j["reason"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  return r;
}

}  // namespace skillcf
