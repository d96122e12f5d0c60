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

// Real-valued predictors over binary skill vectors, a gradient-boosted tree
// regressor, and the threshold wrapper that turns a predictor into a binary
// classifier.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "skillcf/common.hpp"
#include "skillcf/dataset.hpp"
#include "skillcf/random.hpp"

namespace skillcf {

// Scoring must be pure and thread-safe.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::size_t dimension() const = 0;
  virtual double score(const BinaryVector& x) const = 0;
};

class LinearPredictor final : public Predictor {
 public:
  LinearPredictor() = default;
  LinearPredictor(std::vector<double> weights, double bias)
      : weights_(std::move(weights)), bias_(bias) {}

  std::size_t dimension() const override { return weights_.size(); }

  double score(const BinaryVector& x) const override {
    double s = bias_;
    const auto bits = x.bits();
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (bits[i]) s += weights_[i];
    }
    return s;
  }

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

  friend bool operator==(const LinearPredictor& a, const LinearPredictor& b) {
    return a.weights_ == b.weights_ && a.bias_ == b.bias_;
  }

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
};

// Wraps an arbitrary scoring function; used for hand-built test predictors.
class FunctionPredictor final : public Predictor {
 public:
  FunctionPredictor(std::size_t dimension,
                    std::function<double(const BinaryVector&)> fn)
      : dimension_(dimension), fn_(std::move(fn)) {}

  std::size_t dimension() const override { return dimension_; }
  double score(const BinaryVector& x) const override { return fn_(x); }

 private:
  std::size_t dimension_;
  std::function<double(const BinaryVector&)> fn_;
};

// A regression tree over binary features. Internal nodes test one feature:
// the `absent` child is taken when the feature is 0, `present` when it is 1.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  std::int32_t absent = -1;
  std::int32_t present = -1;
  double value = 0.0;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double evaluate(std::span<const std::uint8_t> bits) const {
    std::int32_t i = 0;
    while (nodes[i].feature >= 0) {
      i = bits[nodes[i].feature] ? nodes[i].present : nodes[i].absent;
    }
    return nodes[i].value;
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

class GbtModel final : public Predictor {
 public:
  GbtModel() = default;
  GbtModel(std::size_t dimension, double base_score, double learning_rate,
           std::vector<RegressionTree> trees)
      : dimension_(dimension),
        base_score_(base_score),
        learning_rate_(learning_rate),
        trees_(std::move(trees)) {}

  std::size_t dimension() const override { return dimension_; }

  double score(const BinaryVector& x) const override {
    return score_prefix(x, trees_.size());
  }

  // Score using only the first `n_trees` trees.
  double score_prefix(const BinaryVector& x, std::size_t n_trees) const {
    const auto bits = x.bits();
    double sum = 0.0;
    n_trees = std::min(n_trees, trees_.size());
    for (std::size_t t = 0; t < n_trees; ++t) sum += trees_[t].evaluate(bits);
    return base_score_ + learning_rate_ * sum;
  }

  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  friend bool operator==(const GbtModel&, const GbtModel&) = default;

 private:
  std::size_t dimension_ = 0;
  double base_score_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<RegressionTree> trees_;
};

// ---------------------------------------------------------------------------
// Training

struct GbtParams {
  std::size_t n_trees = 200;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  double train_fraction = 0.75;
  std::size_t min_samples_leaf = 1;
};

struct TrainResult {
  GbtModel model;
  double test_rmse = 0.0;
  std::vector<std::size_t> train_rows;  // indices into dataset.profiles
  std::vector<std::size_t> test_rows;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(std::size_t dimension,
              const std::vector<std::vector<SkillId>>& active,
              const std::vector<double>& residual, std::size_t max_depth,
              std::size_t min_leaf)
      : active_(active),
        residual_(residual),
        max_depth_(max_depth),
        min_leaf_(std::max<std::size_t>(1, min_leaf)),
        sum_(dimension, 0.0),
        cnt_(dimension, 0) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const auto index = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double total = 0.0;
    for (std::size_t r : rows) total += residual_[r];
    const double n = static_cast<double>(rows.size());
    tree_.nodes[index].value = rows.empty() ? 0.0 : total / n;
    if (depth >= max_depth_ || rows.size() < 2 * min_leaf_) return index;

    std::vector<SkillId> touched;
    for (std::size_t r : rows) {
      for (SkillId f : active_[r]) {
        if (cnt_[f]++ == 0) touched.push_back(f);
        sum_[f] += residual_[r];
      }
    }
    const double parent = total * total / n;
    const double min_gain = 1e-14 * (1.0 + parent);
    double best_gain = min_gain;
    std::int32_t best_feature = -1;
    for (SkillId f : touched) {
      const std::size_t c = cnt_[f];
      if (c >= min_leaf_ && rows.size() - c >= min_leaf_) {
        const double s_in = sum_[f];
        const double s_out = total - s_in;
        const double gain = s_in * s_in / static_cast<double>(c) +
                            s_out * s_out / static_cast<double>(rows.size() - c) -
                            parent;
        if (gain > best_gain ||
            (gain == best_gain && best_feature >= 0 &&
             static_cast<std::int32_t>(f) < best_feature)) {
          best_gain = gain;
          best_feature = static_cast<std::int32_t>(f);
        }
      }
    }
    for (SkillId f : touched) {
      cnt_[f] = 0;
      sum_[f] = 0.0;
    }
    if (best_feature < 0) return index;

    std::vector<std::size_t> with;
    std::vector<std::size_t> without;
    for (std::size_t r : rows) {
      const auto& a = active_[r];
      if (std::binary_search(a.begin(), a.end(),
                             static_cast<SkillId>(best_feature))) {
        with.push_back(r);
      } else {
        without.push_back(r);
      }
    }
    rows.clear();
    rows.shrink_to_fit();
    const std::int32_t absent = grow(std::move(without), depth + 1);
    const std::int32_t present = grow(std::move(with), depth + 1);
    tree_.nodes[index].feature = best_feature;
    tree_.nodes[index].absent = absent;
    tree_.nodes[index].present = present;
    tree_.nodes[index].value = 0.0;
    return index;
  }

  const std::vector<std::vector<SkillId>>& active_;
  const std::vector<double>& residual_;
  std::size_t max_depth_;
  std::size_t min_leaf_;
  std::vector<double> sum_;
  std::vector<std::size_t> cnt_;
  RegressionTree tree_;
};

inline double tree_eval_sparse(const RegressionTree& tree,
                               const std::vector<SkillId>& active) {
  std::int32_t i = 0;
  while (tree.nodes[i].feature >= 0) {
    const bool on = std::binary_search(
        active.begin(), active.end(), static_cast<SkillId>(tree.nodes[i].feature));
    i = on ? tree.nodes[i].present : tree.nodes[i].absent;
  }
  return tree.nodes[i].value;
}

}  // namespace detail

// Squared-error gradient boosting with exact split search. Each binary
// feature admits exactly one split, so the search is a scan over features.
inline TrainResult train_gbt(const MarketDataset& dataset, const GbtParams& params,
                             std::uint64_t seed) {
  if (params.n_trees < 1 || params.max_depth < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_trees and max_depth must be >= 1");
  }
  if (!(params.train_fraction > 0.0 && params.train_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "train_fraction must be in (0, 1)");
  }
  const std::size_t n = dataset.profiles.size();
  if (n < 8) {
    throw Error(ErrorCode::kTooFewSamples,
                "need at least 8 profiles, got " + std::to_string(n));
  }
  const std::size_t dim = dataset.universe.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x73706c6974));
  rng.shuffle(std::span<std::size_t>(order));
  auto n_train = static_cast<std::size_t>(
      std::llround(params.train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  TrainResult result;
  result.train_rows.assign(order.begin(), order.begin() + n_train);
  result.test_rows.assign(order.begin() + n_train, order.end());
  std::sort(result.train_rows.begin(), result.train_rows.end());
  std::sort(result.test_rows.begin(), result.test_rows.end());

  std::vector<std::vector<SkillId>> active(n_train);
  std::vector<double> label(n_train);
  for (std::size_t i = 0; i < n_train; ++i) {
    const auto& p = dataset.profiles[result.train_rows[i]];
    active[i] = p.skills;
    label[i] = static_cast<double>(p.label);
  }
  double base = 0.0;
  for (double y : label) base += y;
  base /= static_cast<double>(n_train);

  std::vector<double> sum_trees(n_train, 0.0);
  std::vector<double> residual(n_train);
  std::vector<std::size_t> rows(n_train);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<RegressionTree> trees;
  trees.reserve(params.n_trees);
  detail::TreeBuilder builder(dim, active, residual, params.max_depth,
                              params.min_samples_leaf);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n_train; ++i) {
      residual[i] = label[i] - (base + params.learning_rate * sum_trees[i]);
    }
    trees.push_back(builder.build(rows));
    for (std::size_t i = 0; i < n_train; ++i) {
      sum_trees[i] += detail::tree_eval_sparse(trees.back(), active[i]);
    }
  }
  result.model = GbtModel(dim, base, params.learning_rate, std::move(trees));

  double sq = 0.0;
  for (std::size_t r : result.test_rows) {
    const auto& p = dataset.profiles[r];
    const double pred = result.model.score(to_feature_vector(p, dim));
    const double e = pred - static_cast<double>(p.label);
    sq += e * e;
  }
  result.test_rmse = std::sqrt(sq / static_cast<double>(result.test_rows.size()));
  return result;
}

// Nearest-rank percentile: the element at 1-based rank ceil(p / 100 * n) of
// the ascending sort.
inline double percentile_threshold(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "no values");
  if (!(p > 0.0 && p <= 100.0)) {
    throw Error(ErrorCode::kInvalidArgument, "percentile must be in (0, 100]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

// ---------------------------------------------------------------------------
// Classification

enum class Outcome { kFavorable, kUnfavorable };

inline std::string_view outcome_name(Outcome o) {
  return o == Outcome::kFavorable ? "favorable" : "unfavorable";
}

inline Outcome opposite(Outcome o) {
  return o == Outcome::kFavorable ? Outcome::kUnfavorable : Outcome::kFavorable;
}

// favorable iff score(x) > threshold (strict).
class ThresholdClassifier {
 public:
  ThresholdClassifier(std::shared_ptr<const Predictor> predictor, double threshold)
      : predictor_(std::move(predictor)), threshold_(threshold) {
    if (!predictor_) throw Error(ErrorCode::kInvalidArgument, "null predictor");
  }

  const Predictor& predictor() const { return *predictor_; }
  double threshold() const { return threshold_; }
  std::size_t dimension() const { return predictor_->dimension(); }

  double score(const BinaryVector& x) const {
    check_shape(x);
    return predictor_->score(x);
  }

  Outcome outcome_of(double score) const {
    return score > threshold_ ? Outcome::kFavorable : Outcome::kUnfavorable;
  }

  Outcome classify(const BinaryVector& x) const { return outcome_of(score(x)); }

  void check_shape(const BinaryVector& x) const {
    if (x.size() != predictor_->dimension()) {
      throw Error(ErrorCode::kShapeError,
                  "instance has " + std::to_string(x.size()) +
                      " features, model expects " +
                      std::to_string(predictor_->dimension()));
    }
  }

 private:
  std::shared_ptr<const Predictor> predictor_;
  double threshold_;
};

inline Outcome classify(const ThresholdClassifier& c, const BinaryVector& x) {
  return c.classify(x);
}

// ---------------------------------------------------------------------------
// Serialization
//
// {"kind":"gbt","version":1,"dimension":d,"base_score":b,"learning_rate":lr,
//  "trees":[[[feature,absent,present,value],...],...]}
// {"kind":"linear","version":1,"bias":b,"weights":[w0,...]}
//
// Tree nodes are [feature, absent, present, value] with feature = -1 for
// leaves. Reals are written in shortest round-trip form.

using AnyModel = std::variant<GbtModel, LinearPredictor>;

inline constexpr int kModelFormatVersion = 1;

inline std::string serialize_model(const AnyModel& model) {
  using nlohmann::ordered_json;
  ordered_json j;
  if (const auto* gbt = std::get_if<GbtModel>(&model)) {
    j["kind"] = "gbt";
    j["version"] = kModelFormatVersion;
    j["dimension"] = gbt->dimension();
    j["base_score"] = gbt->base_score();
    j["learning_rate"] = gbt->learning_rate();
    ordered_json trees = ordered_json::array();
    for (const auto& t : gbt->trees()) {
      ordered_json nodes = ordered_json::array();
      for (const auto& n : t.nodes) {
        nodes.push_back(ordered_json::array({n.feature, n.absent, n.present, n.value}));
      }
      trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
  } else {
    const auto& lin = std::get<LinearPredictor>(model);
    j["kind"] = "linear";
    j["version"] = kModelFormatVersion;
    j["bias"] = lin.bias();
    j["weights"] = lin.weights();
  }
  return j.dump() + "\n";
}

inline void save_model(const AnyModel& model, const std::string& path) {
  write_text_file(path, serialize_model(model));
}

namespace detail {

[[noreturn]] inline void model_fail(const std::string& what) {
  throw Error(ErrorCode::kModelLoadError, what);
}

inline double need_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    model_fail(std::string("missing numeric field '") + key + "'");
  }
  return j[key].get<double>();
}

inline RegressionTree parse_tree(const nlohmann::json& jt, std::size_t dim) {
  if (!jt.is_array() || jt.empty()) model_fail("tree must be a non-empty array");
  RegressionTree tree;
  const auto n = static_cast<std::int64_t>(jt.size());
  for (const auto& jn : jt) {
    if (!jn.is_array() || jn.size() != 4 || !jn[0].is_number_integer() ||
        !jn[1].is_number_integer() || !jn[2].is_number_integer() ||
        !jn[3].is_number()) {
      model_fail("tree node must be [feature, absent, present, value]");
    }
    TreeNode node;
    const auto f = jn[0].get<std::int64_t>();
    const auto a = jn[1].get<std::int64_t>();
    const auto p = jn[2].get<std::int64_t>();
    if (f >= 0) {
      if (static_cast<std::size_t>(f) >= dim) model_fail("split feature out of range");
      if (a <= 0 || a >= n || p <= 0 || p >= n) model_fail("child index out of range");
    }
    node.feature = static_cast<std::int32_t>(f < 0 ? -1 : f);
    node.absent = static_cast<std::int32_t>(a);
    node.present = static_cast<std::int32_t>(p);
    node.value = jn[3].get<double>();
    tree.nodes.push_back(node);
  }
  // Children must point forward, which rules out cycles.
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    if (node.feature >= 0 &&
        (node.absent <= static_cast<std::int32_t>(i) ||
         node.present <= static_cast<std::int32_t>(i))) {
      model_fail("tree children must follow their parent");
    }
  }
  return tree;
}

}  // namespace detail

inline AnyModel parse_model(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    detail::model_fail(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    detail::model_fail("missing 'kind'");
  }
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != kModelFormatVersion) {
    detail::model_fail("unsupported model version");
  }
  const auto kind = j["kind"].get<std::string>();
  if (kind == "linear") {
    if (!j.contains("weights") || !j["weights"].is_array()) {
      detail::model_fail("linear model without weights");
    }
    std::vector<double> w;
    for (const auto& e : j["weights"]) {
      if (!e.is_number()) detail::model_fail("non-numeric weight");
      w.push_back(e.get<double>());
    }
    return LinearPredictor(std::move(w), detail::need_number(j, "bias"));
  }
  if (kind == "gbt") {
    if (!j.contains("dimension") || !j["dimension"].is_number_unsigned()) {
      detail::model_fail("gbt model without dimension");
    }
    const auto dim = j["dimension"].get<std::size_t>();
    if (!j.contains("trees") || !j["trees"].is_array()) {
      detail::model_fail("gbt model without trees");
    }
    std::vector<RegressionTree> trees;
    for (const auto& jt : j["trees"]) trees.push_back(detail::parse_tree(jt, dim));
    return GbtModel(dim, detail::need_number(j, "base_score"),
                    detail::need_number(j, "learning_rate"), std::move(trees));
  }
  detail::model_fail("unknown model kind '" + kind + "'");
}

inline AnyModel load_model(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    detail::model_fail(e.what());
  }
  return parse_model(text);
}

inline std::shared_ptr<const Predictor> share_predictor(AnyModel model) {
  return std::visit(
      [](auto&& m) -> std::shared_ptr<const Predictor> {
        using T = std::decay_t<decltype(m)>;
        return std::make_shared<const T>(std::move(m));
      },
      std::move(model));
}

}  // namespace skillcf
