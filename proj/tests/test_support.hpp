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

// Helpers shared by the unit tests: small hand-built classifiers and
// brute-force reference searches.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "skillcf/common.hpp"
#include "skillcf/dataset.hpp"
#include "skillcf/model.hpp"
#include "skillcf/random.hpp"

namespace skillcf::testing {

inline std::shared_ptr<const LinearPredictor> linear(std::vector<double> w, double bias = 0.0) {
  return std::make_shared<const LinearPredictor>(std::move(w), bias);
}

inline BinaryVector vec(std::size_t dim, std::vector<SkillId> active) {
  return BinaryVector::FromActive(dim, active);
}

// Smallest number of toggles among `candidates` that moves x into `target`,
// by enumerating every subset; returns max() when none does.
inline std::size_t brute_force_minimum(const ThresholdClassifier& c, const BinaryVector& x,
                                       const std::vector<SkillId>& candidates,
                                       Outcome target) {
  const std::size_t n = candidates.size();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (size >= best) continue;
    BinaryVector y = x;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) y.flip(candidates[i]);
    }
    if (c.classify(y) == target) best = size;
  }
  return best;
}

// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("skillcf_" + tag + "_" + std::to_string(mix64(reinterpret_cast<std::uintptr_t>(this))));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// A market small enough for exhaustive checks but big enough to train on.
inline MarketDataset small_market(std::uint64_t seed, std::size_t n_profiles = 400) {
  MarketSpec spec;
  spec.sizes = UniverseSizes{40, 8, 0, 2};
  spec.n_jobs = 300;
  spec.skills_per_job_mean = 3.0;
  spec.n_profiles = n_profiles;
  spec.skills_per_profile_mean = 6.0;
  spec.seed = seed;
  return generate_dataset(spec, 1);
}

}  // namespace skillcf::testing
