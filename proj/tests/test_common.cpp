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

#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "skillcf/common.hpp"
#include "skillcf/random.hpp"

namespace skillcf {
namespace {

TEST(BinaryVector, FromActiveSetsExactlyTheListedBits) {
  const std::vector<SkillId> ids{0, 3, 7};
  const auto v = BinaryVector::FromActive(8, ids);
  EXPECT_EQ(v.size(), 8u);
  EXPECT_EQ(v.count(), 3u);
  EXPECT_EQ(v.active(), ids);
  EXPECT_TRUE(v.test(3));
  EXPECT_FALSE(v.test(4));
}

TEST(BinaryVector, OutOfRangeIdIsAShapeError) {
  const std::vector<SkillId> ids{8};
  try {
    BinaryVector::FromActive(8, ids);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeError);
  }
}

TEST(BinaryVector, FlipAndSet) {
  BinaryVector v(4);
  v.flip(2);
  EXPECT_TRUE(v.test(2));
  v.flip(2);
  EXPECT_FALSE(v.test(2));
  v.set(1);
  v.set(1, false);
  EXPECT_EQ(v.count(), 0u);
}

TEST(Seeds, DerivedStreamsDifferAndRepeat) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(derive_seed(7, s));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
  EXPECT_NE(derive_seed(7, 3), derive_seed(8, 3));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (std::size_t workers : {1u, 3u, 8u}) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
    EXPECT_EQ(std::accumulate(hits.begin(), hits.end(), 0), 1000);
    EXPECT_EQ(*std::min_element(hits.begin(), hits.end()), 1);
  }
}

TEST(ParallelFor, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 57) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng r(1);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_GT(c, 800);
}

TEST(Rng, PoissonMeanMatches) {
  Rng r(3);
  for (double mean : {0.5, 4.0, 11.04, 900.0}) {
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(r.poisson(mean));
    // standard error sqrt(mean / n); allow five of them
    EXPECT_NEAR(sum / n, mean, 5.0 * std::sqrt(mean / n)) << "mean " << mean;
  }
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng r(5);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

}  // namespace
}  // namespace skillcf
