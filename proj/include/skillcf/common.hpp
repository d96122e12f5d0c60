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

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace skillcf {

using SkillId = std::uint32_t;

enum class ErrorCode {
  kInvalidArgument,
  kEmptyUniverse,
  kInfeasibleMean,
  kInvalidFraction,
  kParseError,
  kIntegrityError,
  kIoError,
  kTooFewSamples,
  kEmptyInput,
  kShapeError,
  kModelLoadError,
  kNoCounterfactualFound,
  kNotACounterfactual,
  kDegenerateSample,
  kEmptyCoalition,
  kTooLarge,
  kPreconditionError,
  kInvalidK,
  kEmptyBatch,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyUniverse: return "EmptyUniverse";
    case ErrorCode::kInfeasibleMean: return "InfeasibleMean";
    case ErrorCode::kInvalidFraction: return "InvalidFraction";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIntegrityError: return "IntegrityError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kModelLoadError: return "ModelLoadError";
    case ErrorCode::kNoCounterfactualFound: return "NoCounterfactualFound";
    case ErrorCode::kNotACounterfactual: return "NotACounterfactual";
    case ErrorCode::kDegenerateSample: return "DegenerateSample";
    case ErrorCode::kEmptyCoalition: return "EmptyCoalition";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kPreconditionError: return "PreconditionError";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
  }
  return "Unknown";
}

// All library failures are reported through this type; `code()` names the
// failure kind so callers can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Dense 0/1 feature vector indexed by SkillId.
class BinaryVector {
 public:
  BinaryVector() = default;
  explicit BinaryVector(std::size_t dimension) : bits_(dimension, 0) {}

  static BinaryVector FromActive(std::size_t dimension,
                                 std::span<const SkillId> active) {
    BinaryVector v(dimension);
    for (SkillId id : active) {
      if (id >= dimension) {
        throw Error(ErrorCode::kShapeError,
                    "feature " + std::to_string(id) + " outside dimension " +
                        std::to_string(dimension));
      }
      v.bits_[id] = 1;
    }
    return v;
  }

  std::size_t size() const { return bits_.size(); }
  bool test(SkillId i) const { return bits_[i] != 0; }
  void set(SkillId i, bool value = true) { bits_[i] = value ? 1 : 0; }
  void flip(SkillId i) { bits_[i] ^= 1; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
  }

  std::vector<SkillId> active() const {
    std::vector<SkillId> out;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      if (bits_[i]) out.push_back(static_cast<SkillId>(i));
    }
    return out;
  }

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const BinaryVector&, const BinaryVector&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// splitmix64 finalizer; used to derive independent RNG streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// Number of workers to use when the caller passes 0.
inline std::size_t resolve_workers(std::size_t workers) {
  if (workers > 0) return workers;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Indices are handed
// out dynamically; fn must only write to per-index state, which keeps results
// independent of the worker count. The first exception thrown by any worker
// is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::min(resolve_workers(workers), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace skillcf
