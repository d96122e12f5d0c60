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

// Synthetic skills market: a skill taxonomy, job postings with required
// skill sets, and candidate profiles labeled with their job reach.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "skillcf/common.hpp"
#include "skillcf/random.hpp"

namespace skillcf {

enum class SkillCategory { kCompetency, kStudy, kStudyArea, kLanguage };

inline std::string_view category_name(SkillCategory c) {
  switch (c) {
    case SkillCategory::kCompetency: return "competency";
    case SkillCategory::kStudy: return "study";
    case SkillCategory::kStudyArea: return "study_area";
    case SkillCategory::kLanguage: return "language";
  }
  return "competency";
}

inline std::optional<SkillCategory> parse_category(std::string_view s) {
  if (s == "competency") return SkillCategory::kCompetency;
  if (s == "study") return SkillCategory::kStudy;
  if (s == "study_area") return SkillCategory::kStudyArea;
  if (s == "language") return SkillCategory::kLanguage;
  return std::nullopt;
}

struct Skill {
  SkillId id = 0;
  SkillCategory category = SkillCategory::kCompetency;
  std::string name;

  friend bool operator==(const Skill&, const Skill&) = default;
};

struct UniverseSizes {
  std::size_t competency = 4450;
  std::size_t study = 500;
  std::size_t study_area = 0;
  std::size_t language = 50;

  std::size_t total() const {
    return competency + study + study_area + language;
  }
};

struct SkillUniverse {
  std::vector<Skill> skills;

  std::size_t size() const { return skills.size(); }

  std::size_t count(SkillCategory c) const {
    return static_cast<std::size_t>(
        std::count_if(skills.begin(), skills.end(),
                      [c](const Skill& s) { return s.category == c; }));
  }

  friend bool operator==(const SkillUniverse&, const SkillUniverse&) = default;
};

struct JobPosting {
  std::uint64_t id = 0;
  std::vector<SkillId> required;  // sorted, unique, non-empty

  friend bool operator==(const JobPosting&, const JobPosting&) = default;
};

struct CandidateProfile {
  std::uint64_t id = 0;
  std::vector<SkillId> skills;  // sorted, unique
  std::uint64_t label = 0;      // job reach

  friend bool operator==(const CandidateProfile&,
                         const CandidateProfile&) = default;
};

struct MarketDataset {
  SkillUniverse universe;
  std::vector<JobPosting> jobs;
  std::vector<CandidateProfile> profiles;
  double fulfillment_fraction = 1.0;

  friend bool operator==(const MarketDataset&, const MarketDataset&) = default;
};

inline BinaryVector to_feature_vector(const CandidateProfile& profile,
                                      std::size_t dimension) {
  return BinaryVector::FromActive(dimension, profile.skills);
}

// ---------------------------------------------------------------------------
// Generation

// Skill ids are assigned category by category in the order competency,
// study, study_area, language.
inline SkillUniverse generate_universe(const UniverseSizes& sizes,
                                       std::uint64_t seed) {
  (void)seed;  // the taxonomy layout is fixed; popularity uses the seed
  if (sizes.total() == 0) {
    throw Error(ErrorCode::kEmptyUniverse, "all category sizes are zero");
  }
  SkillUniverse u;
  u.skills.reserve(sizes.total());
  const std::array<std::pair<SkillCategory, std::size_t>, 4> layout = {{
      {SkillCategory::kCompetency, sizes.competency},
      {SkillCategory::kStudy, sizes.study},
      {SkillCategory::kStudyArea, sizes.study_area},
      {SkillCategory::kLanguage, sizes.language},
  }};
  for (const auto& [category, n] : layout) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = static_cast<SkillId>(u.skills.size());
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%s_%04zu",
                    std::string(category_name(category)).c_str(), i);
      u.skills.push_back(Skill{id, category, buf});
    }
  }
  return u;
}

// Zipf-like popularity: skills are put in a seed-determined rank order and
// the skill at rank r (0-based) gets weight 1 / (r + 1).
inline std::vector<double> skill_popularity(const SkillUniverse& universe,
                                            std::uint64_t seed) {
  std::vector<SkillId> order(universe.size());
  std::iota(order.begin(), order.end(), SkillId{0});
  Rng rng(derive_seed(seed, 0x706f70));
  rng.shuffle(std::span<SkillId>(order));
  std::vector<double> weights(universe.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    weights[order[rank]] = 1.0 / static_cast<double>(rank + 1);
  }
  return weights;
}

// Rate of a Poisson variable conditioned on being >= 1 whose conditional mean
// equals `mean`: solves rate / (1 - exp(-rate)) = mean.
inline double truncated_poisson_rate(double mean) {
  if (mean <= 1.0) return 0.0;
  double lo = 0.0;
  double hi = mean;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double m = mid / -std::expm1(-mid);
    if (m < mean) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline std::size_t sample_set_size(Rng& rng, double rate, std::size_t cap) {
  if (rate <= 0.0) return std::min<std::size_t>(1, cap);
  std::uint64_t k = 0;
  do {
    k = rng.poisson(rate);
  } while (k == 0);
  return static_cast<std::size_t>(std::min<std::uint64_t>(k, cap));
}

namespace detail {

// Draws k distinct ids with probability proportional to `weights`. Uses
// repeated draws with duplicate rejection for small k and weighted random
// keys (Efraimidis-Spirakis) otherwise. Result is sorted.
inline std::vector<SkillId> sample_weighted(Rng& rng,
                                            std::span<const double> weights,
                                            std::span<const double> cumulative,
                                            std::size_t k) {
  const std::size_t n = weights.size();
  std::vector<SkillId> out;
  out.reserve(k);
  if (k * 4 <= n) {
    const double total = cumulative.back();
    std::size_t attempts = 0;
    while (out.size() < k && attempts < 64 * k + 64) {
      ++attempts;
      const double u = rng.uniform() * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      if (it == cumulative.end()) --it;
      const auto id = static_cast<SkillId>(it - cumulative.begin());
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
    if (out.size() == k) {
      std::sort(out.begin(), out.end());
      return out;
    }
    out.clear();
  }
  std::vector<std::pair<double, SkillId>> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    if (u <= 0.0) u = 0x1.0p-60;
    keys[i] = {std::log(u) / weights[i], static_cast<SkillId>(i)};
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k),
                    keys.end(), [](const auto& a, const auto& b) {
                      return a.first > b.first ||
                             (a.first == b.first && a.second < b.second);
                    });
  for (std::size_t i = 0; i < k; ++i) out.push_back(keys[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<double> prefix_sums(std::span<const double> w) {
  std::vector<double> c(w.size());
  std::partial_sum(w.begin(), w.end(), c.begin());
  return c;
}

}  // namespace detail

inline std::vector<JobPosting> generate_market(const SkillUniverse& universe,
                                               std::size_t n_jobs,
                                               double skills_per_job_mean,
                                               std::uint64_t seed) {
  if (n_jobs < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_jobs must be >= 1");
  }
  if (!(skills_per_job_mean >= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "skills_per_job_mean must be >= 1");
  }
  if (universe.size() == 0) {
    throw Error(ErrorCode::kEmptyUniverse, "universe has no skills");
  }
  if (skills_per_job_mean > static_cast<double>(universe.size())) {
    throw Error(ErrorCode::kInfeasibleMean,
                "mean required-set size exceeds universe size");
  }
  const auto weights = skill_popularity(universe, seed);
  const auto cumulative = detail::prefix_sums(weights);
  const double rate = truncated_poisson_rate(skills_per_job_mean);
  Rng rng(derive_seed(seed, 0x6a6f6273));
  std::vector<JobPosting> jobs(n_jobs);
  for (std::size_t j = 0; j < n_jobs; ++j) {
    jobs[j].id = j;
    const std::size_t k = sample_set_size(rng, rate, universe.size());
    jobs[j].required = detail::sample_weighted(rng, weights, cumulative, k);
  }
  return jobs;
}

inline void check_fraction(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw Error(ErrorCode::kInvalidFraction,
                "fulfillment fraction must be in (0, 1], got " +
                    std::to_string(rho));
  }
}

inline bool job_fulfilled(std::size_t covered, std::size_t required,
                          double rho) {
  return static_cast<double>(covered) / static_cast<double>(required) >= rho;
}

// Number of jobs whose required set is covered to at least `rho` by `skills`.
// `skills` must be sorted.
inline std::uint64_t job_reach(std::span<const SkillId> skills,
                               std::span<const JobPosting> jobs, double rho) {
  check_fraction(rho);
  std::uint64_t reach = 0;
  for (const auto& job : jobs) {
    if (job.required.empty()) continue;
    std::size_t covered = 0;
    auto a = skills.begin();
    auto b = job.required.begin();
    while (a != skills.end() && b != job.required.end()) {
      if (*a < *b) {
        ++a;
      } else if (*b < *a) {
        ++b;
      } else {
        ++covered;
        ++a;
        ++b;
      }
    }
    if (job_fulfilled(covered, job.required.size(), rho)) ++reach;
  }
  return reach;
}

// Inverted skill -> job index for labeling many profiles against one market.
class ReachIndex {
 public:
  ReachIndex(std::span<const JobPosting> jobs, std::size_t dimension,
             double rho)
      : postings_(dimension), sizes_(jobs.size()), rho_(rho) {
    check_fraction(rho);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      sizes_[j] = static_cast<std::uint32_t>(jobs[j].required.size());
      for (SkillId s : jobs[j].required) {
        postings_.at(s).push_back(static_cast<std::uint32_t>(j));
      }
    }
  }

  std::uint64_t reach(std::span<const SkillId> skills) const {
    std::vector<std::uint32_t> hits(sizes_.size(), 0);
    std::vector<std::uint32_t> touched;
    for (SkillId s : skills) {
      if (s >= postings_.size()) continue;
      for (std::uint32_t j : postings_[s]) {
        if (hits[j]++ == 0) touched.push_back(j);
      }
    }
    std::uint64_t reach = 0;
    for (std::uint32_t j : touched) {
      if (job_fulfilled(hits[j], sizes_[j], rho_)) ++reach;
    }
    return reach;
  }

 private:
  std::vector<std::vector<std::uint32_t>> postings_;
  std::vector<std::uint32_t> sizes_;
  double rho_;
};

// Profiles draw their skills in proportion to market demand (plus a small
// floor so every skill can occur), so candidates tend to already hold the
// most requested skills.
inline std::vector<CandidateProfile> generate_profiles(
    const SkillUniverse& universe, std::span<const JobPosting> jobs,
    std::size_t n_profiles, double skills_per_profile_mean, double rho,
    std::uint64_t seed, std::size_t workers = 1) {
  if (n_profiles < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_profiles must be >= 1");
  }
  if (!(skills_per_profile_mean >= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "skills_per_profile_mean must be >= 1");
  }
  if (universe.size() == 0) {
    throw Error(ErrorCode::kEmptyUniverse, "universe has no skills");
  }
  if (skills_per_profile_mean > static_cast<double>(universe.size())) {
    throw Error(ErrorCode::kInfeasibleMean,
                "mean profile size exceeds universe size");
  }
  check_fraction(rho);
  constexpr double kDemandFloor = 0.5;
  std::vector<double> weights(universe.size(), kDemandFloor);
  for (const auto& job : jobs) {
    for (SkillId s : job.required) {
      if (s >= universe.size()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "job " + std::to_string(job.id) + " references unknown skill");
      }
      weights[s] += 1.0;
    }
  }
  const auto cumulative = detail::prefix_sums(weights);
  const double rate = truncated_poisson_rate(skills_per_profile_mean);
  Rng rng(derive_seed(seed, 0x70726f66));
  std::vector<CandidateProfile> profiles(n_profiles);
  for (std::size_t p = 0; p < n_profiles; ++p) {
    profiles[p].id = p;
    const std::size_t k = sample_set_size(rng, rate, universe.size());
    profiles[p].skills = detail::sample_weighted(rng, weights, cumulative, k);
  }
  const ReachIndex index(jobs, universe.size(), rho);
  parallel_for(n_profiles, workers, [&](std::size_t p) {
    profiles[p].label = index.reach(profiles[p].skills);
  });
  return profiles;
}

struct MarketSpec {
  UniverseSizes sizes;
  std::size_t n_jobs = 10000;
  double skills_per_job_mean = 11.04;
  std::size_t n_profiles = 10000;
  double skills_per_profile_mean = 11.04;
  double fulfillment_fraction = 1.0;
  std::uint64_t seed = 7;
};

inline MarketDataset generate_dataset(const MarketSpec& spec,
                                      std::size_t workers = 1) {
  MarketDataset d;
  d.fulfillment_fraction = spec.fulfillment_fraction;
  d.universe = generate_universe(spec.sizes, spec.seed);
  d.jobs = generate_market(d.universe, spec.n_jobs, spec.skills_per_job_mean,
                           spec.seed);
  d.profiles = generate_profiles(d.universe, d.jobs, spec.n_profiles,
                                 spec.skills_per_profile_mean,
                                 spec.fulfillment_fraction, spec.seed, workers);
  return d;
}

// ---------------------------------------------------------------------------
// JSON-lines serialization

inline std::string serialize_dataset(const MarketDataset& d) {
  using nlohmann::ordered_json;
  std::string out;
  ordered_json header;
  ordered_json universe = ordered_json::array();
  for (const auto& s : d.universe.skills) {
    universe.push_back(ordered_json{{"id", s.id},
                                    {"category", category_name(s.category)},
                                    {"name", s.name}});
  }
  header["universe"] = std::move(universe);
  header["rho"] = d.fulfillment_fraction;
  out += header.dump();
  out += '\n';
  for (const auto& job : d.jobs) {
    out += ordered_json{{"type", "job"}, {"id", job.id}, {"required", job.required}}
               .dump();
    out += '\n';
  }
  for (const auto& p : d.profiles) {
    out += ordered_json{{"type", "profile"},
                        {"id", p.id},
                        {"skills", p.skills},
                        {"label", p.label}}
               .dump();
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(ErrorCode::kIoError, "write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void save_dataset(const MarketDataset& d, const std::string& path) {
  write_text_file(path, serialize_dataset(d));
}

namespace detail {

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParseError,
              "line " + std::to_string(line) + ": " + what);
}

inline std::vector<SkillId> parse_id_list(const nlohmann::json& v,
                                          std::size_t dimension,
                                          std::size_t line, const char* field) {
  if (!v.is_array()) parse_fail(line, std::string(field) + " must be an array");
  std::vector<SkillId> ids;
  ids.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number_unsigned()) {
      parse_fail(line, std::string(field) + " entries must be non-negative integers");
    }
    const auto id = e.get<std::uint64_t>();
    if (id >= dimension) {
      parse_fail(line, "unknown skill_id " + std::to_string(id) + " in " + field);
    }
    ids.push_back(static_cast<SkillId>(id));
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    parse_fail(line, std::string("duplicate skill_id in ") + field);
  }
  return ids;
}

}  // namespace detail

inline MarketDataset parse_dataset(std::string_view text) {
  MarketDataset d;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::pair<std::size_t, std::uint64_t>> stated_labels;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      detail::parse_fail(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) detail::parse_fail(line_no, "expected a JSON object");
    if (!have_header) {
      if (!obj.contains("universe") || !obj.contains("rho")) {
        detail::parse_fail(line_no, "first line must be the universe header");
      }
      if (!obj["rho"].is_number()) detail::parse_fail(line_no, "rho must be a number");
      d.fulfillment_fraction = obj["rho"].get<double>();
      if (!(d.fulfillment_fraction > 0.0 && d.fulfillment_fraction <= 1.0)) {
        detail::parse_fail(line_no, "rho outside (0, 1]");
      }
      const auto& u = obj["universe"];
      if (!u.is_array() || u.empty()) {
        detail::parse_fail(line_no, "universe must be a non-empty array");
      }
      for (const auto& s : u) {
        if (!s.is_object() || !s.contains("id") || !s.contains("category") ||
            !s.contains("name") || !s["id"].is_number_unsigned() ||
            !s["category"].is_string() || !s["name"].is_string()) {
          detail::parse_fail(line_no, "universe entries need id, category, name");
        }
        const auto id = s["id"].get<std::uint64_t>();
        if (id != d.universe.skills.size()) {
          detail::parse_fail(line_no, "skill ids must be contiguous from 0");
        }
        const auto cat = parse_category(s["category"].get<std::string>());
        if (!cat) detail::parse_fail(line_no, "unknown category");
        d.universe.skills.push_back(
            Skill{static_cast<SkillId>(id), *cat, s["name"].get<std::string>()});
      }
      have_header = true;
      continue;
    }
    if (!obj.contains("type") || !obj["type"].is_string()) {
      detail::parse_fail(line_no, "record without type");
    }
    const auto type = obj["type"].get<std::string>();
    if (!obj.contains("id") || !obj["id"].is_number_unsigned()) {
      detail::parse_fail(line_no, "record without a non-negative integer id");
    }
    if (type == "job") {
      if (!obj.contains("required")) detail::parse_fail(line_no, "job without required");
      JobPosting job;
      job.id = obj["id"].get<std::uint64_t>();
      job.required = detail::parse_id_list(obj["required"], d.universe.size(),
                                           line_no, "required");
      if (job.required.empty()) detail::parse_fail(line_no, "job with empty required set");
      d.jobs.push_back(std::move(job));
    } else if (type == "profile") {
      if (!obj.contains("skills") || !obj.contains("label") ||
          !obj["label"].is_number_unsigned()) {
        detail::parse_fail(line_no, "profile needs skills and a non-negative label");
      }
      CandidateProfile p;
      p.id = obj["id"].get<std::uint64_t>();
      p.skills = detail::parse_id_list(obj["skills"], d.universe.size(), line_no,
                                       "skills");
      p.label = obj["label"].get<std::uint64_t>();
      stated_labels.emplace_back(line_no, p.label);
      d.profiles.push_back(std::move(p));
    } else {
      detail::parse_fail(line_no, "unknown record type '" + type + "'");
    }
  }
  if (!have_header) detail::parse_fail(line_no, "missing universe header");
  const ReachIndex index(d.jobs, d.universe.size(), d.fulfillment_fraction);
  for (std::size_t i = 0; i < d.profiles.size(); ++i) {
    const auto expected = index.reach(d.profiles[i].skills);
    if (expected != d.profiles[i].label) {
      throw Error(ErrorCode::kIntegrityError,
                  "line " + std::to_string(stated_labels[i].first) + ": profile " +
                      std::to_string(d.profiles[i].id) + " has label " +
                      std::to_string(d.profiles[i].label) + " but job reach is " +
                      std::to_string(expected));
    }
  }
  return d;
}

inline MarketDataset load_dataset(const std::string& path) {
  return parse_dataset(read_text_file(path));
}

}  // namespace skillcf
