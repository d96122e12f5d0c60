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

// skillcf: synthetic labour-market data, model training, counterfactual
// explanations and guidance, and the flip-rate evaluations.
//
// Exit codes: 0 success, 1 usage error, 2 runtime or I/O error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skillcf/pipeline.hpp"

namespace {

using namespace skillcf;
namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

bool is_usage_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kEmptyUniverse:
    case ErrorCode::kInfeasibleMean:
    case ErrorCode::kInvalidFraction:
    case ErrorCode::kInvalidK:
      return true;
    default:
      return false;
  }
}

void log(const std::string& msg) { std::cerr << msg << "\n"; }

// Wall-clock notes only go to stderr so output files stay reproducible.
class Stopwatch {
 public:
  explicit Stopwatch(std::string what)
      : what_(std::move(what)), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::cerr << what_ << ": " << format_real(s, 2) << " s\n";
  }

 private:
  std::string what_;
  std::chrono::steady_clock::time_point start_;
};

struct MarketArgs {
  MarketSpec spec;
  void add(CLI::App* app) {
    app->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
    app->add_option("--competencies", spec.sizes.competency, "Competency skills")
        ->capture_default_str();
    app->add_option("--studies", spec.sizes.study, "Study skills")->capture_default_str();
    app->add_option("--study-areas", spec.sizes.study_area, "Study-area skills")
        ->capture_default_str();
    app->add_option("--languages", spec.sizes.language, "Language skills")
        ->capture_default_str();
    app->add_option("--jobs", spec.n_jobs, "Number of job postings")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--skills-per-job", spec.skills_per_job_mean,
                    "Mean required skills per job")
        ->check(CLI::Range(1.0, 1e9))
        ->capture_default_str();
    app->add_option("--profiles", spec.n_profiles, "Number of candidate profiles")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--skills-per-profile", spec.skills_per_profile_mean,
                    "Mean skills per profile")
        ->check(CLI::Range(1.0, 1e9))
        ->capture_default_str();
    app->add_option("--rho", spec.fulfillment_fraction,
                    "Fraction of a job's skills a profile must cover")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  }
};

struct TrainArgs {
  GbtParams params;
  double percentile = 90.0;
  void add(CLI::App* app) {
    app->add_option("--trees", params.n_trees, "Boosting rounds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--depth", params.max_depth, "Maximum tree depth")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--learning-rate", params.learning_rate, "Shrinkage")
        ->check(CLI::Range(1e-9, 1.0))
        ->capture_default_str();
    app->add_option("--train-fraction", params.train_fraction, "Training share of profiles")
        ->check(CLI::Range(0.01, 0.99))
        ->capture_default_str();
    app->add_option("--min-samples-leaf", params.min_samples_leaf, "Minimum rows per leaf")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--percentile", percentile,
                    "Threshold percentile of training labels")
        ->check(CLI::Range(0.0, 100.0))
        ->capture_default_str();
  }
};

struct SearchArgs {
  SearchConfig config;
  std::string target;
  std::vector<SkillId> locked;
  std::vector<std::string> costs;
  void add(CLI::App* app, const SearchConfig& defaults) {
    config = defaults;
    app->add_option("--target", target,
                    "Target class (favorable|unfavorable); default depends on command")
        ->check(CLI::IsMember({"favorable", "unfavorable"}));
    app->add_option("--max-set-size", config.max_set_size, "Largest change set")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--max-expansions", config.max_expansions, "Node expansion budget")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--time-budget", config.time_budget_s, "Seconds per instance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--candidate-pool", config.candidate_pool,
                    "Absent skills considered in addition mode")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--lock", locked, "Skill id that must not change (repeatable)");
    app->add_option("--cost", costs, "Per-skill cost as id=value, value >= 1 (repeatable)");
  }

  SearchConfig resolve(std::size_t dimension) const {
    SearchConfig c = config;
    if (target == "favorable") c.target = Outcome::kFavorable;
    if (target == "unfavorable") c.target = Outcome::kUnfavorable;
    c.locked = locked;
    if (!costs.empty()) {
      c.feature_costs.assign(dimension, 1.0);
      for (const std::string& spec : costs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
          throw Error(ErrorCode::kInvalidArgument, "--cost expects id=value, got " + spec);
        }
        try {
          const unsigned long id = std::stoul(spec.substr(0, eq));
          const double value = std::stod(spec.substr(eq + 1));
          if (id >= dimension) {
            throw Error(ErrorCode::kInvalidArgument, "--cost id out of range: " + spec);
          }
          c.feature_costs[id] = value;
        } catch (const std::logic_error&) {
          throw Error(ErrorCode::kInvalidArgument, "--cost expects id=value, got " + spec);
        }
      }
    }
    c.validate(dimension);
    return c;
  }
};

struct Inputs {
  std::string data;
  std::string model;
  std::string metrics;
  void add(CLI::App* app) {
    app->add_option("--data", data, "Dataset (JSON lines)")->required();
    app->add_option("--model", model, "Model file")->required();
    app->add_option("--metrics", metrics, "Training metrics file")->required();
  }
};

struct Loaded {
  MarketDataset dataset;
  TrainingMetrics metrics;
  std::shared_ptr<const Predictor> predictor;
  std::unique_ptr<ThresholdClassifier> classifier;
};

Loaded load_inputs(const Inputs& in) {
  Loaded l;
  l.dataset = load_dataset(in.data);
  l.metrics = parse_metrics(read_text_file(in.metrics));
  l.predictor = share_predictor(load_model(in.model));
  l.classifier = std::make_unique<ThresholdClassifier>(l.predictor, l.metrics.threshold);
  if (l.classifier->dimension() != l.dataset.universe.size()) {
    throw Error(ErrorCode::kShapeError,
                "model expects " + std::to_string(l.classifier->dimension()) +
                    " features, dataset has " + std::to_string(l.dataset.universe.size()));
  }
  return l;
}

void print_checks(const std::vector<Check>& checks) {
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
  }
}

// ---------------------------------------------------------------------------

struct GenData {
  MarketArgs market;
  std::string out;
  std::size_t workers = 0;

  void run() const {
    Stopwatch sw("gen-data");
    const auto dataset = generate_dataset(market.spec, workers);
    save_dataset(dataset, out);
    log("wrote " + out + ": " + std::to_string(dataset.universe.size()) + " skills, " +
        std::to_string(dataset.jobs.size()) + " jobs, " +
        std::to_string(dataset.profiles.size()) + " profiles");
  }
};

struct Train {
  TrainArgs args;
  std::string data;
  std::string model_out;
  std::string metrics_out;
  std::uint64_t seed = 7;

  void run() const {
    Stopwatch sw("train");
    const auto dataset = load_dataset(data);
    const auto trained = train_gbt(dataset, args.params, seed);
    save_model(trained.model, model_out);
    auto metrics = training_metrics(dataset, trained, args.percentile);
    metrics.config = nlohmann::ordered_json{{"seed", seed},
                                            {"trees", args.params.n_trees},
                                            {"depth", args.params.max_depth},
                                            {"learning_rate", args.params.learning_rate},
                                            {"train_fraction", args.params.train_fraction},
                                            {"min_samples_leaf", args.params.min_samples_leaf},
                                            {"percentile", args.percentile}};
    write_text_file(metrics_out, serialize_metrics(metrics));
    std::cout << "test_rmse " << format_real(metrics.test_rmse) << "\nthreshold "
              << format_real(metrics.threshold) << "\n";
  }
};

struct Explain {
  Inputs inputs;
  SearchArgs search;
  std::string out;
  std::vector<std::uint64_t> ids;
  std::string split = "test";
  std::string only;
  std::size_t limit = 0;
  std::uint64_t seed = 7;
  std::size_t workers = 0;
  bool guide = false;

  void run() const {
    Stopwatch sw(guide ? "guide" : "explain");
    const Loaded l = load_inputs(inputs);
    const SearchConfig config = search.resolve(l.dataset.universe.size());
    std::vector<std::size_t> rows;
    if (!ids.empty()) {
      std::map<std::uint64_t, std::size_t> row_of;
      for (std::size_t r = 0; r < l.dataset.profiles.size(); ++r) {
        row_of[l.dataset.profiles[r].id] = r;
      }
      for (std::uint64_t id : ids) {
        const auto it = row_of.find(id);
        if (it == row_of.end()) {
          throw Error(ErrorCode::kInvalidArgument, "unknown profile id " + std::to_string(id));
        }
        rows.push_back(it->second);
      }
    } else {
      const Split s = split == "train" ? Split::kTrain
                      : split == "all" ? Split::kAll
                                       : Split::kTest;
      std::optional<Outcome> wanted;
      if (only == "favorable") wanted = Outcome::kFavorable;
      if (only == "unfavorable") wanted = Outcome::kUnfavorable;
      rows = select_rows(l.dataset, l.metrics, s, *l.classifier, wanted, limit, seed);
    }
    const auto batch = run_batch(l.dataset, rows, *l.classifier, config, workers);
    write_counterfactuals(out, batch);
    std::size_t found = 0;
    std::size_t already = 0;
    for (const auto& cf : batch.counterfactuals) {
      found += cf.status == SearchStatus::kFound;
      already += cf.status == SearchStatus::kAlreadyTarget;
    }
    std::cout << "instances " << rows.size() << "\nfound " << found << "\nalready_target "
              << already << "\nnot_found " << rows.size() - found - already << "\n";
  }
};

struct EvalArgs {
  Inputs inputs;
  std::string counterfactuals;
  std::string out_dir;
  std::size_t k_max = 5;
  std::size_t workers = 0;
  void add(CLI::App* app, std::size_t default_k) {
    k_max = default_k;
    inputs.add(app);
    app->add_option("--counterfactuals", counterfactuals, "Guidance records (JSON lines)")
        ->required();
    app->add_option("--out-dir", out_dir, "Report directory")->required();
    app->add_option("--k-max", k_max, "Largest k evaluated")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--workers", workers, "Worker threads (0: all cores)")
        ->capture_default_str();
  }
};

struct EvalFlip {
  EvalArgs eval;
  AttributionSettings attribution;

  void run() const {
    Stopwatch sw("eval-flip");
    const Loaded l = load_inputs(eval.inputs);
    const auto records = read_counterfactuals(eval.counterfactuals);
    const auto batch = batch_from_records(l.dataset, records);
    const auto rankings =
        attribution_rankings(*l.predictor, batch, attribution, eval.workers);
    const auto report =
        sequential_report(*l.classifier, batch, rankings, eval.k_max, eval.workers);
    const auto checks = sequential_checks(report);
    fs::create_directories(eval.out_dir);
    const fs::path dir(eval.out_dir);
    write_text_file((dir / "table1.csv").string(), flip_curves_csv(report.curves));
    nlohmann::ordered_json j;
    j["instances"] = report.n_instances;
    j["found"] = report.n_found;
    j["max_counterfactual_size"] = report.max_counterfactual_size;
    j["curves"] = flip_curves_json(report.curves);
    j["checks"] = checks_json(checks);
    write_text_file((dir / "table1.json").string(), j.dump(2) + "\n");
    std::cout << flip_curves_csv(report.curves);
    print_checks(checks);
  }
};

struct EvalAggregate {
  EvalArgs eval;
  std::uint64_t seed = 7;

  void run() const {
    Stopwatch sw("eval-aggregate");
    const Loaded l = load_inputs(eval.inputs);
    const auto records = read_counterfactuals(eval.counterfactuals);
    const auto batch = batch_from_records(l.dataset, records);
    const auto report =
        aggregate_report(*l.classifier, l.dataset, batch, eval.k_max, eval.workers);
    auto checks = aggregate_checks(report, seed);
    const auto sparsity = sparsity_stats(batch.counterfactuals, batch.instances);
    const std::vector<FlipCurve> curves{report.demand, report.aggregate};
    fs::create_directories(eval.out_dir);
    const fs::path dir(eval.out_dir);
    write_text_file((dir / "table2.csv").string(), flip_curves_csv(curves));
    write_text_file((dir / "cf_frequency.csv").string(),
                    frequency_csv(report.counterfactual_counts, l.dataset.universe));
    write_text_file((dir / "demand_frequency.csv").string(),
                    frequency_csv(report.demand_counts, l.dataset.universe));
    nlohmann::ordered_json j;
    j["instances"] = batch.instances.size();
    j["sparsity"] = sparsity_json(sparsity);
    j["curves"] = flip_curves_json(curves);
    const std::vector<FlipCurve> by_label{report.demand_by_label, report.aggregate_by_label};
    j["curves_by_label"] = flip_curves_json(by_label);
    j["checks"] = checks_json(checks);
    write_text_file((dir / "table2.json").string(), j.dump(2) + "\n");
    write_text_file((dir / "timing.json").string(),
                    timing_json(timing_stats(batch.counterfactuals)).dump(2) + "\n");
    std::cout << flip_curves_csv(curves);
    std::cout << "mean_changes " << format_real(sparsity.mean_changes) << "\nmean_active "
              << format_real(sparsity.mean_active) << "\n";
    print_checks(checks);
  }
};

struct Bench {
  BenchConfig config;
  MarketArgs market;
  TrainArgs train;
  std::string out_dir;

  void run() {
    Stopwatch sw("bench");
    config.market = market.spec;
    config.gbt = train.params;
    config.percentile = train.percentile;
    const auto r = run_bench(config, out_dir);
    std::cout << "test_rmse " << format_real(r.metrics.test_rmse) << "\nthreshold "
              << format_real(r.metrics.threshold) << "\nguide_instances "
              << r.guide.instances.size() << "\nguide_found " << r.sequential.n_found
              << "\nmean_changes " << format_real(r.sparsity.mean_changes)
              << "\nmean_active " << format_real(r.sparsity.mean_active)
              << "\nmean_search_s " << format_real(r.guide_timing.mean_s) << "\n";
    std::cout << "table1\n" << flip_curves_csv(r.sequential.curves);
    const std::vector<FlipCurve> table2{r.aggregate.demand, r.aggregate.aggregate};
    std::cout << "table2\n" << flip_curves_csv(table2);
    print_checks(r.checks);
  }
};

void add_attribution_options(CLI::App* app, AttributionSettings& a, bool with_seed) {
  if (with_seed) {
    app->add_option("--seed", a.seed, "Seed for the attribution samplers")
        ->capture_default_str();
  }
  app->add_option("--lime-samples", a.lime.n_samples, "Perturbations per instance")
      ->check(CLI::Range(std::size_t{50}, std::size_t{1} << 30))
      ->capture_default_str();
  app->add_option("--lime-top", a.lime.n_top, "Features kept in the LIME ranking")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--lime-pool", a.lime_absent_pool,
                  "Absent skills perturbed by LIME besides the active ones")
      ->capture_default_str();
  app->add_option("--shap-permutations", a.shap_permutations, "Permutations per instance")
      ->check(CLI::Range(std::size_t{10}, std::size_t{1} << 30))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual explanations for skill-based job recommendation"};
  app.require_subcommand(1);

  GenData gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic market dataset");
  gen.market.add(gen_cmd);
  gen_cmd->add_option("--out", gen.out, "Output file")->required();
  gen_cmd->add_option("--workers", gen.workers, "Worker threads (0: all cores)")
      ->capture_default_str();

  Train train;
  auto* train_cmd = app.add_subcommand("train", "Train the boosted-tree reach model");
  train.args.add(train_cmd);
  train_cmd->add_option("--data", train.data, "Dataset (JSON lines)")->required();
  train_cmd->add_option("--model-out", train.model_out, "Model output file")->required();
  train_cmd->add_option("--metrics-out", train.metrics_out, "Metrics output file")
      ->required();
  train_cmd->add_option("--seed", train.seed, "Split seed")->capture_default_str();

  Explain explain;
  Explain guide;
  guide.guide = true;
  explain.only = "favorable";
  explain.limit = 200;
  guide.only = "unfavorable";
  guide.limit = 1000;
  auto* explain_cmd = app.add_subcommand(
      "explain", "Find skills whose removal changes the recommendation");
  auto* guide_cmd = app.add_subcommand(
      "guide", "Find absent skills whose addition changes the recommendation");
  for (auto [cmd, e, defaults] :
       {std::tuple{explain_cmd, &explain, SearchConfig::Removal()},
        std::tuple{guide_cmd, &guide, SearchConfig::Addition()}}) {
    e->inputs.add(cmd);
    e->search.add(cmd, defaults);
    cmd->add_option("--out", e->out, "Output records (JSON lines)")->required();
    cmd->add_option("--ids", e->ids, "Explicit profile ids (overrides selection)")
        ->delimiter(',');
    cmd->add_option("--split", e->split, "Profiles to draw from")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    cmd->add_option("--only", e->only, "Keep profiles of this predicted class")
        ->check(CLI::IsMember({"favorable", "unfavorable", "any"}))
        ->capture_default_str();
    cmd->add_option("--limit", e->limit, "Maximum number of profiles (seeded sample)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--seed", e->seed, "Sampling seed")->capture_default_str();
    cmd->add_option("--workers", e->workers, "Worker threads (0: all cores)")
        ->capture_default_str();
  }

  EvalFlip eval_flip;
  auto* flip_cmd = app.add_subcommand(
      "eval-flip", "Sequential flip rates of LIME, SHAP and counterfactual rankings");
  eval_flip.eval.add(flip_cmd, 5);
  add_attribution_options(flip_cmd, eval_flip.attribution, true);

  EvalAggregate eval_agg;
  auto* agg_cmd = app.add_subcommand(
      "eval-aggregate", "Global top-k flip rates of demand and counterfactual rankings");
  eval_agg.eval.add(agg_cmd, 10);
  agg_cmd->add_option("--seed", eval_agg.seed, "Seed reported with the check")
      ->capture_default_str();

  Bench bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run the whole pipeline into one directory");
  bench.market.add(bench_cmd);
  bench.train.add(bench_cmd);
  bench_cmd->add_option("--out-dir", bench.out_dir, "Output directory")->required();
  bench_cmd->add_option("--n-guide", bench.config.n_guide, "Unfavorable instances guided")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--n-explain", bench.config.n_explain,
                        "Favorable instances explained")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--k-sequential", bench.config.k_sequential, "k_max for table 1")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--k-aggregate", bench.config.k_aggregate, "k_max for table 2")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--workers", bench.config.workers, "Worker threads (0: all cores)")
      ->capture_default_str();
  add_attribution_options(bench_cmd, bench.config.attribution, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen_cmd) gen.run();
    if (*train_cmd) train.run();
    if (*explain_cmd) explain.run();
    if (*guide_cmd) guide.run();
    if (*flip_cmd) eval_flip.run();
    if (*agg_cmd) eval_agg.run();
    if (*bench_cmd) bench.run();
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return is_usage_error(e.code()) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
