/*
 * Copyright 2026 The xppa Authors.
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

// Acceptance suite. Prints one line per criterion:
//   criterion N: PASS|FAIL|SKIP  <details>
// Exit status: 0 when nothing failed (77 when the only selected criterion was
// skipped), 1 otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "support/brute_shapley.h"
#include "support/synthetic.h"
#include "xppa/encoding.h"
#include "xppa/error.h"
#include "xppa/kpi.h"
#include "xppa/pipeline.h"
#include "xppa/shapley.h"

namespace fs = std::filesystem;
using namespace xppa;
using namespace xppa::testing;

namespace {

enum class Outcome { kPass, kFail, kSkip };

struct Result {
  Outcome outcome = Outcome::kPass;
  std::string details;
};

using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path ScratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "xppa_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void WriteLog(const EventLog& log, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  WriteCsv(log, out);
}

// One random game for the axiom checks.
struct Game {
  std::size_t m = 0;
  TreeEnsemble f;
  TreeEnsemble g;
  std::vector<bool> usable;
  std::vector<double> background;
  std::vector<double> instance;
};

std::vector<Game> RandomGames(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Game> games;
  for (std::size_t i = 0; i < count; ++i) {
    Game game;
    game.m = 2 + i % 9;  // 2..10
    game.usable.assign(game.m, true);
    // At least one dummy feature when m > 2.
    if (game.m > 2) game.usable[game.m - 1] = false;
    const int depth = 1 + static_cast<int>(i % 3);
    game.f = RandomEnsemble(rng, game.m, 1 + i % 4, depth, game.usable);
    game.g = RandomEnsemble(rng, game.m, 1 + (i + 1) % 4, depth, game.usable);
    game.background = RandomRows(rng, 100, game.m);
    game.instance = RandomRows(rng, 1, game.m);
    games.push_back(std::move(game));
  }
  return games;
}

Oracle Wrap(std::function<double(std::span<const double>)> f) {
  return Oracle{std::move(f), {}};
}

Result Criterion1() {
  const auto start = Clock::now();
  const std::vector<Game> games = RandomGames(60, 11);
  double worst_eff = 0, worst_sym = 0, worst_dummy = 0, worst_lin = 0;
  bool ok = true;
  for (const Game& game : games) {
    const PayoutConfig payout{game.m, game.background};
    const auto f = game.f;
    const ShapleyVector v = ExactShapley(Wrap(f), game.instance, payout);
    const double sum = std::accumulate(v.values.begin(), v.values.end(), 0.0);
    const double eff = std::abs(sum + v.base_value - v.prediction) /
                       std::max(1.0, std::abs(v.prediction));
    worst_eff = std::max(worst_eff, eff);
    ok &= eff <= 1e-6;

    for (std::size_t i = 0; i < game.m; ++i) {
      if (!game.usable[i]) {
        worst_dummy = std::max(worst_dummy, std::abs(v.values[i]));
      }
    }

    // Symmetry: f(x) + f(x with features 0 and 1 swapped), duplicated column.
    auto sym = [f](std::span<const double> x) {
      std::vector<double> y(x.begin(), x.end());
      std::swap(y[0], y[1]);
      return f(x) + f(y);
    };
    std::vector<double> inst = game.instance;
    inst[1] = inst[0];
    std::vector<double> bg = game.background;
    for (std::size_t r = 0; r < 100; ++r) bg[r * game.m + 1] = bg[r * game.m];
    const ShapleyVector s = ExactShapley(Wrap(sym), inst, PayoutConfig{game.m, bg});
    worst_sym = std::max(worst_sym, std::abs(s.values[0] - s.values[1]));

    // Linearity.
    const auto g = game.g;
    const ShapleyVector vg = ExactShapley(Wrap(g), game.instance, payout);
    const ShapleyVector vfg = ExactShapley(
        Wrap([f, g](std::span<const double> x) { return f(x) + g(x); }),
        game.instance, payout);
    for (std::size_t i = 0; i < game.m; ++i) {
      worst_lin = std::max(worst_lin,
                           std::abs(vfg.values[i] - v.values[i] - vg.values[i]));
    }
  }
  ok &= worst_sym <= 1e-9 && worst_dummy <= 1e-9 && worst_lin <= 1e-9;
  const double seconds = SecondsSince(start);
  ok &= seconds < 60;
  return {ok ? Outcome::kPass : Outcome::kFail,
          fmt::format("{} games; efficiency {:.2e}, symmetry {:.2e}, dummy {:.2e}, "
                      "linearity {:.2e}; {:.1f}s",
                      games.size(), worst_eff, worst_sym, worst_dummy, worst_lin,
                      seconds)};
}

Result Criterion2() {
  const std::vector<Game> games = RandomGames(60, 11);
  double worst = 0;
  for (const Game& game : games) {
    const PayoutConfig payout{game.m, game.background};
    const auto f = game.f;
    const std::vector<double> brute =
        BruteForceShapley(f, game.instance, game.background, game.m);
    // Plain oracle and one carrying a dependency mask.
    const ShapleyVector plain = ExactShapley(Wrap(f), game.instance, payout);
    const ShapleyVector masked =
        ExactShapley(Oracle{f, game.usable}, game.instance, payout);
    for (std::size_t i = 0; i < game.m; ++i) {
      worst = std::max({worst, std::abs(plain.values[i] - brute[i]),
                        std::abs(masked.values[i] - brute[i])});
    }
  }
  return {worst <= 1e-9 ? Outcome::kPass : Outcome::kFail,
          fmt::format("{} oracles with m <= 10; max deviation {:.2e}", games.size(),
                      worst)};
}

Result Criterion3() {
  std::mt19937_64 rng(3);
  constexpr std::size_t m = 8;
  const TreeEnsemble f = RandomEnsemble(rng, m, 12, 3, {});
  const std::vector<double> background = RandomRows(rng, 100, m);
  const std::vector<double> instance = RandomRows(rng, 1, m);
  const PayoutConfig payout{m, background};
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t r = 0; r < payout.rows(); ++r) {
    const double y = f(payout.row(r));
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  const ShapleyVector exact = ExactShapley(Wrap(f), instance, payout);
  const ShapleyVector a = SampledShapley(Wrap(f), instance, payout, 2000, 99);
  const ShapleyVector b = SampledShapley(Wrap(f), instance, payout, 2000, 99);
  double worst = 0;
  for (std::size_t i = 0; i < m; ++i) {
    worst = std::max(worst, std::abs(a.values[i] - exact.values[i]));
  }
  const bool deterministic = a.values == b.values && a.base_value == b.base_value;
  const double tolerance = 0.05 * (hi - lo);
  return {worst <= tolerance && deterministic ? Outcome::kPass : Outcome::kFail,
          fmt::format("max |sampled - exact| {:.4f} vs tolerance {:.4f}; "
                      "deterministic={}",
                      worst, tolerance, deterministic)};
}

Result Criterion4() {
  const auto start = Clock::now();
  const fs::path dir = ScratchDir("c04");
  WriteLog(PlantedClosureLog(5000, 7), dir / "log.csv");
  const nlohmann::json config = {
      {"log", "log.csv"},
      {"kpi", {{"kind", "remaining_time"}}},
      {"dataset", {{"include_full_prefix", false}}},
      {"seed", 7},
      {"output_dir", "out"}};
  const RunConfig run = RunConfig::FromJson(config, dir);
  const ExperimentReport report = RunExperiment(run);
  const double seconds = SecondsSince(start);
  const double mae = report.evaluation.test_score;
  const double mean = report.evaluation.label_mean;
  const std::string top = report.globals.empty() ? "" : report.globals.front().label;
  const bool ok = mae <= 0.05 * mean && top == "closure_type=slow" && seconds < 300;
  return {ok ? Outcome::kPass : Outcome::kFail,
          fmt::format("MAE {:.4f}d vs 5% of mean {:.4f}d = {:.4f}d; top label '{}'; "
                      "history {}; {:.1f}s",
                      mae, mean, 0.05 * mean, top,
                      report.outcome.grid.chosen_history.HistoryLabel(), seconds)};
}

Result Criterion5() {
  const auto start = Clock::now();
  struct Case {
    std::string name;
    EventLog log;
  };
  std::vector<Case> cases;
  for (int k = 0; k <= 3; ++k) {
    cases.push_back({fmt::format("k*={}", k), HistorySignalLog(1500, k, 50 + k)});
  }
  cases.push_back({"aggregated", ReworkCountLog(1500, 60)});
  TrainConfig base;
  base.n_trees = 100;
  base.max_depth = 4;
  bool ok = true;
  std::string details;
  for (const Case& c : cases) {
    const LogSplit split = Split(c.log, SplitSpec{});
    const SearchContext context{&split, KpiSpec::RemainingTime(), {}, {}};
    const SearchResult heuristic = HistorySearch(context, base, SearchMode::kHeuristic);
    const SearchResult complete = HistorySearch(context, base, SearchMode::kComplete);
    const bool within = heuristic.validation_score <= complete.validation_score * 1.01;
    ok &= within;
    details += fmt::format("{}: heuristic {} ({:.0f}s) complete {} ({:.0f}s){}; ",
                           c.name, heuristic.chosen_history.HistoryLabel(),
                           heuristic.validation_score,
                           complete.chosen_history.HistoryLabel(),
                           complete.validation_score, within ? "" : " MISS");
  }
  details += fmt::format("{:.1f}s", SecondsSince(start));
  return {ok ? Outcome::kPass : Outcome::kFail, details};
}

// Log path or run-config path from the environment.
std::optional<RunConfig> PublicLogConfig(const char* variable, const fs::path& out) {
  const char* value = std::getenv(variable);
  if (value == nullptr || *value == '\0') return std::nullopt;
  const fs::path path(value);
  RunConfig config;
  if (path.extension() == ".json") {
    config = RunConfig::Load(path);
  } else {
    config.log_path = path;
    config.kpi = KpiSpec::RemainingTime();
  }
  config.output_dir = out;
  return config;
}

Result Criterion6() {
  struct Target {
    const char* variable;
    const char* name;
    double max_mae;
    bool needs_baseline_gain;
  };
  const std::vector<Target> targets = {
      {"XPPA_BPIC2013_LOG", "BPIC 2013", 12.5, true},
      {"XPPA_HELPDESK_LOG", "HelpDesk", 7.0, false}};
  bool failed = false, skipped = false;
  std::string details;
  for (const Target& t : targets) {
    auto config = PublicLogConfig(t.variable, ScratchDir(t.variable) / "out");
    if (!config) {
      skipped = true;
      details += fmt::format("{}: {} not set; ", t.name, t.variable);
      continue;
    }
    const auto start = Clock::now();
    const ExperimentReport r = RunExperiment(*config);
    const double seconds = SecondsSince(start);
    const double mae = r.evaluation.test_score;
    const double baseline = r.evaluation.baseline_score;
    bool ok = mae <= t.max_mae && seconds <= 900;
    if (t.needs_baseline_gain) ok &= mae <= 0.9 * baseline;
    failed |= !ok;
    details += fmt::format("{}: MAE {:.2f}d (limit {:.1f}d), baseline {:.2f}d, "
                           "{:.0f}s{}; ",
                           t.name, mae, t.max_mae, baseline, seconds,
                           ok ? "" : " FAIL");
  }
  if (failed) return {Outcome::kFail, details};
  if (skipped) return {Outcome::kSkip, details + "public logs unavailable"};
  return {Outcome::kPass, details};
}

Result Criterion7() {
  const fs::path dir = ScratchDir("c07");
  WriteLog(EscalationLog(2000, 17), dir / "log.csv");
  const nlohmann::json config = {
      {"log", "log.csv"},
      {"kpi", {{"kind", "activity_occurrence"}, {"target", "Escalate"}}},
      {"grid", {{"n_trees", {100}}, {"max_depth", {3, 6}}}},
      {"train", {{"n_trees", 100}, {"max_depth", 4}}},
      {"seed", 17},
      {"output_dir", "out"}};
  const RunConfig run = RunConfig::FromJson(config, dir);
  const ExperimentReport report = RunExperiment(run);
  const double f1 = report.evaluation.test_score;

  bool in_range = true;
  for (const CaseExplanation& c : report.locals) {
    in_range &= std::abs(c.vector.base_value) <= 1 && std::abs(c.vector.prediction) <= 1;
    for (double v : c.vector.values) in_range &= std::abs(v) <= 1;
  }

  // Ranking by |psi| before and after rescaling.
  const ModelBundle& bundle = report.outcome.bundle;
  const Oracle oracle = MakeOracle(bundle.model);
  const EncodedDataset rows =
      BuildDataset(SelectTraces(EscalationLog(2000, 17), {"case00001", "case00002"}),
                   nullptr, bundle.encoder);
  bool ranking = true;
  double worst_eff = 0;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const ShapleyVector raw = AdaptiveShapley(oracle, rows.row(r), bundle.background);
    const ShapleyVector scaled = RescaleBoolean(raw, KpiValueKind::kBoolean);
    std::vector<std::size_t> a(raw.values.size()), b(raw.values.size());
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    std::stable_sort(a.begin(), a.end(), [&](std::size_t i, std::size_t j) {
      return std::abs(raw.values[i]) > std::abs(raw.values[j]);
    });
    std::stable_sort(b.begin(), b.end(), [&](std::size_t i, std::size_t j) {
      return std::abs(scaled.values[i]) > std::abs(scaled.values[j]);
    });
    ranking &= a == b;
    const double sum = std::accumulate(scaled.values.begin(), scaled.values.end(), 0.0);
    worst_eff = std::max(worst_eff,
                         std::abs(sum - (scaled.prediction - scaled.base_value)));
  }
  const bool ok = f1 >= 0.95 && in_range && ranking && worst_eff <= 1e-6;
  return {ok ? Outcome::kPass : Outcome::kFail,
          fmt::format("F1 {:.4f}; displayed values within [-1, +1]: {}; ranking "
                      "preserved: {}; rescaled efficiency error {:.1e}",
                      f1, in_range, ranking, worst_eff)};
}

Result Criterion8() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> size(1, 300);
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<int> buckets(1, 8);
  std::normal_distribution<double> noise(0, 1);
  std::bernoulli_distribution nan(0.05);
  bool ok = true;
  std::size_t checked_values = 0;
  for (int f = 0; f < 1000; ++f) {
    const int n = size(rng);
    const int k = kind(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      switch (k) {
        case 0: x[i] = noise(rng) * 100; break;
        case 1: x[i] = std::floor(noise(rng) * 3); break;  // many ties
        case 2: x[i] = 42; break;                          // constant
        default: x[i] = std::exp(noise(rng) * 3); break;   // skewed
      }
      y[i] = std::sin(x[i]) * 5 + (x[i] > 1 ? 3 : 0) + noise(rng);
      if (nan(rng)) x[i] = std::nan("");
    }
    DiscretizerOptions options;
    options.max_buckets = static_cast<std::size_t>(buckets(rng));
    const Discretizer d = FitDiscretizer(x, y, options);
    const auto& w = d.boundaries();
    ok &= d.bucket_count() <= options.max_buckets;
    for (std::size_t i = 1; i < w.size(); ++i) ok &= w[i - 1] < w[i];
    for (double v : x) {
      if (std::isnan(v)) continue;
      const std::size_t b = d.BucketOf(v);
      // Exactly one bucket [w_{b-1}, w_b) holds v.
      std::size_t holders = 0;
      for (std::size_t c = 0; c < d.bucket_count(); ++c) {
        const bool above = c == 0 || v >= w[c - 1];
        const bool below = c == w.size() || v < w[c];
        holders += above && below;
        if (above && below) ok &= c == b;
      }
      ok &= holders == 1;
      ++checked_values;
    }
    if (k == 2) ok &= w.empty();
  }
  // Step fixture: y = 0 for x < 5, 10 otherwise, x on 0, 0.5, ..., 10.
  std::vector<double> x, y;
  for (int i = 0; i <= 20; ++i) {
    x.push_back(i * 0.5);
    y.push_back(i * 0.5 < 5 ? 0 : 10);
  }
  DiscretizerOptions q8;
  q8.max_buckets = 8;
  const Discretizer step = FitDiscretizer(x, y, q8);
  const bool step_ok = step.boundaries() == std::vector<double>{4.75};
  ok &= step_ok;
  return {ok ? Outcome::kPass : Outcome::kFail,
          fmt::format("1000 features, {} values checked; step boundaries [{}]",
                      checked_values, fmt::join(step.boundaries(), ", "))};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result Criterion9() {
  const fs::path dir = ScratchDir("c09");
  WriteLog(PlantedClosureLog(400, 9), dir / "log.csv");
  const nlohmann::json config = {
      {"log", "log.csv"},
      {"kpi", {{"kind", "remaining_time"}}},
      {"enrich", {{"time_from_start", true}, {"weekday", true}}},
      {"split", {{"strategy", "random"}}},
      {"grid", {{"n_trees", {50, 100}}, {"max_depth", {3}}}},
      {"train", {{"n_trees", 50}, {"max_depth", 3}}},
      {"explain", {{"background_size", 30}, {"exact_threshold", 4},
                   {"n_permutations", 50}}},
      {"seed", 123},
      {"output_dir", "out"}};
  {
    std::ofstream out(dir / "config.json");
    out << config.dump(2);
  }
  const std::vector<std::string> files = {"report.json", "model.json",
                                          "explanations.json", "global.json",
                                          "report/global.svg", "report/index.html"};
  std::vector<std::string> first;
  for (int run = 0; run < 2; ++run) {
    const std::string cmd = fmt::format("\"{}\" run --config \"{}\" > \"{}\" 2>&1",
                                        XPPA_CLI_PATH, (dir / "config.json").string(),
                                        (dir / fmt::format("run{}.txt", run)).string());
    if (std::system(cmd.c_str()) != 0) {
      return {Outcome::kFail, "run failed: " + Slurp(dir / fmt::format("run{}.txt", run))};
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
      const std::string bytes = Slurp(dir / "out" / files[i]);
      if (run == 0) {
        first.push_back(bytes);
      } else if (bytes != first[i] || bytes.empty()) {
        return {Outcome::kFail, files[i] + " differs between runs"};
      }
    }
  }
  return {Outcome::kPass, fmt::format("{} artifacts byte-identical across two runs",
                                      files.size())};
}

Result Criterion10() {
  std::mt19937_64 rng(10);
  bool ok = true;
  std::size_t total_rows = 0, final_prefixes = 0;
  for (int i = 0; i < 100; ++i) {
    const EventLog log = RandomLog(rng, 40, 12);
    std::size_t events = 0;
    for (const Trace& t : log.traces) events += t.size();
    const EncodedDataset unlabeled = BuildDataset(log, KpiSpec::RemainingTime(),
                                                  EncoderConfig::History(2));
    const KpiSpec occurrence = KpiSpec::ActivityOccurrence("A1");
    const EncodedDataset labeled =
        BuildDataset(log, occurrence, EncoderConfig::LastOnly());
    ok &= unlabeled.rows() == events && labeled.rows() == events;
    total_rows += labeled.rows();
    for (std::size_t r = 0; r < labeled.rows(); ++r) {
      const Trace* t = log.FindTrace(labeled.provenance[r].case_id);
      if (labeled.provenance[r].prefix_length == t->size()) {
        ok &= labeled.labels[r] == 0.0;
        ++final_prefixes;
      }
    }
  }
  return {ok ? Outcome::kPass : Outcome::kFail,
          fmt::format("100 logs, {} prefix rows, {} full-trace labels all false",
                      total_rows, final_prefixes)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")
      ->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Result()>> criteria = {
      Criterion1, Criterion2, Criterion3, Criterion4, Criterion5,
      Criterion6, Criterion7, Criterion8, Criterion9, Criterion10};
  int failed = 0, passed = 0, skipped = 0;
  for (int i = 1; i <= 10; ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i) == only.end()) continue;
    Result r;
    try {
      r = criteria[i - 1]();
    } catch (const std::exception& e) {
      r = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = r.outcome == Outcome::kPass   ? "PASS"
                      : r.outcome == Outcome::kFail ? "FAIL"
                                                    : "SKIP";
    std::cout << fmt::format("criterion {}: {}  {}", i, tag, r.details) << std::endl;
    failed += r.outcome == Outcome::kFail;
    passed += r.outcome == Outcome::kPass;
    skipped += r.outcome == Outcome::kSkip;
  }
  if (failed > 0) return 1;
  if (passed == 0 && skipped > 0) return 77;
  return 0;
}
