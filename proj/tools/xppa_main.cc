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

// Command-line front end: statistics, training, evaluation, explanations and
// static reports.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "xppa/error.h"
#include "xppa/event_log.h"
#include "xppa/pipeline.h"
#include "xppa/report.h"

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

struct Options {
  std::string config;
  std::string log;
  std::string case_col;
  std::string activity_col;
  std::string time_col;
  std::string time_format;
  std::string out;
  std::string mode = "offline";
  std::string running_log;
  std::string sort;
  std::string filter_label;
  std::size_t top_n = 15;
  std::string case_id;
  int prefix = 0;
  bool json = false;
};

void AddLogFlags(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Run-config JSON file");
  cmd->add_option("--log", o.log, "Event log (CSV or XES); overrides the config");
  cmd->add_option("--case-col", o.case_col, "Case id column");
  cmd->add_option("--activity-col", o.activity_col, "Activity column");
  cmd->add_option("--time-col", o.time_col, "Timestamp column");
  cmd->add_option("--time-format", o.time_format,
                  "strptime format of timestamps (default ISO-8601)");
  cmd->add_option("--out", o.out, "Output directory; overrides the config");
}

void AddExplainFlags(CLI::App* cmd, Options& o) {
  cmd->add_option("--mode", o.mode, "offline (test split) or online (running log)")
      ->check(CLI::IsMember({"offline", "online"}));
  cmd->add_option("--running-log", o.running_log,
                  "Log of running cases for online mode");
}

void AddReportFlags(CLI::App* cmd, Options& o) {
  cmd->add_option("--sort", o.sort, "Global ordering key")
      ->check(CLI::IsMember({"mean", "median"}));
  cmd->add_option("--filter-label", o.filter_label,
                  "Keep only labels containing this text");
  cmd->add_option("--top-n", o.top_n, "Bars in the global chart")
      ->check(CLI::PositiveNumber);
}

void ApplyColumns(const Options& o, xppa::CsvConfig& csv) {
  if (!o.case_col.empty()) csv.case_column = o.case_col;
  if (!o.activity_col.empty()) csv.activity_column = o.activity_col;
  if (!o.time_col.empty()) csv.timestamp_column = o.time_col;
  if (!o.time_format.empty()) csv.timestamp_format = o.time_format;
}

xppa::RunConfig LoadConfig(const Options& o) {
  if (o.config.empty()) throw xppa::Error("config", "--config is required");
  xppa::RunConfig c = xppa::RunConfig::Load(o.config);
  if (!o.log.empty()) c.log_path = o.log;
  if (!o.out.empty()) c.output_dir = o.out;
  ApplyColumns(o, c.csv);
  if (!o.sort.empty()) {
    c.explain.sort = o.sort == "median" ? xppa::SortKey::kMedian : xppa::SortKey::kMean;
  }
  return c;
}

xppa::ReportOptions MakeReportOptions(const Options& o, const xppa::RunConfig& c) {
  xppa::ReportOptions r;
  r.sort = c.explain.sort;
  if (!o.filter_label.empty()) r.filter_label = o.filter_label;
  r.top_n = o.top_n;
  return r;
}

xppa::ModelBundle LoadBundle(const xppa::RunConfig& c) {
  return xppa::ModelBundle::FromJson(xppa::ReadJsonFile(c.output_dir / "model.json"));
}

// Running log for online mode, enriched like the training log.
xppa::EventLog LoadRunningLog(const Options& o, const xppa::RunConfig& c,
                              const xppa::ModelBundle& bundle) {
  if (o.running_log.empty()) {
    throw xppa::Error("config", "online mode needs --running-log");
  }
  xppa::EventLog log = xppa::ReadLogFile(o.running_log, c.csv);
  const xppa::EnrichFlags& e = bundle.encoder.config().enrich;
  if (e.time_from_start || e.weekday || !e.running_cost.empty()) {
    log = xppa::Enrich(log, e);
  }
  return log;
}

void PrintGlobals(const std::vector<xppa::GlobalExplanation>& globals,
                  std::size_t top_n) {
  for (std::size_t i = 0; i < globals.size() && i < top_n; ++i) {
    const auto& g = globals[i];
    fmt::print("{:>12} {:>12} {:>6}  {}{}\n", xppa::FormatNumber(g.mean_influence),
               xppa::FormatNumber(g.median_influence), g.count, g.label,
               g.derived ? " (derived)" : "");
  }
}

void WriteExplanations(const std::filesystem::path& dir,
                       const std::vector<xppa::CaseExplanation>& locals,
                       const std::vector<xppa::GlobalExplanation>& globals) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : locals) arr.push_back(xppa::ToJson(c));
  xppa::WriteJsonFile(dir / "explanations.json", arr);
  xppa::WriteJsonFile(dir / "global.json", xppa::ToJson(globals));
}

int CmdStats(const Options& o) {
  xppa::EventLog log;
  if (!o.config.empty()) {
    const xppa::RunConfig c = LoadConfig(o);
    log = xppa::ReadLogFile(c.log_path, c.csv);
  } else {
    if (o.log.empty()) throw xppa::Error("config", "stats needs --config or --log");
    xppa::CsvConfig csv;
    ApplyColumns(o, csv);
    log = xppa::ReadLogFile(o.log, csv);
  }
  const xppa::LogStats s = xppa::ComputeLogStatistics(log);
  fmt::print("n_traces={}\n", s.n_traces);
  fmt::print("n_events={}\n", s.n_events);
  fmt::print("n_activities={}\n", s.n_activities);
  fmt::print("max_events_per_trace={}\n", s.max_events_per_trace);
  fmt::print("mean_events_per_trace={}\n", xppa::FormatNumber(s.mean_events_per_trace));
  fmt::print("median_events_per_trace={}\n",
             xppa::FormatNumber(s.median_events_per_trace));
  fmt::print("mean_duration_days={}\n", xppa::FormatNumber(s.mean_duration / 86400.0));
  fmt::print("std_duration_days={}\n", xppa::FormatNumber(s.std_duration / 86400.0));
  return 0;
}

int CmdTrain(const Options& o) {
  const xppa::RunConfig c = LoadConfig(o);
  const xppa::PreparedLog prepared = xppa::Prepare(c);
  const xppa::TrainOutcome outcome = xppa::TrainStage(c, prepared);
  xppa::WriteJsonFile(c.output_dir / "model.json", outcome.bundle.ToJson());
  xppa::WriteJsonFile(c.output_dir / "search.json",
                      {{"history_search", xppa::ToJson(outcome.history)},
                       {"grid_search", xppa::ToJson(outcome.grid)}});
  fmt::print("history={}\n", outcome.grid.chosen_history.HistoryLabel());
  fmt::print("n_trees={}\nmax_depth={}\n", outcome.grid.chosen_train.n_trees,
             outcome.grid.chosen_train.max_depth);
  fmt::print("validation_score={}\n", xppa::FormatNumber(outcome.grid.validation_score));
  fmt::print("model={}\n", (c.output_dir / "model.json").string());
  return 0;
}

int CmdEvaluate(const Options& o) {
  const xppa::RunConfig c = LoadConfig(o);
  const xppa::ModelBundle bundle = LoadBundle(c);
  const xppa::PreparedLog prepared = xppa::Prepare(c);
  const xppa::Evaluation e = xppa::EvaluateStage(c, bundle, prepared);
  xppa::WriteJsonFile(c.output_dir / "evaluation.json",
                      {{"metric", e.metric},
                       {"test_score", e.test_score},
                       {"baseline_score", e.baseline_score},
                       {"test_rows", e.test_rows}});
  fmt::print("metric={}\ntest_score={}\nbaseline_score={}\ntest_rows={}\n", e.metric,
             xppa::FormatNumber(e.test_score), xppa::FormatNumber(e.baseline_score),
             e.test_rows);
  return 0;
}

int CmdExplainGlobal(const Options& o) {
  const xppa::RunConfig c = LoadConfig(o);
  const xppa::ModelBundle bundle = LoadBundle(c);
  std::vector<xppa::CaseExplanation> locals;
  if (o.mode == "online") {
    locals = xppa::ExplainLog(c, bundle, LoadRunningLog(o, c, bundle), true);
  } else {
    const xppa::PreparedLog prepared = xppa::Prepare(c);
    locals = xppa::ExplainLog(c, bundle, prepared.split.test, false);
  }
  if (locals.empty()) throw xppa::Error("explain", "nothing to explain");
  const auto globals = xppa::Aggregate(locals, c.explain.sort);
  WriteExplanations(c.output_dir, locals, globals);
  PrintGlobals(globals, o.top_n);
  return 0;
}

int CmdExplainCase(const Options& o) {
  const xppa::RunConfig c = LoadConfig(o);
  const xppa::ModelBundle bundle = LoadBundle(c);
  xppa::EventLog log;
  if (o.mode == "online") {
    log = LoadRunningLog(o, c, bundle);
  } else {
    log = xppa::Prepare(c).log;
  }
  const xppa::Trace* trace = log.FindTrace(o.case_id);
  if (trace == nullptr) {
    throw xppa::Error("explain", fmt::format("case not found: {}", o.case_id));
  }
  const std::size_t length =
      o.prefix > 0 ? static_cast<std::size_t>(o.prefix) : trace->size();
  if (length > trace->size()) {
    throw xppa::Error("explain", fmt::format("case {} has only {} events",
                                             o.case_id, trace->size()));
  }
  const xppa::EventLog one = xppa::SelectTraces(log, {o.case_id});
  xppa::RunConfig single = c;
  single.dataset_options.include_full_prefix = true;
  const auto locals = xppa::ExplainLog(single, bundle, one, false);
  const xppa::CaseExplanation* chosen = nullptr;
  for (const auto& l : locals) {
    if (l.vector.provenance.prefix_length == length) chosen = &l;
  }
  if (chosen == nullptr) throw xppa::Error("explain", "prefix was not encoded");
  if (o.json) {
    fmt::print("{}\n", xppa::ToJson(*chosen).dump(2));
    return 0;
  }
  fmt::print("case_id={}\nprefix_length={}\nlast_activity={}\n", o.case_id, length,
             chosen->last_activity);
  fmt::print("prediction={}\nbase_value={}\n", xppa::FormatNumber(chosen->vector.prediction),
             xppa::FormatNumber(chosen->vector.base_value));
  fmt::print("predicted_final={} ({})\n", xppa::FormatNumber(chosen->predicted_final),
             xppa::FormatDelta(chosen->delta_vs_average));
  for (const auto& e : chosen->explanations) {
    fmt::print("{:>12}  {}{}\n", xppa::FormatNumber(e.shapley_value), e.label,
               e.derived ? " (derived)" : "");
  }
  return 0;
}

int CmdReport(const Options& o) {
  const xppa::RunConfig c = LoadConfig(o);
  const xppa::ReportInputs inputs = xppa::LoadReportInputs(c.output_dir);
  xppa::WriteReport(inputs, MakeReportOptions(o, c), c.output_dir / "report");
  fmt::print("report={}\n", (c.output_dir / "report" / "index.html").string());
  return 0;
}

int CmdRun(const Options& o) {
  const xppa::RunConfig c = LoadConfig(o);
  const xppa::ExperimentReport r = xppa::RunExperiment(c);
  const xppa::ReportInputs inputs = xppa::LoadReportInputs(c.output_dir);
  xppa::WriteReport(inputs, MakeReportOptions(o, c), c.output_dir / "report");
  fmt::print("history={}\n", r.outcome.grid.chosen_history.HistoryLabel());
  fmt::print("n_trees={}\nmax_depth={}\n", r.outcome.grid.chosen_train.n_trees,
             r.outcome.grid.chosen_train.max_depth);
  fmt::print("{}={}\nbaseline_{}={}\n", r.evaluation.metric,
             xppa::FormatNumber(r.evaluation.test_score), r.evaluation.metric,
             xppa::FormatNumber(r.evaluation.baseline_score));
  PrintGlobals(r.globals, o.top_n);
  fmt::print("report={}\n", (c.output_dir / "report" / "index.html").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable predictive process monitoring"};
  app.require_subcommand(1);
  Options o;

  auto* stats = app.add_subcommand("stats", "Log statistics");
  AddLogFlags(stats, o);
  auto* train = app.add_subcommand("train", "Search hyperparameters and train");
  AddLogFlags(train, o);
  auto* evaluate = app.add_subcommand("evaluate", "Score the model on the test split");
  AddLogFlags(evaluate, o);
  auto* global = app.add_subcommand("explain-global", "Explain and aggregate");
  AddLogFlags(global, o);
  AddExplainFlags(global, o);
  AddReportFlags(global, o);
  auto* one = app.add_subcommand("explain-case", "Explain one case");
  AddLogFlags(one, o);
  AddExplainFlags(one, o);
  one->add_option("case_id", o.case_id, "Case id")->required();
  one->add_option("--prefix", o.prefix, "Prefix length (default: whole case)")
      ->check(CLI::NonNegativeNumber);
  one->add_flag("--json", o.json, "Print JSON");
  auto* report = app.add_subcommand("report", "Render the static report");
  AddLogFlags(report, o);
  AddReportFlags(report, o);
  auto* run = app.add_subcommand("run", "Full experiment and report");
  AddLogFlags(run, o);
  AddReportFlags(run, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*stats) return CmdStats(o);
    if (*train) return CmdTrain(o);
    if (*evaluate) return CmdEvaluate(o);
    if (*global) return CmdExplainGlobal(o);
    if (*one) return CmdExplainCase(o);
    if (*report) return CmdReport(o);
    if (*run) return CmdRun(o);
  } catch (const xppa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: [internal] " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
