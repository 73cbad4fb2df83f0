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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "support/synthetic.h"
#include "xppa/error.h"
#include "xppa/pipeline.h"

namespace xppa {
namespace {

namespace fs = std::filesystem;

Event At(const std::string& activity, double seconds) {
  return {activity, Instant{1704067200000 + static_cast<std::int64_t>(seconds * 1000)}, {}};
}

// Traces t1..tn starting at second i, listed in scrambled order.
EventLog NumberedLog(int n) {
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 1);
  std::mt19937_64 rng(n);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<Trace> traces;
  for (int id : ids) {
    traces.push_back({"t" + std::to_string(id), {At("A", id), At("B", id + 100)}});
  }
  return MakeEventLog(std::move(traces), {});
}

std::set<std::string> Ids(const EventLog& log) {
  std::set<std::string> ids;
  for (const Trace& t : log.traces) ids.insert(t.case_id);
  return ids;
}

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("xppa_pipeline_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(SplitTest, NineTraces) {
  const LogSplit s = Split(NumberedLog(9), SplitSpec{});
  EXPECT_EQ(s.train.traces.size(), 5u);
  EXPECT_EQ(s.validation.traces.size(), 1u);
  EXPECT_EQ(s.test.traces.size(), 3u);
  EXPECT_EQ(Ids(s.test), (std::set<std::string>{"t7", "t8", "t9"}));
  EXPECT_EQ(Ids(s.validation), (std::set<std::string>{"t6"}));
}

TEST(SplitTest, PartitionsForAnySizeAndStrategy) {
  for (int n = 3; n <= 40; ++n) {
    for (SplitStrategy strategy : {SplitStrategy::kChronological, SplitStrategy::kSeededRandom}) {
      const EventLog log = NumberedLog(n);
      SplitSpec spec;
      spec.strategy = strategy;
      spec.seed = n;
      const LogSplit s = Split(log, spec);
      const auto a = Ids(s.train), b = Ids(s.validation), c = Ids(s.test);
      EXPECT_FALSE(a.empty());
      EXPECT_FALSE(b.empty());
      EXPECT_FALSE(c.empty());
      std::set<std::string> all = a;
      all.insert(b.begin(), b.end());
      all.insert(c.begin(), c.end());
      EXPECT_EQ(all.size(), a.size() + b.size() + c.size());
      EXPECT_EQ(all, Ids(log));
    }
  }
}

TEST(SplitTest, RandomIsSeeded) {
  SplitSpec spec;
  spec.strategy = SplitStrategy::kSeededRandom;
  spec.seed = 4;
  const EventLog log = NumberedLog(30);
  EXPECT_EQ(Ids(Split(log, spec).test), Ids(Split(log, spec).test));
}

TEST(SplitTest, TooSmallLogIsAnError) {
  EXPECT_THROW(Split(NumberedLog(2), SplitSpec{}), Error);
}

TEST(ScoreTest, MaeAndF1) {
  const std::vector<double> labels = {1, 2, 3, 4};
  EXPECT_EQ(MeanAbsoluteError(labels, labels), 0.0);
  const std::vector<double> shifted = {1.5, 1.5, 3.5, 3.5};
  EXPECT_DOUBLE_EQ(MeanAbsoluteError(shifted, labels), 0.5);

  // TP 8, FP 2, FN 2, TN 3.
  std::vector<double> p, y;
  for (int i = 0; i < 8; ++i) p.push_back(0.9), y.push_back(1);
  for (int i = 0; i < 2; ++i) p.push_back(0.6), y.push_back(0);
  for (int i = 0; i < 2; ++i) p.push_back(0.2), y.push_back(1);
  for (int i = 0; i < 3; ++i) p.push_back(0.1), y.push_back(0);
  EXPECT_DOUBLE_EQ(F1Score(p, y), 0.8);
  EXPECT_DOUBLE_EQ(F1Score(std::vector<double>{0.5}, std::vector<double>{1}), 1.0);
  EXPECT_DOUBLE_EQ(F1Score(std::vector<double>{0.1}, std::vector<double>{0}), 1.0);
  EXPECT_EQ(Score(p, y, KpiValueKind::kBoolean), F1Score(p, y));
}

TEST(ScoreTest, BetterAndOnePercent) {
  EXPECT_TRUE(Better(1.0, 2.0, KpiValueKind::kNumeric));
  EXPECT_FALSE(Better(2.0, 2.0, KpiValueKind::kNumeric));
  EXPECT_TRUE(Better(0.9, 0.8, KpiValueKind::kBoolean));
  EXPECT_TRUE(ImprovesByOnePercent(98.9, 100, KpiValueKind::kNumeric));
  EXPECT_FALSE(ImprovesByOnePercent(99.5, 100, KpiValueKind::kNumeric));
  EXPECT_TRUE(ImprovesByOnePercent(0.81, 0.8, KpiValueKind::kBoolean));
  EXPECT_FALSE(ImprovesByOnePercent(0.805, 0.8, KpiValueKind::kBoolean));
}

TrainConfig SmallTrain() {
  TrainConfig c;
  c.n_trees = 40;
  c.max_depth = 3;
  return c;
}

TEST(HistorySearchTest, LastEventSignalStopsAfterTwoFlatSteps) {
  const LogSplit split = Split(testing::HistorySignalLog(600, 0, 70), SplitSpec{});
  const SearchContext context{&split, KpiSpec::RemainingTime(), {}, {}};
  const SearchResult r = HistorySearch(context, SmallTrain(), SearchMode::kHeuristic);
  EXPECT_EQ(r.chosen_history.HistoryLabel(), "0");
  std::vector<std::string> labels;
  for (const auto& t : r.trail) labels.push_back(t.encoder.HistoryLabel());
  EXPECT_EQ(labels, (std::vector<std::string>{"0", "1", "2", "aggr"}));
}

TEST(HistorySearchTest, PlantedSignalTwoBack) {
  const LogSplit split = Split(testing::HistorySignalLog(900, 2, 71), SplitSpec{});
  const SearchContext context{&split, KpiSpec::RemainingTime(), {}, {}};
  const SearchResult heuristic = HistorySearch(context, SmallTrain(), SearchMode::kHeuristic);
  const SearchResult complete = HistorySearch(context, SmallTrain(), SearchMode::kComplete, 4);
  EXPECT_EQ(heuristic.chosen_history.HistoryLabel(), "2");
  EXPECT_EQ(complete.chosen_history.HistoryLabel(), "2");
  EXPECT_EQ(complete.trail.size(), 6u);
}

TEST(GridSearchTest, OneCellAndExhaustiveTrail) {
  const LogSplit split = Split(testing::PlantedClosureLog(300, 72), SplitSpec{});
  const SearchContext context{&split, KpiSpec::RemainingTime(), {}, {}};
  const SearchResult one =
      GridSearch(context, EncoderConfig::LastOnly(), Grid{{20}, {2}}, SmallTrain());
  EXPECT_EQ(one.trail.size(), 1u);
  EXPECT_EQ(one.chosen_train.n_trees, 20);
  EXPECT_EQ(one.chosen_train.max_depth, 2);

  const Grid grid{{30, 10}, {4, 3}};
  const SearchResult all = GridSearch(context, EncoderConfig::LastOnly(), grid, SmallTrain());
  EXPECT_EQ(all.trail.size(), 4u);
  // Every cell fits the step equally well; the smallest one wins the tie.
  double best = all.trail[0].score;
  for (const auto& t : all.trail) best = std::min(best, t.score);
  EXPECT_EQ(all.validation_score, best);
  for (const auto& t : all.trail) {
    if (t.score == best) {
      EXPECT_EQ(all.chosen_train.n_trees, t.train.n_trees);
      EXPECT_EQ(all.chosen_train.max_depth, t.train.max_depth);
      break;
    }
  }
}

TEST(RunConfigTest, JsonRoundTripAndValidation) {
  const nlohmann::json j = {
      {"log", "data/log.csv"},
      {"columns", {{"case", "Case"}, {"activity", "Act"}, {"timestamp", "Time"}}},
      {"kpi", {{"kind", "activity_occurrence"}, {"target", "Escalate"}}},
      {"enrich", {{"time_from_start", true}, {"weekday", true}}},
      {"split", {{"train_fraction", 0.5}, {"validation_fraction", 0.25}, {"strategy", "random"}}},
      {"search", {{"mode", "complete"}, {"max_history", 3}}},
      {"grid", {{"n_trees", {10, 20}}, {"max_depth", {2}}}},
      {"seed", 5},
      {"output_dir", "results"}};
  const RunConfig c = RunConfig::FromJson(j, "/base");
  EXPECT_EQ(c.log_path, fs::path("/base/data/log.csv"));
  EXPECT_EQ(c.output_dir, fs::path("/base/results"));
  EXPECT_EQ(c.csv.case_column, "Case");
  EXPECT_EQ(c.kpi, KpiSpec::ActivityOccurrence("Escalate"));
  EXPECT_TRUE(c.enrich.weekday);
  EXPECT_EQ(c.split.strategy, SplitStrategy::kSeededRandom);
  EXPECT_EQ(c.search_mode, SearchMode::kComplete);
  EXPECT_EQ(c.max_history, 3);
  EXPECT_EQ(c.grid.n_trees, (std::vector<int>{10, 20}));

  const RunConfig again = RunConfig::FromJson(c.ToJson());
  EXPECT_EQ(again.ToJson(), c.ToJson());

  nlohmann::json typo = j;
  typo["seeed"] = 1;
  EXPECT_THROW(RunConfig::FromJson(typo), Error);
  nlohmann::json bad_kind = j;
  bad_kind["kpi"]["kind"] = "queue_length";
  EXPECT_THROW(RunConfig::FromJson(bad_kind), Error);
}

// Keys and JSON types of report.json.
void ExpectShape(const nlohmann::json& j, const nlohmann::json& shape, const std::string& at) {
  for (const auto& [key, type] : shape.items()) {
    ASSERT_TRUE(j.contains(key)) << at << "." << key;
    const auto& v = j.at(key);
    if (type.is_object()) {
      ASSERT_TRUE(v.is_object()) << at << "." << key;
      ExpectShape(v, type, at + "." + key);
      continue;
    }
    const std::string t = type.get<std::string>();
    if (t == "string") EXPECT_TRUE(v.is_string()) << at << "." << key;
    if (t == "number") EXPECT_TRUE(v.is_number()) << at << "." << key;
    if (t == "integer") EXPECT_TRUE(v.is_number_integer()) << at << "." << key;
    if (t == "array") EXPECT_TRUE(v.is_array()) << at << "." << key;
    if (t == "object") EXPECT_TRUE(v.is_object()) << at << "." << key;
  }
}

TEST(RunExperimentTest, EndToEndArtifacts) {
  const fs::path dir = Scratch("e2e");
  {
    std::ofstream out(dir / "log.csv");
    WriteCsv(testing::PlantedClosureLog(240, 73), out);
  }
  const nlohmann::json j = {{"log", "log.csv"},
                            {"kpi", {{"kind", "remaining_time"}}},
                            {"search", {{"history", 0}}},
                            {"grid", {{"n_trees", {40}}, {"max_depth", {3}}}},
                            {"dataset", {{"include_full_prefix", false}}},
                            {"explain", {{"background_size", 20}}},
                            {"seed", 3}};
  const RunConfig config = RunConfig::FromJson(j, dir);
  const ExperimentReport report = RunExperiment(config);
  ASSERT_FALSE(report.globals.empty());
  EXPECT_EQ(report.globals.front().label, "closure_type=slow");
  EXPECT_LT(report.evaluation.test_score, 0.05 * report.evaluation.label_mean);
  EXPECT_EQ(report.evaluation.metric, "mae");
  for (const auto& c : report.locals) {
    double sum = 0;
    for (const auto& e : c.explanations) sum += e.shapley_value;
    EXPECT_NEAR(sum, c.vector.prediction - c.vector.base_value,
                1e-6 * std::max(1.0, std::abs(c.vector.prediction)));
  }

  for (const char* name : {"report.json", "model.json", "explanations.json", "global.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / name)) << name;
  }
  const nlohmann::json shape = {
      {"format", "string"},
      {"version", "integer"},
      {"config", "object"},
      {"kpi", {{"kind", "string"}}},
      {"unit", "string"},
      {"log_stats", {{"n_traces", "integer"}, {"n_events", "integer"},
                     {"n_activities", "integer"}, {"mean_events_per_trace", "number"}}},
      {"split", {{"strategy", "string"}, {"n_train", "integer"},
                 {"n_validation", "integer"}, {"n_test", "integer"}}},
      {"history_search", {{"chosen_history", "string"}, {"validation_score", "number"},
                          {"trail", "array"}}},
      {"grid_search", {{"chosen_train", "object"}, {"trail", "array"}}},
      {"final_model", {{"history", "string"}, {"train", "object"}, {"n_trees_built", "integer"}}},
      {"evaluation", {{"metric", "string"}, {"test_score", "number"},
                      {"baseline_score", "number"}, {"label_mean", "number"},
                      {"test_rows", "integer"}}},
      {"average_final_kpi", "number"},
      {"n_explained", "integer"},
      {"top_global", "array"}};
  const nlohmann::json written = ReadJsonFile(dir / "out" / "report.json");
  ExpectShape(written, shape, "report");
  EXPECT_EQ(written["format"], "xppa-report");
  EXPECT_EQ(written["unit"], "days");
  for (const auto& g : written["top_global"]) {
    ExpectShape(g, {{"label", "string"}, {"mean", "number"}, {"median", "number"},
                    {"count", "integer"}},
                "top_global[]");
  }

  const ModelBundle bundle = ModelBundle::FromJson(ReadJsonFile(dir / "out" / "model.json"));
  EXPECT_EQ(bundle.model, report.outcome.bundle.model);
  EXPECT_EQ(bundle.ToJson().dump(), report.outcome.bundle.ToJson().dump());
}

TEST(ExplainLogTest, OnlineExplainsLastPrefixOnly) {
  const fs::path dir = Scratch("online");
  {
    std::ofstream out(dir / "log.csv");
    WriteCsv(testing::EscalationLog(200, 74), out);
  }
  const nlohmann::json j = {{"log", "log.csv"},
                            {"kpi", {{"kind", "activity_occurrence"}, {"target", "Escalate"}}},
                            {"search", {{"history", 0}}},
                            {"grid", {{"n_trees", {30}}, {"max_depth", {3}}}},
                            {"explain", {{"background_size", 10}}}};
  const RunConfig config = RunConfig::FromJson(j, dir);
  const PreparedLog prepared = Prepare(config);
  const TrainOutcome outcome = TrainStage(config, prepared);
  const auto online = ExplainLog(config, outcome.bundle, prepared.split.test, true);
  EXPECT_EQ(online.size(), prepared.split.test.traces.size());
  for (const auto& c : online) {
    EXPECT_GE(c.vector.prediction, -1.0);
    EXPECT_LE(c.vector.prediction, 1.0);
    const Trace* t = prepared.split.test.FindTrace(c.vector.provenance.case_id);
    ASSERT_NE(t, nullptr);
    EXPECT_EQ(c.vector.provenance.prefix_length, t->size());
  }
  const auto offline = ExplainLog(config, outcome.bundle, prepared.split.test, false);
  std::size_t events = 0;
  for (const Trace& t : prepared.split.test.traces) events += t.size();
  EXPECT_EQ(offline.size(), events);

  const nlohmann::json round = ToJson(CaseExplanationFromJson(ToJson(online.front())));
  EXPECT_EQ(round, ToJson(online.front()));
}

}  // namespace
}  // namespace xppa
