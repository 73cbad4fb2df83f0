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

#ifndef XPPA_PIPELINE_H_
#define XPPA_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xppa/encoding.h"
#include "xppa/event_log.h"
#include "xppa/gbdt.h"
#include "xppa/kpi.h"
#include "xppa/shapley.h"

namespace xppa {

enum class SplitStrategy { kChronological, kSeededRandom };

struct SplitSpec {
  double train_fraction = 2.0 / 3.0;
  double validation_fraction = 0.2;
  SplitStrategy strategy = SplitStrategy::kChronological;
  std::uint64_t seed = 0;
};

struct LogSplit {
  EventLog train;
  EventLog validation;
  EventLog test;
};

// Trace-level partition. Pool = ceil(n * train_fraction) traces (at most
// n - 1), validation = max(1, floor(pool * validation_fraction)) of the pool.
// Chronological order uses the first event timestamp, ties by case id; the
// latest traces form the test set and the latest pool traces the validation
// set.
LogSplit Split(const EventLog& log, const SplitSpec& spec);

double MeanAbsoluteError(std::span<const double> predictions,
                         std::span<const double> labels);
// Positive class at prediction >= 0.5. 1.0 when there are no positives and
// none are predicted.
double F1Score(std::span<const double> predictions,
               std::span<const double> labels);

// MAE for numeric KPIs, F1 for boolean ones.
double Score(std::span<const double> predictions,
             std::span<const double> labels, KpiValueKind kind);
double Score(const GbdtModel& model, const EncodedDataset& dataset,
             KpiValueKind kind);

// Lower MAE or higher F1.
bool Better(double candidate, double incumbent, KpiValueKind kind);
// Better by at least 1% of the incumbent.
bool ImprovesByOnePercent(double candidate, double incumbent, KpiValueKind kind);

enum class SearchMode { kHeuristic, kComplete };

struct TrialRecord {
  EncoderConfig encoder;
  TrainConfig train;
  double score = 0;
};

struct SearchResult {
  EncoderConfig chosen_history;
  TrainConfig chosen_train;
  double validation_score = 0;
  std::vector<TrialRecord> trail;
};

// Shared inputs of the search stages. Logs must already be enriched.
struct SearchContext {
  const LogSplit* split = nullptr;
  KpiSpec kpi;
  EnrichFlags enrich;
  DatasetOptions dataset_options;
};

// Trains on the training log with `encoder_config`, scores on validation.
TrialRecord Evaluate(const SearchContext& context,
                     const EncoderConfig& encoder_config,
                     const TrainConfig& train_config);

// Evaluates k = 0, 1, ... up to `max_k` (round(mean events per training
// trace) when negative). Heuristic mode stops after two consecutive steps
// that fail to improve on the incumbent by 1%. The aggregated encoding is
// evaluated once in both modes and replaces the incumbent when better.
SearchResult HistorySearch(const SearchContext& context,
                           const TrainConfig& base, SearchMode mode,
                           int max_k = -1);

struct Grid {
  std::vector<int> n_trees = {100, 300, 600};
  std::vector<int> max_depth = {3, 6, 10};

  static Grid Desk() { return {}; }
  static Grid Large() { return {{1500, 3000, 4000}, {3, 6, 10}}; }
};

// Every cell is trained and scored; ties go to fewer trees, then smaller
// depth.
SearchResult GridSearch(const SearchContext& context,
                        const EncoderConfig& history, const Grid& grid,
                        const TrainConfig& base);

struct ExplainConfig {
  std::size_t background_size = 100;
  std::size_t exact_threshold = kDefaultExactThreshold;
  std::size_t n_permutations = 2000;
  std::size_t max_buckets = 4;
  double min_bucket_fraction = 0.0;
  SortKey sort = SortKey::kMean;
};

struct RunConfig {
  std::filesystem::path log_path;
  CsvConfig csv;
  KpiSpec kpi;
  EnrichFlags enrich;
  SplitSpec split;
  SearchMode search_mode = SearchMode::kHeuristic;
  int max_history = -1;
  // Skips the history search when set.
  std::optional<EncoderConfig> fixed_history;
  Grid grid;
  TrainConfig train;
  DatasetOptions dataset_options;
  ExplainConfig explain;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  // Relative paths resolve against `base_dir`.
  static RunConfig FromJson(const nlohmann::json& j,
                            const std::filesystem::path& base_dir = {});
  static RunConfig Load(const std::filesystem::path& path);
  nlohmann::json ToJson() const;
};

nlohmann::json ToJson(const KpiSpec& spec);
KpiSpec KpiSpecFromJson(const nlohmann::json& j);

// Everything needed to predict and explain new prefixes.
struct ModelBundle {
  GbdtModel model;
  Encoder encoder;
  KpiSpec kpi;
  DiscretizerSet discretizers;
  PayoutConfig background;
  // Mean final KPI value over completed training traces.
  double average_final_kpi = 0;

  nlohmann::json ToJson() const;
  static ModelBundle FromJson(const nlohmann::json& j);
};

// Loaded, enriched and split input log.
struct PreparedLog {
  EventLog log;
  LogSplit split;
  LogStats stats;
};

PreparedLog Prepare(const RunConfig& config);

struct TrainOutcome {
  SearchResult history;
  SearchResult grid;
  ModelBundle bundle;
};

// History search, grid search, then a final fit on train + validation.
TrainOutcome TrainStage(const RunConfig& config, const PreparedLog& prepared);

// Scores are in display units (days for remaining time).
struct Evaluation {
  std::string metric;
  double test_score = 0;
  // Mean label per prefix length learned on train + validation.
  double baseline_score = 0;
  // Mean test label.
  double label_mean = 0;
  std::size_t test_rows = 0;
};

Evaluation EvaluateStage(const RunConfig& config, const ModelBundle& bundle,
                         const PreparedLog& prepared);

struct CaseExplanation {
  ShapleyVector vector;
  std::vector<Explanation> explanations;
  std::string last_activity;
  std::optional<double> current_kpi;
  double predicted_final = 0;
  // predicted_final - average final KPI of the training traces.
  double delta_vs_average = 0;
};

// Explains every prefix of every trace (offline) or only the last prefix of
// each trace (online). Values are in display units; boolean KPIs are
// reported on the [-1, +1] scale. Identical encoded rows are explained once.
std::vector<CaseExplanation> ExplainLog(const RunConfig& config,
                                        const ModelBundle& bundle,
                                        const EventLog& log, bool last_only);

nlohmann::json ToJson(const CaseExplanation& c);
CaseExplanation CaseExplanationFromJson(const nlohmann::json& j);

struct ExperimentReport {
  LogStats stats;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::size_t n_test = 0;
  TrainOutcome outcome;
  Evaluation evaluation;
  std::vector<CaseExplanation> locals;
  std::vector<GlobalExplanation> globals;
};

// Full offline run: prepare, train, evaluate, explain all test prefixes,
// aggregate. Writes report.json, model.json, explanations.json and
// global.json under config.output_dir.
ExperimentReport RunExperiment(const RunConfig& config);

nlohmann::json ReportJson(const RunConfig& config,
                          const ExperimentReport& report);

std::vector<GlobalExplanation> Aggregate(
    const std::vector<CaseExplanation>& locals, SortKey sort);

nlohmann::json ToJson(const SearchResult& result);
nlohmann::json ToJson(const LogStats& stats);

// Writes pretty-printed JSON followed by a newline.
void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json ReadJsonFile(const std::filesystem::path& path);

}  // namespace xppa

#endif  // XPPA_PIPELINE_H_
