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

#include "xppa/pipeline.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "xppa/error.h"

namespace xppa {
namespace {

Objective ObjectiveFor(const KpiSpec& kpi) {
  return kpi.value_kind == KpiValueKind::kBoolean ? Objective::kLogistic
                                                  : Objective::kSquaredError;
}

EventLog UnionOf(const EventLog& a, const EventLog& b) {
  std::vector<Trace> traces = a.traces;
  traces.insert(traces.end(), b.traces.begin(), b.traces.end());
  return MakeEventLog(std::move(traces), a.schema);
}

EncoderConfig WithEnrich(EncoderConfig c, const EnrichFlags& enrich) {
  c.enrich = enrich;
  return c;
}

std::vector<std::uint64_t> RowKey(std::span<const double> row) {
  std::vector<std::uint64_t> key(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    key[i] = std::isnan(row[i]) ? 0x7ff8000000000000ULL
                                : std::bit_cast<std::uint64_t>(row[i]);
  }
  return key;
}

}  // namespace

LogSplit Split(const EventLog& log, const SplitSpec& spec) {
  const std::size_t n = log.traces.size();
  if (n < 3) {
    throw Error("config",
                fmt::format("splitting needs at least 3 traces, got {}", n));
  }
  if (!(spec.train_fraction > 0 && spec.train_fraction < 1) ||
      !(spec.validation_fraction > 0 && spec.validation_fraction < 1)) {
    throw Error("config", "split fractions must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (spec.strategy == SplitStrategy::kChronological) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Trace& ta = log.traces[a];
      const Trace& tb = log.traces[b];
      const Instant sa = ta.events.front().timestamp;
      const Instant sb = tb.events.front().timestamp;
      if (sa != sb) return sa < sb;
      return ta.case_id < tb.case_id;
    });
  } else {
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::size_t pool = static_cast<std::size_t>(
      std::ceil(static_cast<double>(n) * spec.train_fraction - 1e-9));
  pool = std::clamp<std::size_t>(pool, 2, n - 1);
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(static_cast<double>(pool) * spec.validation_fraction + 1e-9));
  n_val = std::clamp<std::size_t>(n_val, 1, pool - 1);

  std::set<std::string> train, validation, test;
  for (std::size_t r = 0; r < n; ++r) {
    const std::string& id = log.traces[order[r]].case_id;
    if (r < pool - n_val) {
      train.insert(id);
    } else if (r < pool) {
      validation.insert(id);
    } else {
      test.insert(id);
    }
  }
  return {SelectTraces(log, train), SelectTraces(log, validation),
          SelectTraces(log, test)};
}

double MeanAbsoluteError(std::span<const double> predictions,
                         std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw ContractViolation("predictions and labels differ in length");
  }
  if (labels.empty()) throw Error("score", "cannot score an empty dataset");
  double sum = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum += std::abs(predictions[i] - labels[i]);
  }
  return sum / static_cast<double>(labels.size());
}

double F1Score(std::span<const double> predictions,
               std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw ContractViolation("predictions and labels differ in length");
  }
  if (labels.empty()) throw Error("score", "cannot score an empty dataset");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = predictions[i] >= 0.5;
    const bool actual = labels[i] >= 0.5;
    if (predicted && actual) ++tp;
    if (predicted && !actual) ++fp;
    if (!predicted && actual) ++fn;
  }
  if (tp + fp + fn == 0) return 1.0;
  return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

double Score(std::span<const double> predictions,
             std::span<const double> labels, KpiValueKind kind) {
  return kind == KpiValueKind::kBoolean ? F1Score(predictions, labels)
                                        : MeanAbsoluteError(predictions, labels);
}

double Score(const GbdtModel& model, const EncodedDataset& dataset,
             KpiValueKind kind) {
  if (model.width() != dataset.width) {
    throw ContractViolation("dataset was encoded for a different model");
  }
  return Score(model.PredictAll(dataset), dataset.labels, kind);
}

bool Better(double candidate, double incumbent, KpiValueKind kind) {
  return kind == KpiValueKind::kBoolean ? candidate > incumbent
                                        : candidate < incumbent;
}

bool ImprovesByOnePercent(double candidate, double incumbent,
                          KpiValueKind kind) {
  if (!Better(candidate, incumbent, kind)) return false;
  return std::abs(candidate - incumbent) >= 0.01 * std::abs(incumbent);
}

TrialRecord Evaluate(const SearchContext& context,
                     const EncoderConfig& encoder_config,
                     const TrainConfig& train_config) {
  const LogSplit& split = *context.split;
  const EncoderConfig config = WithEnrich(encoder_config, context.enrich);
  const Encoder encoder = Encoder::Fit(split.train, config);
  const KpiEvaluator train_kpi(context.kpi, split.train.schema);
  const EncodedDataset train = BuildDataset(split.train, &train_kpi, encoder,
                                            context.dataset_options);
  const KpiEvaluator val_kpi(context.kpi, split.validation.schema);
  const EncodedDataset validation = BuildDataset(
      split.validation, &val_kpi, encoder, context.dataset_options);
  if (validation.rows() == 0) {
    throw Error("search", "validation split has no labelled prefixes");
  }
  const GbdtModel model =
      Train(train, train_config, ObjectiveFor(context.kpi), config);
  return {config, train_config,
          Score(model, validation, context.kpi.value_kind)};
}

SearchResult HistorySearch(const SearchContext& context,
                           const TrainConfig& base, SearchMode mode,
                           int max_k) {
  const KpiValueKind kind = context.kpi.value_kind;
  if (max_k < 0) {
    max_k = static_cast<int>(std::lround(
        ComputeLogStatistics(context.split->train).mean_events_per_trace));
  }
  SearchResult result;
  std::size_t best = 0;
  int non_improving = 0;
  for (int k = 0; k <= max_k; ++k) {
    result.trail.push_back(Evaluate(context, EncoderConfig::History(k), base));
    if (k == 0) continue;
    const double score = result.trail.back().score;
    const double incumbent = result.trail[best].score;
    if (mode == SearchMode::kComplete) {
      if (Better(score, incumbent, kind)) best = result.trail.size() - 1;
      continue;
    }
    if (ImprovesByOnePercent(score, incumbent, kind)) {
      best = result.trail.size() - 1;
      non_improving = 0;
    } else if (++non_improving == 2) {
      break;
    }
  }
  result.trail.push_back(Evaluate(context, EncoderConfig::Aggregated(), base));
  if (Better(result.trail.back().score, result.trail[best].score, kind)) {
    best = result.trail.size() - 1;
  }
  result.chosen_history = result.trail[best].encoder;
  result.chosen_train = base;
  result.validation_score = result.trail[best].score;
  return result;
}

SearchResult GridSearch(const SearchContext& context,
                        const EncoderConfig& history, const Grid& grid,
                        const TrainConfig& base) {
  if (grid.n_trees.empty() || grid.max_depth.empty()) {
    throw Error("config", "hyperparameter grid is empty");
  }
  std::vector<int> trees = grid.n_trees;
  std::vector<int> depths = grid.max_depth;
  std::sort(trees.begin(), trees.end());
  std::sort(depths.begin(), depths.end());
  SearchResult result;
  result.chosen_history = WithEnrich(history, context.enrich);
  std::optional<std::size_t> best;
  for (int t : trees) {
    for (int d : depths) {
      TrainConfig cfg = base;
      cfg.n_trees = t;
      cfg.max_depth = d;
      result.trail.push_back(Evaluate(context, history, cfg));
      if (!best || Better(result.trail.back().score, result.trail[*best].score,
                          context.kpi.value_kind)) {
        best = result.trail.size() - 1;
      }
    }
  }
  result.chosen_train = result.trail[*best].train;
  result.validation_score = result.trail[*best].score;
  return result;
}

PreparedLog Prepare(const RunConfig& config) {
  EventLog log = ReadLogFile(config.log_path, config.csv);
  const EnrichFlags& e = config.enrich;
  if (e.time_from_start || e.weekday || !e.running_cost.empty()) {
    log = Enrich(log, e);
  }
  SplitSpec spec = config.split;
  LogSplit split = Split(log, spec);
  LogStats stats = ComputeLogStatistics(log);
  return {std::move(log), std::move(split), stats};
}

TrainOutcome TrainStage(const RunConfig& config, const PreparedLog& prepared) {
  SearchContext context{&prepared.split, config.kpi, config.enrich,
                        config.dataset_options};
  SearchResult history;
  if (config.fixed_history) {
    history.chosen_history = WithEnrich(*config.fixed_history, config.enrich);
    history.chosen_train = config.train;
  } else {
    history = HistorySearch(context, config.train, config.search_mode,
                            config.max_history);
  }
  SearchResult grid =
      GridSearch(context, history.chosen_history, config.grid, config.train);

  const EventLog full_train =
      UnionOf(prepared.split.train, prepared.split.validation);
  const EncoderConfig encoder_config =
      WithEnrich(history.chosen_history, config.enrich);
  Encoder encoder = Encoder::Fit(full_train, encoder_config);
  const KpiEvaluator kpi(config.kpi, full_train.schema);
  const EncodedDataset dataset =
      BuildDataset(full_train, &kpi, encoder, config.dataset_options);
  GbdtModel model = Train(dataset, grid.chosen_train, ObjectiveFor(config.kpi),
                          encoder_config);

  DiscretizerOptions dopts;
  dopts.max_buckets = config.explain.max_buckets;
  dopts.min_bucket_fraction = config.explain.min_bucket_fraction;
  DiscretizerSet discretizers = FitDiscretizers(dataset, dopts);
  PayoutConfig background =
      SampleBackground(dataset, config.explain.background_size, config.seed);

  double sum = 0;
  std::size_t count = 0;
  for (const Trace& t : full_train.traces) {
    if (const auto v = kpi.FinalValue(t)) {
      sum += *v;
      ++count;
    }
  }
  const double average = count == 0 ? 0.0 : sum / static_cast<double>(count);

  return {std::move(history), std::move(grid),
          ModelBundle{std::move(model), std::move(encoder), config.kpi,
                      std::move(discretizers), std::move(background), average}};
}

Evaluation EvaluateStage(const RunConfig& config, const ModelBundle& bundle,
                         const PreparedLog& prepared) {
  const KpiValueKind kind = bundle.kpi.value_kind;
  const double scale = kind == KpiValueKind::kBoolean
                           ? 1.0
                           : KpiDisplayScale(bundle.kpi);
  const KpiEvaluator test_kpi(bundle.kpi, prepared.split.test.schema);
  const EncodedDataset test = BuildDataset(
      prepared.split.test, &test_kpi, bundle.encoder, config.dataset_options);
  if (test.rows() == 0) throw Error("evaluate", "test split has no labelled prefixes");

  const EventLog full_train =
      UnionOf(prepared.split.train, prepared.split.validation);
  const KpiEvaluator train_kpi(bundle.kpi, full_train.schema);
  const EncodedDataset train = BuildDataset(full_train, &train_kpi,
                                            bundle.encoder, config.dataset_options);
  std::map<std::size_t, std::pair<double, std::size_t>> by_length;
  double total = 0;
  for (std::size_t r = 0; r < train.rows(); ++r) {
    auto& [s, c] = by_length[train.provenance[r].prefix_length];
    s += train.labels[r];
    ++c;
    total += train.labels[r];
  }
  const double overall =
      train.rows() == 0 ? 0.0 : total / static_cast<double>(train.rows());
  std::vector<double> baseline(test.rows());
  for (std::size_t r = 0; r < test.rows(); ++r) {
    const auto it = by_length.find(test.provenance[r].prefix_length);
    baseline[r] = it == by_length.end()
                      ? overall
                      : it->second.first / static_cast<double>(it->second.second);
  }

  Evaluation e;
  e.metric = kind == KpiValueKind::kBoolean ? "f1" : "mae";
  e.test_score = Score(bundle.model, test, kind) * scale;
  e.baseline_score = Score(baseline, test.labels, kind) * scale;
  e.label_mean = std::accumulate(test.labels.begin(), test.labels.end(), 0.0) /
                 static_cast<double>(test.rows()) * scale;
  e.test_rows = test.rows();
  return e;
}

std::vector<CaseExplanation> ExplainLog(const RunConfig& config,
                                        const ModelBundle& bundle,
                                        const EventLog& log, bool last_only) {
  DatasetOptions options = config.dataset_options;
  options.last_prefix_only = last_only;
  const EncodedDataset dataset =
      BuildDataset(log, nullptr, bundle.encoder, options);
  if (dataset.width != bundle.model.width()) {
    throw Error("explain", "encoder and model disagree on the row width");
  }
  const KpiEvaluator kpi(bundle.kpi, log.schema);
  const bool boolean = bundle.kpi.value_kind == KpiValueKind::kBoolean;
  const double scale = boolean ? 1.0 : KpiDisplayScale(bundle.kpi);
  const Oracle oracle = MakeOracle(bundle.model);
  AdaptiveOptions adaptive;
  adaptive.exact_threshold = config.explain.exact_threshold;
  adaptive.n_permutations = config.explain.n_permutations;
  adaptive.seed = config.seed;

  std::map<std::vector<std::uint64_t>, ShapleyVector> cache;
  std::vector<CaseExplanation> out;
  out.reserve(dataset.rows());
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    const auto row = dataset.row(r);
    auto key = RowKey(row);
    auto it = cache.find(key);
    if (it == cache.end()) {
      ShapleyVector v =
          AdaptiveShapley(oracle, row, bundle.background, adaptive);
      if (boolean) {
        v = RescaleBoolean(v, KpiValueKind::kBoolean);
      } else {
        v.base_value *= scale;
        v.prediction *= scale;
        v.efficiency_residual *= scale;
        for (double& x : v.values) x *= scale;
      }
      it = cache.emplace(std::move(key), std::move(v)).first;
    }
    CaseExplanation c;
    c.vector = it->second;
    c.vector.provenance = dataset.provenance[r];
    c.explanations = LabelExplanations(c.vector, bundle.model.descriptors(),
                                       bundle.discretizers);

    const Trace* trace = log.FindTrace(c.vector.provenance.case_id);
    const TracePrefix prefix{trace, c.vector.provenance.prefix_length};
    c.last_activity = prefix.last().activity;
    const double raw = bundle.model.Predict(row);
    if (const auto current = kpi.CurrentValue(prefix)) {
      c.current_kpi = *current * scale;
    }
    c.predicted_final = kpi.PredictedFinal(prefix, raw) * scale;
    c.delta_vs_average = c.predicted_final - bundle.average_final_kpi * scale;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<GlobalExplanation> Aggregate(
    const std::vector<CaseExplanation>& locals, SortKey sort) {
  std::vector<std::vector<Explanation>> all;
  all.reserve(locals.size());
  for (const CaseExplanation& c : locals) all.push_back(c.explanations);
  return AggregateGlobal(all, sort);
}

ExperimentReport RunExperiment(const RunConfig& config) {
  PreparedLog prepared = Prepare(config);
  TrainOutcome outcome = TrainStage(config, prepared);
  Evaluation evaluation = EvaluateStage(config, outcome.bundle, prepared);
  std::vector<CaseExplanation> locals =
      ExplainLog(config, outcome.bundle, prepared.split.test, false);
  if (locals.empty()) throw Error("explain", "no test prefixes to explain");
  std::vector<GlobalExplanation> globals = Aggregate(locals, config.explain.sort);

  ExperimentReport report{prepared.stats,
                          prepared.split.train.traces.size(),
                          prepared.split.validation.traces.size(),
                          prepared.split.test.traces.size(),
                          std::move(outcome),
                          std::move(evaluation),
                          std::move(locals),
                          std::move(globals)};

  const auto& dir = config.output_dir;
  WriteJsonFile(dir / "report.json", ReportJson(config, report));
  WriteJsonFile(dir / "model.json", report.outcome.bundle.ToJson());
  nlohmann::json explanations = nlohmann::json::array();
  for (const CaseExplanation& c : report.locals) explanations.push_back(ToJson(c));
  WriteJsonFile(dir / "explanations.json", explanations);
  WriteJsonFile(dir / "global.json", ToJson(report.globals));
  return report;
}

}  // namespace xppa
