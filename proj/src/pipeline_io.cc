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

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "xppa/error.h"
#include "xppa/pipeline.h"

namespace xppa {
namespace {

using nlohmann::json;

void CheckKeys(const json& j, const std::string& where,
               const std::set<std::string>& allowed) {
  if (!j.is_object()) throw Error("config", where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw Error("config", fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

std::string HistoryText(const EncoderConfig& c) { return c.HistoryLabel(); }

EncoderConfig ParseHistory(const json& j) {
  if (j.is_number_integer()) return EncoderConfig::History(j.get<int>());
  const std::string s = j.get<std::string>();
  if (s == "aggr" || s == "aggregated") return EncoderConfig::Aggregated();
  try {
    std::size_t used = 0;
    const int k = std::stoi(s, &used);
    if (used == s.size() && k >= 0) return EncoderConfig::History(k);
  } catch (const std::exception&) {
  }
  throw Error("config", fmt::format("invalid history '{}'", s));
}

std::filesystem::path Resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

json NumberOrNull(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double NumberOrNan(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

std::string SplitStrategyName(SplitStrategy s) {
  return s == SplitStrategy::kChronological ? "chronological" : "random";
}

}  // namespace

json ToJson(const KpiSpec& spec) {
  return {{"kind", KpiKindName(spec.kind)},
          {"target", spec.target},
          {"value_kind",
           spec.value_kind == KpiValueKind::kBoolean ? "boolean" : "numeric"}};
}

KpiSpec KpiSpecFromJson(const json& j) {
  CheckKeys(j, "kpi", {"kind", "target", "value_kind"});
  const std::string kind_name = j.value("kind", "remaining_time");
  const auto kind = ParseKpiKind(kind_name);
  if (!kind) throw Error("config", fmt::format("unknown KPI kind '{}'", kind_name));
  const std::string target = j.value("target", "");
  KpiSpec spec;
  switch (*kind) {
    case KpiKind::kRemainingTime:
      spec = KpiSpec::RemainingTime();
      break;
    case KpiKind::kActivityOccurrence:
      spec = KpiSpec::ActivityOccurrence(target);
      break;
    case KpiKind::kTraceLevelAttribute:
      spec = KpiSpec::TraceLevelAttribute(target);
      break;
    case KpiKind::kRunningNumericTotal:
      spec = KpiSpec::RunningNumericTotal(target);
      break;
  }
  if (j.contains("value_kind")) {
    const std::string vk = j.at("value_kind").get<std::string>();
    if (vk == "boolean") {
      spec.value_kind = KpiValueKind::kBoolean;
    } else if (vk == "numeric") {
      spec.value_kind = KpiValueKind::kNumeric;
    } else {
      throw Error("config", fmt::format("unknown KPI value kind '{}'", vk));
    }
  }
  if (spec.kind != KpiKind::kRemainingTime && spec.target.empty()) {
    throw Error("config", fmt::format("KPI '{}' needs a target", kind_name));
  }
  return spec;
}

RunConfig RunConfig::FromJson(const json& j,
                              const std::filesystem::path& base_dir) {
  try {
    CheckKeys(j, "run config",
              {"log", "columns", "attribute_kinds", "kpi", "enrich", "split",
               "search", "grid", "train", "dataset", "explain", "seed",
               "output_dir"});
    RunConfig c;
    if (!j.contains("log")) throw Error("config", "missing 'log'");
    c.log_path = Resolve(base_dir, j.at("log").get<std::string>());
    if (j.contains("columns")) {
      const json& cols = j.at("columns");
      CheckKeys(cols, "columns", {"case", "activity", "timestamp", "timestamp_format"});
      c.csv.case_column = cols.value("case", c.csv.case_column);
      c.csv.activity_column = cols.value("activity", c.csv.activity_column);
      c.csv.timestamp_column = cols.value("timestamp", c.csv.timestamp_column);
      c.csv.timestamp_format = cols.value("timestamp_format", c.csv.timestamp_format);
    }
    if (j.contains("attribute_kinds")) {
      for (const auto& [name, kind] : j.at("attribute_kinds").items()) {
        const auto k = ParseValueKind(kind.get<std::string>());
        if (!k) throw Error("config", fmt::format("unknown kind for '{}'", name));
        c.csv.kinds[name] = *k;
      }
    }
    if (!j.contains("kpi")) throw Error("config", "missing 'kpi'");
    c.kpi = KpiSpecFromJson(j.at("kpi"));
    if (j.contains("enrich")) {
      const json& e = j.at("enrich");
      CheckKeys(e, "enrich", {"time_from_start", "weekday", "running_cost"});
      c.enrich.time_from_start = e.value("time_from_start", false);
      c.enrich.weekday = e.value("weekday", false);
      c.enrich.running_cost = e.value("running_cost", "");
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.split.seed = c.seed;
    if (j.contains("split")) {
      const json& s = j.at("split");
      CheckKeys(s, "split", {"train_fraction", "validation_fraction", "strategy"});
      c.split.train_fraction = s.value("train_fraction", c.split.train_fraction);
      c.split.validation_fraction =
          s.value("validation_fraction", c.split.validation_fraction);
      const std::string strategy = s.value("strategy", "chronological");
      if (strategy == "chronological") {
        c.split.strategy = SplitStrategy::kChronological;
      } else if (strategy == "random") {
        c.split.strategy = SplitStrategy::kSeededRandom;
      } else {
        throw Error("config", fmt::format("unknown split strategy '{}'", strategy));
      }
    }
    if (j.contains("search")) {
      const json& s = j.at("search");
      CheckKeys(s, "search", {"mode", "max_history", "history"});
      const std::string mode = s.value("mode", "heuristic");
      if (mode == "heuristic") {
        c.search_mode = SearchMode::kHeuristic;
      } else if (mode == "complete") {
        c.search_mode = SearchMode::kComplete;
      } else {
        throw Error("config", fmt::format("unknown search mode '{}'", mode));
      }
      c.max_history = s.value("max_history", -1);
      if (s.contains("history") && !s.at("history").is_null()) {
        c.fixed_history = ParseHistory(s.at("history"));
      }
    }
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      if (g.is_string()) {
        const std::string name = g.get<std::string>();
        if (name == "desk") {
          c.grid = Grid::Desk();
        } else if (name == "large") {
          c.grid = Grid::Large();
        } else {
          throw Error("config", fmt::format("unknown grid '{}'", name));
        }
      } else {
        CheckKeys(g, "grid", {"n_trees", "max_depth"});
        c.grid.n_trees = g.value("n_trees", c.grid.n_trees);
        c.grid.max_depth = g.value("max_depth", c.grid.max_depth);
      }
    }
    if (j.contains("train")) {
      CheckKeys(j.at("train"), "train",
                {"n_trees", "max_depth", "learning_rate", "min_samples_leaf", "seed"});
      c.train = TrainConfigFromJson(j.at("train"));
    }
    if (j.contains("dataset")) {
      CheckKeys(j.at("dataset"), "dataset", {"include_full_prefix"});
      c.dataset_options.include_full_prefix =
          j.at("dataset").value("include_full_prefix", true);
    }
    if (j.contains("explain")) {
      const json& e = j.at("explain");
      CheckKeys(e, "explain",
                {"background_size", "exact_threshold", "n_permutations",
                 "max_buckets", "min_bucket_fraction", "sort"});
      c.explain.background_size = e.value("background_size", c.explain.background_size);
      c.explain.exact_threshold = e.value("exact_threshold", c.explain.exact_threshold);
      c.explain.n_permutations = e.value("n_permutations", c.explain.n_permutations);
      c.explain.max_buckets = e.value("max_buckets", c.explain.max_buckets);
      c.explain.min_bucket_fraction =
          e.value("min_bucket_fraction", c.explain.min_bucket_fraction);
      const std::string sort = e.value("sort", "mean");
      if (sort == "mean") {
        c.explain.sort = SortKey::kMean;
      } else if (sort == "median") {
        c.explain.sort = SortKey::kMedian;
      } else {
        throw Error("config", fmt::format("unknown sort key '{}'", sort));
      }
      if (c.explain.background_size == 0) {
        throw Error("config", "background_size must be positive");
      }
      if (c.explain.n_permutations == 0) {
        throw Error("config", "n_permutations must be positive");
      }
      if (c.explain.max_buckets == 0) {
        throw Error("config", "max_buckets must be positive");
      }
    }
    c.output_dir = Resolve(base_dir, j.value("output_dir", "out"));
    return c;
  } catch (const json::exception& e) {
    throw Error("config", e.what());
  }
}

RunConfig RunConfig::Load(const std::filesystem::path& path) {
  return FromJson(ReadJsonFile(path), path.parent_path());
}

json RunConfig::ToJson() const {
  json kinds = json::object();
  for (const auto& [name, kind] : csv.kinds) kinds[name] = ValueKindName(kind);
  json search = {{"mode", search_mode == SearchMode::kHeuristic ? "heuristic"
                                                                : "complete"},
                 {"max_history", max_history},
                 {"history", nullptr}};
  if (fixed_history) search["history"] = HistoryText(*fixed_history);
  return {
      {"log", log_path.string()},
      {"columns",
       {{"case", csv.case_column},
        {"activity", csv.activity_column},
        {"timestamp", csv.timestamp_column},
        {"timestamp_format", csv.timestamp_format}}},
      {"attribute_kinds", kinds},
      {"kpi", xppa::ToJson(kpi)},
      {"enrich",
       {{"time_from_start", enrich.time_from_start},
        {"weekday", enrich.weekday},
        {"running_cost", enrich.running_cost}}},
      {"split",
       {{"train_fraction", split.train_fraction},
        {"validation_fraction", split.validation_fraction},
        {"strategy", SplitStrategyName(split.strategy)}}},
      {"search", search},
      {"grid", {{"n_trees", grid.n_trees}, {"max_depth", grid.max_depth}}},
      {"train", xppa::ToJson(train)},
      {"dataset", {{"include_full_prefix", dataset_options.include_full_prefix}}},
      {"explain",
       {{"background_size", explain.background_size},
        {"exact_threshold", explain.exact_threshold},
        {"n_permutations", explain.n_permutations},
        {"max_buckets", explain.max_buckets},
        {"min_bucket_fraction", explain.min_bucket_fraction},
        {"sort", explain.sort == SortKey::kMean ? "mean" : "median"}}},
      {"seed", seed},
      {"output_dir", output_dir.string()},
  };
}

json ModelBundle::ToJson() const {
  json rows = json::array();
  for (std::size_t r = 0; r < background.rows(); ++r) {
    json row = json::array();
    for (double v : background.row(r)) row.push_back(NumberOrNull(v));
    rows.push_back(std::move(row));
  }
  return {{"format", "xppa-bundle"},
          {"version", 1},
          {"model", model.ToJson()},
          {"encoder", encoder.ToJson()},
          {"kpi", xppa::ToJson(kpi)},
          {"discretizers", xppa::ToJson(discretizers)},
          {"background", {{"width", background.width}, {"rows", rows}}},
          {"average_final_kpi", average_final_kpi}};
}

ModelBundle ModelBundle::FromJson(const json& j) {
  try {
    if (j.value("format", "") != "xppa-bundle") {
      throw Error("model", "not a model bundle");
    }
    if (j.at("version").get<int>() != 1) {
      throw Error("model", "unsupported bundle version");
    }
    PayoutConfig background;
    background.width = j.at("background").at("width").get<std::size_t>();
    for (const auto& row : j.at("background").at("rows")) {
      if (row.size() != background.width) {
        throw Error("model", "background row has the wrong width");
      }
      for (const auto& v : row) background.background.push_back(NumberOrNan(v));
    }
    ModelBundle b{GbdtModel::FromJson(j.at("model")),
                  Encoder::FromJson(j.at("encoder")),
                  KpiSpecFromJson(j.at("kpi")),
                  DiscretizerSetFromJson(j.at("discretizers")),
                  std::move(background),
                  j.at("average_final_kpi").get<double>()};
    if (b.encoder.width() != b.model.width() ||
        b.background.width != b.model.width() ||
        b.discretizers.size() != b.model.width()) {
      throw Error("model", "bundle parts disagree on the row width");
    }
    return b;
  } catch (const json::exception& e) {
    throw Error("model", e.what());
  }
}

json ToJson(const CaseExplanation& c) {
  json j = ExplanationToJson(c.vector, c.explanations);
  j["last_activity"] = c.last_activity;
  j["current_kpi"] = c.current_kpi ? json(*c.current_kpi) : json(nullptr);
  j["predicted_final"] = c.predicted_final;
  j["delta_vs_average"] = c.delta_vs_average;
  return j;
}

CaseExplanation CaseExplanationFromJson(const json& j) {
  try {
    CaseExplanation c;
    c.vector.provenance.case_id = j.at("case_id").get<std::string>();
    c.vector.provenance.prefix_length = j.at("prefix_length").get<std::size_t>();
    c.vector.base_value = j.at("base_value").get<double>();
    c.vector.prediction = j.at("prediction").get<double>();
    for (const auto& e : j.at("explanations")) {
      c.explanations.push_back({e.at("label").get<std::string>(),
                                e.at("shap").get<double>(),
                                e.value("derived", false)});
      c.vector.values.push_back(e.at("shap").get<double>());
    }
    c.last_activity = j.value("last_activity", "");
    if (j.contains("current_kpi") && !j.at("current_kpi").is_null()) {
      c.current_kpi = j.at("current_kpi").get<double>();
    }
    c.predicted_final = j.value("predicted_final", 0.0);
    c.delta_vs_average = j.value("delta_vs_average", 0.0);
    return c;
  } catch (const json::exception& e) {
    throw Error("report", e.what());
  }
}

json ToJson(const SearchResult& result) {
  json trail = json::array();
  for (const TrialRecord& t : result.trail) {
    trail.push_back({{"history", HistoryText(t.encoder)},
                     {"train", ToJson(t.train)},
                     {"score", t.score}});
  }
  return {{"chosen_history", HistoryText(result.chosen_history)},
          {"chosen_train", ToJson(result.chosen_train)},
          {"validation_score", result.validation_score},
          {"trail", trail}};
}

json ToJson(const LogStats& s) {
  return {{"n_traces", s.n_traces},
          {"n_events", s.n_events},
          {"n_activities", s.n_activities},
          {"max_events_per_trace", s.max_events_per_trace},
          {"mean_events_per_trace", s.mean_events_per_trace},
          {"median_events_per_trace", s.median_events_per_trace},
          {"mean_duration_days", s.mean_duration / 86400.0},
          {"std_duration_days", s.std_duration / 86400.0}};
}

json ReportJson(const RunConfig& config, const ExperimentReport& report) {
  const ModelBundle& bundle = report.outcome.bundle;
  const bool boolean = bundle.kpi.value_kind == KpiValueKind::kBoolean;
  const double scale = boolean ? 1.0 : KpiDisplayScale(bundle.kpi);
  return {
      {"format", "xppa-report"},
      {"version", 1},
      {"config", config.ToJson()},
      {"kpi", ToJson(bundle.kpi)},
      {"unit", boolean ? "probability" : KpiDisplayUnit(bundle.kpi)},
      {"log_stats", ToJson(report.stats)},
      {"split",
       {{"strategy", SplitStrategyName(config.split.strategy)},
        {"n_train", report.n_train},
        {"n_validation", report.n_validation},
        {"n_test", report.n_test}}},
      {"history_search", ToJson(report.outcome.history)},
      {"grid_search", ToJson(report.outcome.grid)},
      {"final_model",
       {{"history", HistoryText(report.outcome.grid.chosen_history)},
        {"train", ToJson(report.outcome.grid.chosen_train)},
        {"n_trees_built", bundle.model.trees().size()}}},
      {"evaluation",
       {{"metric", report.evaluation.metric},
        {"test_score", report.evaluation.test_score},
        {"baseline_score", report.evaluation.baseline_score},
        {"label_mean", report.evaluation.label_mean},
        {"test_rows", report.evaluation.test_rows}}},
      {"average_final_kpi", bundle.average_final_kpi * scale},
      {"n_explained", report.locals.size()},
      {"top_global", ToJson(std::vector<GlobalExplanation>(
                         report.globals.begin(),
                         report.globals.begin() +
                             std::min<std::size_t>(15, report.globals.size())))},
  };
}

void WriteJsonFile(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
  if (!out) throw Error("io", fmt::format("failed writing {}", path.string()));
}

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("io", fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace xppa
