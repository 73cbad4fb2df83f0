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

#include "xppa/encoding.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "xppa/error.h"

namespace xppa {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string HistoryModeName(HistoryMode mode) {
  switch (mode) {
    case HistoryMode::kLastOnly:
      return "last_only";
    case HistoryMode::kHistory:
      return "k_history";
    case HistoryMode::kAggregated:
      return "aggregated";
  }
  return "last_only";
}

HistoryMode ParseHistoryMode(const std::string& s) {
  if (s == "last_only") return HistoryMode::kLastOnly;
  if (s == "k_history") return HistoryMode::kHistory;
  if (s == "aggregated") return HistoryMode::kAggregated;
  throw Error("config", "unknown history mode '" + s + "'");
}

std::string PositionName(FeaturePosition p) {
  switch (p) {
    case FeaturePosition::kLastEvent:
      return "last_event";
    case FeaturePosition::kHistoryOffset:
      return "history_offset";
    case FeaturePosition::kAggregateCount:
      return "aggregate_count";
  }
  return "last_event";
}

FeaturePosition ParsePosition(const std::string& s) {
  if (s == "history_offset") return FeaturePosition::kHistoryOffset;
  if (s == "aggregate_count") return FeaturePosition::kAggregateCount;
  return FeaturePosition::kLastEvent;
}

std::string AsCategory(const AttributeValue& v) {
  struct Visitor {
    std::string operator()(const Missing&) const { return ""; }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(double d) const { return fmt::format("{}", d); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(Instant t) const { return FormatIso8601(t); }
  };
  return std::visit(Visitor{}, v);
}

double AsNumber(const AttributeValue& v) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  if (const bool* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  if (const Instant* t = std::get_if<Instant>(&v)) {
    return static_cast<double>(t->millis) / 1000.0;
  }
  return kNaN;
}

}  // namespace

EncoderConfig EncoderConfig::History(int k) {
  if (k < 0) throw ContractViolation("history length must be >= 0");
  if (k == 0) return LastOnly();
  return {HistoryMode::kHistory, k, {}};
}

std::string EncoderConfig::HistoryLabel() const {
  switch (history) {
    case HistoryMode::kLastOnly:
      return "0";
    case HistoryMode::kHistory:
      return std::to_string(k);
    case HistoryMode::kAggregated:
      return "aggr";
  }
  return "0";
}

std::string FeatureDescriptor::Name() const {
  switch (position) {
    case FeaturePosition::kLastEvent:
      return source_attribute;
    case FeaturePosition::kHistoryOffset:
      return fmt::format("{}[-{}]", source_attribute, offset);
    case FeaturePosition::kAggregateCount:
      return fmt::format("count[{}]", source_attribute);
  }
  return source_attribute;
}

std::string FeatureDescriptor::CategoryLabel(double code) const {
  const long c = std::lround(code);
  if (c == kMissingCode || std::isnan(code)) return "missing";
  const long idx = c - kFirstCategoryCode;
  if (idx < 0 || idx >= static_cast<long>(categories.size())) return "unknown";
  return categories[idx];
}

void EncodedDataset::AppendRow(std::span<const double> row, double label,
                               RowProvenance prov) {
  if (row.size() != width) {
    throw ContractViolation(fmt::format("row width {} != dataset width {}",
                                        row.size(), width));
  }
  values.insert(values.end(), row.begin(), row.end());
  labels.push_back(label);
  provenance.push_back(std::move(prov));
}

EventLog Enrich(const EventLog& log, const EnrichFlags& flags) {
  std::vector<AttributeSpec> schema = log.schema;
  auto add = [&](const std::string& name, ValueKind kind) {
    if (log.AttributeIndex(name)) {
      throw Error("config", "engineered attribute '" + name +
                                "' clashes with a log attribute");
    }
    schema.push_back({name, kind, true});
  };
  std::optional<std::size_t> cost_index;
  if (!flags.running_cost.empty()) {
    cost_index = log.AttributeIndex(flags.running_cost);
    if (!cost_index || log.schema[*cost_index].kind != ValueKind::kNumeric) {
      throw Error("config", "running_cost needs a numeric attribute '" +
                                flags.running_cost + "'");
    }
  }
  if (flags.time_from_start) add("time_from_start", ValueKind::kNumeric);
  if (flags.weekday) add("weekday", ValueKind::kLiteral);
  if (cost_index) add("running_" + flags.running_cost, ValueKind::kNumeric);

  std::vector<Trace> traces = log.traces;
  for (Trace& trace : traces) {
    const Instant start = trace.events.front().timestamp;
    double cumulative = 0;
    for (Event& e : trace.events) {
      if (flags.time_from_start) {
        e.attributes.emplace_back(e.timestamp.SecondsSince(start));
      }
      if (flags.weekday) e.attributes.emplace_back(WeekdayName(e.timestamp));
      if (cost_index) {
        if (const double* c = std::get_if<double>(&e.attributes[*cost_index])) {
          cumulative += *c;
        }
        e.attributes.emplace_back(cumulative);
      }
    }
  }
  return MakeEventLog(std::move(traces), std::move(schema));
}

Encoder Encoder::Fit(const EventLog& log, const EncoderConfig& config) {
  if (config.history == HistoryMode::kHistory && config.k < 1) {
    throw Error("config", "k_history needs k >= 1");
  }
  Encoder enc;
  enc.config_ = config;
  enc.alphabet_.assign(log.activity_alphabet.begin(),
                       log.activity_alphabet.end());
  enc.columns_.push_back({"activity", FeatureKind::kCategorical, false,
                          enc.alphabet_});
  for (std::size_t a = 0; a < log.schema.size(); ++a) {
    const AttributeSpec& spec = log.schema[a];
    Column col{spec.name, FeatureKind::kNumeric, spec.derived, {}};
    if (spec.kind == ValueKind::kLiteral) {
      col.kind = FeatureKind::kCategorical;
      std::set<std::string> values;
      for (const Trace& t : log.traces) {
        for (const Event& e : t.events) {
          if (!IsMissing(e.attributes[a])) values.insert(AsCategory(e.attributes[a]));
        }
      }
      col.categories.assign(values.begin(), values.end());
    } else if (spec.kind == ValueKind::kBoolean) {
      col.kind = FeatureKind::kCategorical;
      col.categories = {"false", "true"};
    }
    enc.columns_.push_back(std::move(col));
  }
  enc.BuildDescriptors();
  return enc;
}

Encoder Encoder::WithHistory(const EncoderConfig& config) const {
  if (config.history == HistoryMode::kHistory && config.k < 1) {
    throw Error("config", "k_history needs k >= 1");
  }
  Encoder enc = *this;
  enc.config_ = config;
  enc.config_.enrich = config_.enrich;
  enc.BuildDescriptors();
  return enc;
}

void Encoder::BuildDescriptors() {
  lookup_.clear();
  for (const Column& col : columns_) {
    std::unordered_map<std::string, int> codes;
    for (std::size_t i = 0; i < col.categories.size(); ++i) {
      codes.emplace(col.categories[i], kFirstCategoryCode + static_cast<int>(i));
    }
    lookup_.push_back(std::move(codes));
  }
  alphabet_index_.clear();
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    alphabet_index_.emplace(alphabet_[i], i);
  }

  descriptors_.clear();
  auto add_slot = [&](int offset) {
    const int presence = static_cast<int>(descriptors_.size());
    for (const Column& col : columns_) {
      FeatureDescriptor d;
      d.source_attribute = col.name;
      d.position = offset == 0 ? FeaturePosition::kLastEvent
                               : FeaturePosition::kHistoryOffset;
      d.offset = offset;
      d.value_kind = col.kind;
      d.derived = col.derived;
      d.categories = col.categories;
      d.presence_column = presence;
      descriptors_.push_back(std::move(d));
    }
  };
  switch (config_.history) {
    case HistoryMode::kLastOnly:
      add_slot(0);
      break;
    case HistoryMode::kHistory:
      for (int offset = config_.k; offset >= 0; --offset) add_slot(offset);
      break;
    case HistoryMode::kAggregated:
      for (const std::string& act : alphabet_) {
        FeatureDescriptor d;
        d.source_attribute = act;
        d.position = FeaturePosition::kAggregateCount;
        d.value_kind = FeatureKind::kNumeric;
        d.derived = true;
        descriptors_.push_back(std::move(d));
      }
      add_slot(0);
      break;
  }
}

Encoder::Binding Encoder::Bind(const std::vector<AttributeSpec>& schema) const {
  Binding binding(columns_.size());
  for (std::size_t c = 1; c < columns_.size(); ++c) {
    for (std::size_t a = 0; a < schema.size(); ++a) {
      if (schema[a].name == columns_[c].name) binding[c] = a;
    }
  }
  return binding;
}

void Encoder::AppendEvent(const Event& e, const Binding& binding,
                          std::vector<double>& out) const {
  {
    const auto it = lookup_[0].find(e.activity);
    out.push_back(it == lookup_[0].end() ? kUnknownCode : it->second);
  }
  for (std::size_t c = 1; c < columns_.size(); ++c) {
    const Column& col = columns_[c];
    const AttributeValue* value =
        binding[c] ? &e.attributes.at(*binding[c]) : nullptr;
    if (col.kind == FeatureKind::kCategorical) {
      if (value == nullptr || IsMissing(*value)) {
        out.push_back(kMissingCode);
        continue;
      }
      const auto it = lookup_[c].find(AsCategory(*value));
      out.push_back(it == lookup_[c].end() ? kUnknownCode : it->second);
    } else {
      out.push_back(value == nullptr ? kNaN : AsNumber(*value));
    }
  }
}

void Encoder::AppendPadding(std::vector<double>& out) const {
  for (const Column& col : columns_) {
    out.push_back(col.kind == FeatureKind::kCategorical ? kMissingCode : 0.0);
  }
}

std::vector<double> Encoder::EncodeEvent(const Event& e,
                                         const Binding& binding) const {
  std::vector<double> out;
  out.reserve(columns_.size());
  AppendEvent(e, binding, out);
  return out;
}

std::vector<double> Encoder::EncodeHistory(const TracePrefix& prefix, int k,
                                           const Binding& binding) const {
  if (k < 0) throw ContractViolation("history length must be >= 0");
  std::vector<double> out;
  out.reserve(columns_.size() * (k + 1));
  const auto events = prefix.events();
  const long m = static_cast<long>(events.size());
  for (long idx = m - 1 - k; idx < m; ++idx) {
    if (idx < 0) {
      AppendPadding(out);
    } else {
      AppendEvent(events[idx], binding, out);
    }
  }
  return out;
}

std::vector<double> Encoder::EncodeAggregated(const TracePrefix& prefix,
                                              const Binding& binding) const {
  std::vector<double> out(alphabet_.size(), 0.0);
  for (const Event& e : prefix.events()) {
    const auto it = alphabet_index_.find(e.activity);
    if (it != alphabet_index_.end()) out[it->second] += 1.0;
  }
  AppendEvent(prefix.last(), binding, out);
  return out;
}

std::vector<double> Encoder::EncodePrefix(const TracePrefix& prefix,
                                          const Binding& binding) const {
  switch (config_.history) {
    case HistoryMode::kLastOnly:
      return EncodeEvent(prefix.last(), binding);
    case HistoryMode::kHistory:
      return EncodeHistory(prefix, config_.k, binding);
    case HistoryMode::kAggregated:
      return EncodeAggregated(prefix, binding);
  }
  return {};
}

std::size_t Encoder::CountUnseen(const TracePrefix& prefix) const {
  return alphabet_index_.contains(prefix.last().activity) ? 0 : 1;
}

EncodedDataset BuildDataset(const EventLog& log, const KpiEvaluator* kpi,
                            const Encoder& encoder,
                            const DatasetOptions& options) {
  EncodedDataset ds;
  ds.width = encoder.width();
  ds.descriptors = encoder.descriptors();
  const Encoder::Binding binding = encoder.Bind(log.schema);
  std::vector<double> labels;
  for (const Trace& trace : log.traces) {
    const std::size_t n = trace.size();
    std::size_t first = 1;
    std::size_t last = options.include_full_prefix || n == 1 ? n : n - 1;
    if (options.last_prefix_only) first = last = n;
    if (!options.include_full_prefix && !options.last_prefix_only && n == 1) {
      continue;
    }
    labels.clear();
    bool ok = true;
    for (std::size_t len = first; len <= last; ++len) {
      if (kpi == nullptr) {
        labels.push_back(kNaN);
        continue;
      }
      const auto value = kpi->Value(trace, len);
      if (!value) {
        ok = false;
        break;
      }
      labels.push_back(*value);
    }
    if (!ok) {
      ++ds.excluded_traces;
      continue;
    }
    for (std::size_t len = first; len <= last; ++len) {
      const TracePrefix prefix{&trace, len};
      ds.unseen_activity_events += encoder.CountUnseen(prefix);
      const std::vector<double> row = encoder.EncodePrefix(prefix, binding);
      ds.AppendRow(row, labels[len - first], {trace.case_id, len});
    }
  }
  return ds;
}

EncodedDataset BuildDataset(const EventLog& log, const KpiSpec& kpi,
                            const EncoderConfig& config,
                            const DatasetOptions& options) {
  const KpiEvaluator evaluator(kpi, log.schema);
  return BuildDataset(log, &evaluator, Encoder::Fit(log, config), options);
}

void WriteDatasetCsv(const EncodedDataset& ds, std::ostream& out) {
  out << "case_id,prefix_length,label";
  for (const FeatureDescriptor& d : ds.descriptors) out << ',' << d.Name();
  out << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    out << ds.provenance[r].case_id << ',' << ds.provenance[r].prefix_length
        << ',' << fmt::format("{}", ds.labels[r]);
    for (double v : ds.row(r)) out << ',' << fmt::format("{}", v);
    out << '\n';
  }
}

nlohmann::json ToJson(const EncoderConfig& config) {
  return {{"history", HistoryModeName(config.history)},
          {"k", config.k},
          {"enrich",
           {{"time_from_start", config.enrich.time_from_start},
            {"weekday", config.enrich.weekday},
            {"running_cost", config.enrich.running_cost}}}};
}

EncoderConfig EncoderConfigFromJson(const nlohmann::json& j) {
  EncoderConfig c;
  c.history = ParseHistoryMode(j.at("history").get<std::string>());
  c.k = j.at("k").get<int>();
  const auto& e = j.at("enrich");
  c.enrich.time_from_start = e.at("time_from_start").get<bool>();
  c.enrich.weekday = e.at("weekday").get<bool>();
  c.enrich.running_cost = e.at("running_cost").get<std::string>();
  return c;
}

nlohmann::json ToJson(const FeatureDescriptor& d) {
  return {{"source_attribute", d.source_attribute},
          {"position", PositionName(d.position)},
          {"offset", d.offset},
          {"value_kind",
           d.value_kind == FeatureKind::kCategorical ? "categorical"
                                                     : "numeric"},
          {"derived", d.derived},
          {"categories", d.categories},
          {"presence_column", d.presence_column}};
}

FeatureDescriptor FeatureDescriptorFromJson(const nlohmann::json& j) {
  FeatureDescriptor d;
  d.source_attribute = j.at("source_attribute").get<std::string>();
  d.position = ParsePosition(j.at("position").get<std::string>());
  d.offset = j.at("offset").get<int>();
  d.value_kind = j.at("value_kind").get<std::string>() == "categorical"
                     ? FeatureKind::kCategorical
                     : FeatureKind::kNumeric;
  d.derived = j.at("derived").get<bool>();
  d.categories = j.at("categories").get<std::vector<std::string>>();
  d.presence_column = j.at("presence_column").get<int>();
  return d;
}

nlohmann::json Encoder::ToJson() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const Column& c : columns_) {
    cols.push_back({{"name", c.name},
                    {"kind", c.kind == FeatureKind::kCategorical
                                 ? "categorical"
                                 : "numeric"},
                    {"derived", c.derived},
                    {"categories", c.categories}});
  }
  return {{"config", xppa::ToJson(config_)},
          {"alphabet", alphabet_},
          {"columns", cols}};
}

Encoder Encoder::FromJson(const nlohmann::json& j) {
  Encoder enc;
  enc.config_ = EncoderConfigFromJson(j.at("config"));
  enc.alphabet_ = j.at("alphabet").get<std::vector<std::string>>();
  for (const auto& c : j.at("columns")) {
    enc.columns_.push_back(
        {c.at("name").get<std::string>(),
         c.at("kind").get<std::string>() == "categorical"
             ? FeatureKind::kCategorical
             : FeatureKind::kNumeric,
         c.at("derived").get<bool>(),
         c.at("categories").get<std::vector<std::string>>()});
  }
  if (enc.columns_.empty()) throw Error("model", "encoder has no columns");
  enc.BuildDescriptors();
  return enc;
}

}  // namespace xppa
