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

#ifndef XPPA_ENCODING_H_
#define XPPA_ENCODING_H_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "xppa/event_log.h"
#include "xppa/kpi.h"

namespace xppa {

// Reserved category codes. Observed categories start at kFirstCategoryCode.
inline constexpr int kMissingCode = 0;
inline constexpr int kUnknownCode = 1;
inline constexpr int kFirstCategoryCode = 2;

enum class HistoryMode { kLastOnly, kHistory, kAggregated };

struct EnrichFlags {
  bool time_from_start = false;
  bool weekday = false;
  // Numeric per-event cost attribute to accumulate; empty disables.
  std::string running_cost;

  bool operator==(const EnrichFlags&) const = default;
};

struct EncoderConfig {
  HistoryMode history = HistoryMode::kLastOnly;
  // Number of past events before the last one (kHistory only, k >= 1).
  int k = 0;
  EnrichFlags enrich;

  static EncoderConfig LastOnly() { return {}; }
  // k == 0 yields LastOnly.
  static EncoderConfig History(int k);
  static EncoderConfig Aggregated() { return {HistoryMode::kAggregated, 0, {}}; }

  // "0", "3", "aggr".
  std::string HistoryLabel() const;

  bool operator==(const EncoderConfig&) const = default;
};

enum class FeatureKind { kNumeric, kCategorical };
enum class FeaturePosition { kLastEvent, kHistoryOffset, kAggregateCount };

struct FeatureDescriptor {
  std::string source_attribute;
  FeaturePosition position = FeaturePosition::kLastEvent;
  // Events before the last one (kHistoryOffset only).
  int offset = 0;
  FeatureKind value_kind = FeatureKind::kNumeric;
  bool derived = false;
  // Code kFirstCategoryCode + i stands for categories[i].
  std::vector<std::string> categories;
  // Activity column of the same event slot; its kMissingCode marks padding.
  int presence_column = -1;

  // "amount", "amount[-2]", "count[Approve]".
  std::string Name() const;
  // "missing", "unknown" or the category for a code.
  std::string CategoryLabel(double code) const;

  bool operator==(const FeatureDescriptor&) const = default;
};

struct RowProvenance {
  std::string case_id;
  std::size_t prefix_length = 0;

  bool operator==(const RowProvenance&) const = default;
};

struct EncodedDataset {
  std::size_t width = 0;
  // Row-major, rows() * width values.
  std::vector<double> values;
  // KPI labels; NaN for unlabelled (running) prefixes.
  std::vector<double> labels;
  std::vector<FeatureDescriptor> descriptors;
  std::vector<RowProvenance> provenance;

  // Traces dropped because their KPI could not be computed.
  std::size_t excluded_traces = 0;
  // Events whose activity is outside the encoder's alphabet.
  std::size_t unseen_activity_events = 0;

  std::size_t rows() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * width, width);
  }
  void AppendRow(std::span<const double> row, double label,
                 RowProvenance provenance);
};

struct DatasetOptions {
  // Keep the prefix equal to the whole trace (label 0 for remaining time).
  bool include_full_prefix = true;
  // One row per trace from its longest prefix (explaining running cases).
  bool last_prefix_only = false;
};

// Adds engineered attributes to every event: time_from_start (seconds since
// the first event of the case), weekday (UTC day name) and running_<attr>
// (cumulative sum of the cost attribute, missing counted as 0).
EventLog Enrich(const EventLog& log, const EnrichFlags& flags);

// Per-event encoding schema frozen from a training log, plus the history
// layout. Immutable after Fit.
class Encoder {
 public:
  struct Column {
    std::string name;
    FeatureKind kind = FeatureKind::kNumeric;
    bool derived = false;
    std::vector<std::string> categories;
  };
  // Encoder column -> attribute index in a particular log schema.
  using Binding = std::vector<std::optional<std::size_t>>;

  static Encoder Fit(const EventLog& training_log, const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<FeatureDescriptor>& descriptors() const {
    return descriptors_;
  }
  std::size_t width() const { return descriptors_.size(); }

  Binding Bind(const std::vector<AttributeSpec>& schema) const;

  // zeta(e): activity code then one value per schema attribute.
  std::vector<double> EncodeEvent(const Event& e, const Binding& binding) const;
  // The full configured row for a prefix.
  std::vector<double> EncodePrefix(const TracePrefix& prefix,
                                   const Binding& binding) const;
  // Last k+1 events, oldest first, padded in front.
  std::vector<double> EncodeHistory(const TracePrefix& prefix, int k,
                                    const Binding& binding) const;
  // Activity counts over the alphabet followed by zeta(last event).
  std::vector<double> EncodeAggregated(const TracePrefix& prefix,
                                       const Binding& binding) const;

  // Same encoder with another history layout (schema unchanged).
  Encoder WithHistory(const EncoderConfig& config) const;

  nlohmann::json ToJson() const;
  static Encoder FromJson(const nlohmann::json& j);

 private:
  void BuildDescriptors();
  void AppendEvent(const Event& e, const Binding& binding,
                   std::vector<double>& out) const;
  void AppendPadding(std::vector<double>& out) const;
  std::size_t CountUnseen(const TracePrefix& prefix) const;

  EncoderConfig config_;
  std::vector<Column> columns_;
  std::vector<std::unordered_map<std::string, int>> lookup_;
  std::vector<std::string> alphabet_;
  std::unordered_map<std::string, std::size_t> alphabet_index_;
  std::vector<FeatureDescriptor> descriptors_;

  friend EncodedDataset BuildDataset(const EventLog&, const KpiEvaluator*,
                                     const Encoder&, const DatasetOptions&);
};

// One row per prefix per trace. With a null `kpi` labels are NaN.
EncodedDataset BuildDataset(const EventLog& log, const KpiEvaluator* kpi,
                            const Encoder& encoder,
                            const DatasetOptions& options = {});

// Fits the encoder on `log` itself (log should already be enriched).
EncodedDataset BuildDataset(const EventLog& log, const KpiSpec& kpi,
                            const EncoderConfig& config,
                            const DatasetOptions& options = {});

// Columnar CSV (provenance, label, one column per descriptor name).
void WriteDatasetCsv(const EncodedDataset& dataset, std::ostream& out);

nlohmann::json ToJson(const EncoderConfig& config);
EncoderConfig EncoderConfigFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const FeatureDescriptor& d);
FeatureDescriptor FeatureDescriptorFromJson(const nlohmann::json& j);

}  // namespace xppa

#endif  // XPPA_ENCODING_H_
