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

#ifndef XPPA_KPI_H_
#define XPPA_KPI_H_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "xppa/event_log.h"

namespace xppa {

enum class KpiKind {
  kRemainingTime,
  kActivityOccurrence,
  kTraceLevelAttribute,
  kRunningNumericTotal,
};

enum class KpiValueKind { kNumeric, kBoolean };

std::string_view KpiKindName(KpiKind kind);
std::optional<KpiKind> ParseKpiKind(std::string_view name);

struct KpiSpec {
  KpiKind kind = KpiKind::kRemainingTime;
  // Target activity (occurrence) or attribute name (the other two).
  std::string target;
  // Fixed by the factories; trace-level attributes take the kind of the
  // attribute when bound to a log (see KpiEvaluator).
  KpiValueKind value_kind = KpiValueKind::kNumeric;

  static KpiSpec RemainingTime();
  static KpiSpec ActivityOccurrence(std::string activity);
  static KpiSpec TraceLevelAttribute(std::string attribute,
                                     KpiValueKind kind = KpiValueKind::kNumeric);
  static KpiSpec RunningNumericTotal(std::string attribute);

  bool operator==(const KpiSpec&) const = default;
};

// Internal values are seconds for remaining time; reports show days.
double KpiDisplayScale(const KpiSpec& spec);
std::string KpiDisplayUnit(const KpiSpec& spec);

// A KpiSpec bound to a log schema.
class KpiEvaluator {
 public:
  // Throws Error("config") when the target attribute does not exist or has a
  // kind the KPI cannot use.
  KpiEvaluator(KpiSpec spec, const std::vector<AttributeSpec>& schema);

  const KpiSpec& spec() const { return spec_; }
  KpiValueKind value_kind() const { return spec_.value_kind; }

  // T(trace, i) for a completed trace, 1 <= i <= |trace|. Booleans are 0/1.
  // nullopt when the trace cannot be labelled (target attribute missing).
  // Throws ContractViolation when i is out of range.
  std::optional<double> Value(const Trace& trace, std::size_t i) const;

  // The value the KPI refers to once the case completes: total duration,
  // whether the activity ever occurred after the first event, the final
  // attribute value. Used for "vs average" comparisons in reports.
  std::optional<double> FinalValue(const Trace& trace) const;

  // What is already known about that final value for a running prefix.
  std::optional<double> CurrentValue(const TracePrefix& prefix) const;

  // Predicted final value given the model's prediction for the prefix.
  double PredictedFinal(const TracePrefix& prefix, double prediction) const;

 private:
  std::optional<double> NumericAt(const Event& e) const;

  KpiSpec spec_;
  std::size_t attribute_ = 0;
};

// Free-function form of KpiEvaluator::Value.
std::optional<double> KpiValue(const KpiSpec& spec, const EventLog& log,
                               const Trace& trace, std::size_t i);

}  // namespace xppa

#endif  // XPPA_KPI_H_
