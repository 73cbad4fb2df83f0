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

#include "xppa/kpi.h"

#include <fmt/format.h>

#include "xppa/error.h"

namespace xppa {

std::string_view KpiKindName(KpiKind kind) {
  switch (kind) {
    case KpiKind::kRemainingTime:
      return "remaining_time";
    case KpiKind::kActivityOccurrence:
      return "activity_occurrence";
    case KpiKind::kTraceLevelAttribute:
      return "trace_level_attribute";
    case KpiKind::kRunningNumericTotal:
      return "running_numeric_total";
  }
  return "remaining_time";
}

std::optional<KpiKind> ParseKpiKind(std::string_view name) {
  for (KpiKind k : {KpiKind::kRemainingTime, KpiKind::kActivityOccurrence,
                    KpiKind::kTraceLevelAttribute,
                    KpiKind::kRunningNumericTotal}) {
    if (KpiKindName(k) == name) return k;
  }
  return std::nullopt;
}

KpiSpec KpiSpec::RemainingTime() {
  return {KpiKind::kRemainingTime, "", KpiValueKind::kNumeric};
}
KpiSpec KpiSpec::ActivityOccurrence(std::string activity) {
  return {KpiKind::kActivityOccurrence, std::move(activity),
          KpiValueKind::kBoolean};
}
KpiSpec KpiSpec::TraceLevelAttribute(std::string attribute,
                                     KpiValueKind kind) {
  return {KpiKind::kTraceLevelAttribute, std::move(attribute), kind};
}
KpiSpec KpiSpec::RunningNumericTotal(std::string attribute) {
  return {KpiKind::kRunningNumericTotal, std::move(attribute),
          KpiValueKind::kNumeric};
}

double KpiDisplayScale(const KpiSpec& spec) {
  return spec.kind == KpiKind::kRemainingTime ? 1.0 / 86400.0 : 1.0;
}

std::string KpiDisplayUnit(const KpiSpec& spec) {
  if (spec.kind == KpiKind::kRemainingTime) return "days";
  if (spec.value_kind == KpiValueKind::kBoolean) return "probability";
  return "units";
}

KpiEvaluator::KpiEvaluator(KpiSpec spec,
                           const std::vector<AttributeSpec>& schema)
    : spec_(std::move(spec)) {
  if (spec_.kind == KpiKind::kRemainingTime) {
    spec_.value_kind = KpiValueKind::kNumeric;
    return;
  }
  if (spec_.kind == KpiKind::kActivityOccurrence) {
    if (spec_.target.empty()) {
      throw Error("config", "activity_occurrence needs a target activity");
    }
    spec_.value_kind = KpiValueKind::kBoolean;
    return;
  }
  std::optional<std::size_t> index;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == spec_.target) index = i;
  }
  if (!index) {
    throw Error("config", "KPI attribute '" + spec_.target + "' not in log");
  }
  attribute_ = *index;
  const ValueKind kind = schema[*index].kind;
  if (spec_.kind == KpiKind::kTraceLevelAttribute) {
    if (kind == ValueKind::kBoolean) {
      spec_.value_kind = KpiValueKind::kBoolean;
    } else if (kind == ValueKind::kNumeric) {
      spec_.value_kind = KpiValueKind::kNumeric;
    } else {
      throw Error("config", "trace_level_attribute '" + spec_.target +
                                "' must be numeric or boolean");
    }
    return;
  }
  if (kind != ValueKind::kNumeric) {
    throw Error("config", "running_numeric_total attribute '" + spec_.target +
                              "' must be numeric");
  }
  spec_.value_kind = KpiValueKind::kNumeric;
}

std::optional<double> KpiEvaluator::NumericAt(const Event& e) const {
  const AttributeValue& v = e.attributes.at(attribute_);
  if (const double* d = std::get_if<double>(&v)) return *d;
  if (const bool* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  return std::nullopt;
}

std::optional<double> KpiEvaluator::Value(const Trace& trace,
                                          std::size_t i) const {
  const std::size_t n = trace.size();
  if (i < 1 || i > n) {
    throw ContractViolation(
        fmt::format("KPI index {} out of range 1..{}", i, n));
  }
  switch (spec_.kind) {
    case KpiKind::kRemainingTime:
      return trace.events[n - 1].timestamp.SecondsSince(
          trace.events[i - 1].timestamp);
    case KpiKind::kActivityOccurrence:
      for (std::size_t j = i; j < n; ++j) {
        if (trace.events[j].activity == spec_.target) return 1.0;
      }
      return 0.0;
    case KpiKind::kTraceLevelAttribute:
      return NumericAt(trace.events[n - 1]);
    case KpiKind::kRunningNumericTotal: {
      const auto last = NumericAt(trace.events[n - 1]);
      const auto here = NumericAt(trace.events[i - 1]);
      if (!last || !here) return std::nullopt;
      return *last - *here;
    }
  }
  return std::nullopt;
}

std::optional<double> KpiEvaluator::FinalValue(const Trace& trace) const {
  switch (spec_.kind) {
    case KpiKind::kRemainingTime:
      return trace.events.back().timestamp.SecondsSince(
          trace.events.front().timestamp);
    case KpiKind::kActivityOccurrence:
      return Value(trace, 1);
    case KpiKind::kTraceLevelAttribute:
    case KpiKind::kRunningNumericTotal:
      return NumericAt(trace.events.back());
  }
  return std::nullopt;
}

std::optional<double> KpiEvaluator::CurrentValue(
    const TracePrefix& prefix) const {
  switch (spec_.kind) {
    case KpiKind::kRemainingTime:
      return prefix.last().timestamp.SecondsSince(
          prefix.events().front().timestamp);
    case KpiKind::kActivityOccurrence:
      for (const Event& e : prefix.events().subspan(1)) {
        if (e.activity == spec_.target) return 1.0;
      }
      return 0.0;
    case KpiKind::kTraceLevelAttribute:
    case KpiKind::kRunningNumericTotal:
      return NumericAt(prefix.last());
  }
  return std::nullopt;
}

double KpiEvaluator::PredictedFinal(const TracePrefix& prefix,
                                    double prediction) const {
  switch (spec_.kind) {
    case KpiKind::kRemainingTime:
    case KpiKind::kRunningNumericTotal:
      return CurrentValue(prefix).value_or(0.0) + prediction;
    case KpiKind::kActivityOccurrence: {
      // Already happened after the first event: certain.
      if (CurrentValue(prefix).value_or(0.0) > 0.5) return 1.0;
      return prediction;
    }
    case KpiKind::kTraceLevelAttribute:
      return prediction;
  }
  return prediction;
}

std::optional<double> KpiValue(const KpiSpec& spec, const EventLog& log,
                               const Trace& trace, std::size_t i) {
  return KpiEvaluator(spec, log.schema).Value(trace, i);
}

}  // namespace xppa
