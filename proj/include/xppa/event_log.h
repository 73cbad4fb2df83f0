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

#ifndef XPPA_EVENT_LOG_H_
#define XPPA_EVENT_LOG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace xppa {

// UTC instant with millisecond precision.
struct Instant {
  std::int64_t millis = 0;

  double SecondsSince(Instant other) const {
    return static_cast<double>(millis - other.millis) / 1000.0;
  }
  auto operator<=>(const Instant&) const = default;
};

// Marker for an attribute the event does not define (the event is a partial
// function over the attribute set).
struct Missing {
  bool operator==(const Missing&) const = default;
};

enum class ValueKind { kLiteral, kNumeric, kBoolean, kTimestamp };

std::string_view ValueKindName(ValueKind kind);
std::optional<ValueKind> ParseValueKind(std::string_view name);

using AttributeValue =
    std::variant<Missing, std::string, double, bool, Instant>;

inline bool IsMissing(const AttributeValue& v) {
  return std::holds_alternative<Missing>(v);
}

struct AttributeSpec {
  std::string name;
  ValueKind kind = ValueKind::kLiteral;
  // Engineered by `Enrich`, not read from the source file.
  bool derived = false;

  bool operator==(const AttributeSpec&) const = default;
};

struct Event {
  std::string activity;
  Instant timestamp;
  // Aligned with EventLog::schema.
  std::vector<AttributeValue> attributes;

  bool operator==(const Event&) const = default;
};

struct Trace {
  std::string case_id;
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
  bool operator==(const Trace&) const = default;
};

// Immutable once built by MakeEventLog (or one of the parsers).
struct EventLog {
  std::vector<Trace> traces;
  std::vector<AttributeSpec> schema;
  std::set<std::string> activity_alphabet;

  // Index into schema / Event::attributes, or nullopt.
  std::optional<std::size_t> AttributeIndex(std::string_view name) const;
  const Trace* FindTrace(std::string_view case_id) const;

  bool operator==(const EventLog&) const = default;
};

// Validates and normalises: stable-sorts every trace by timestamp, rejects
// empty traces, duplicate case ids and attribute rows that do not match the
// schema width, and recomputes the activity alphabet.
EventLog MakeEventLog(std::vector<Trace> traces,
                      std::vector<AttributeSpec> schema);

struct CsvConfig {
  std::string case_column = "case_id";
  std::string activity_column = "activity";
  std::string timestamp_column = "timestamp";
  // strftime-style pattern; empty means ISO-8601. A trailing fractional
  // seconds part (".123") is accepted after the pattern.
  std::string timestamp_format;
  // Optional explicit kinds; other columns are inferred.
  std::map<std::string, ValueKind> kinds;
};

EventLog ParseCsv(std::istream& input, const CsvConfig& config);
EventLog ReadCsvFile(const std::filesystem::path& path,
                     const CsvConfig& config);

// Canonical form: case, activity and timestamp columns first (named after
// `config`), then the schema in order. Timestamps as ISO-8601 UTC with
// milliseconds, missing values as empty cells.
void WriteCsv(const EventLog& log, std::ostream& output,
              const CsvConfig& config = {});

// Minimal XES importer: concept:name, time:timestamp and typed event
// attributes. Trace-level attributes (except concept:name) are copied to each
// event as "case:<key>".
EventLog ParseXes(std::istream& input);
EventLog ReadXesFile(const std::filesystem::path& path);

// Dispatches on the file extension (.xes or anything else as CSV).
EventLog ReadLogFile(const std::filesystem::path& path,
                     const CsvConfig& config);

struct LogStats {
  std::size_t n_traces = 0;
  std::size_t n_events = 0;
  std::size_t n_activities = 0;
  std::size_t max_events_per_trace = 0;
  double mean_events_per_trace = 0;
  double median_events_per_trace = 0;
  // Seconds between the first and the last event of a trace.
  double mean_duration = 0;
  double std_duration = 0;
};

LogStats ComputeLogStatistics(const EventLog& log);

// The first `length` events of a trace. Borrows from the trace.
struct TracePrefix {
  const Trace* trace = nullptr;
  std::size_t length = 0;

  std::span<const Event> events() const {
    return std::span<const Event>(trace->events).first(length);
  }
  const Event& last() const { return trace->events[length - 1]; }
  const std::string& case_id() const { return trace->case_id; }
};

// All |trace| prefixes, shortest first.
std::vector<TracePrefix> Prefixes(const Trace& trace);

// Copy of `log` restricted to the given case ids (log order preserved).
EventLog SelectTraces(const EventLog& log, const std::set<std::string>& ids);

// Timestamp helpers.
std::optional<Instant> ParseIso8601(std::string_view text);
std::optional<Instant> ParseTimestamp(std::string_view text,
                                      std::string_view format);
std::string FormatIso8601(Instant t);
// "Monday" .. "Sunday" (UTC).
std::string WeekdayName(Instant t);

}  // namespace xppa

#endif  // XPPA_EVENT_LOG_H_
