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

#include "xppa/event_log.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "xppa/error.h"

namespace xppa {

std::string_view ValueKindName(ValueKind kind) {
  switch (kind) {
    case ValueKind::kLiteral:
      return "literal";
    case ValueKind::kNumeric:
      return "numeric";
    case ValueKind::kBoolean:
      return "boolean";
    case ValueKind::kTimestamp:
      return "timestamp";
  }
  return "literal";
}

std::optional<ValueKind> ParseValueKind(std::string_view name) {
  for (ValueKind k : {ValueKind::kLiteral, ValueKind::kNumeric,
                      ValueKind::kBoolean, ValueKind::kTimestamp}) {
    if (ValueKindName(k) == name) return k;
  }
  return std::nullopt;
}

std::optional<std::size_t> EventLog::AttributeIndex(
    std::string_view name) const {
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == name) return i;
  }
  return std::nullopt;
}

const Trace* EventLog::FindTrace(std::string_view case_id) const {
  for (const Trace& t : traces) {
    if (t.case_id == case_id) return &t;
  }
  return nullptr;
}

EventLog MakeEventLog(std::vector<Trace> traces,
                      std::vector<AttributeSpec> schema) {
  EventLog log;
  std::unordered_set<std::string> seen_ids;
  std::unordered_set<std::string> seen_names;
  for (const AttributeSpec& spec : schema) {
    if (!seen_names.insert(spec.name).second) {
      throw Error("parse", "duplicate attribute '" + spec.name + "'");
    }
  }
  for (Trace& trace : traces) {
    if (trace.events.empty()) {
      throw Error("parse", "trace '" + trace.case_id + "' has no events");
    }
    if (!seen_ids.insert(trace.case_id).second) {
      throw Error("parse", "duplicate case id '" + trace.case_id + "'");
    }
    for (const Event& e : trace.events) {
      if (e.attributes.size() != schema.size()) {
        throw Error("parse", "event attribute count does not match schema in "
                             "case '" + trace.case_id + "'");
      }
      log.activity_alphabet.insert(e.activity);
    }
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const Event& a, const Event& b) {
                       return a.timestamp < b.timestamp;
                     });
  }
  log.traces = std::move(traces);
  log.schema = std::move(schema);
  return log;
}

LogStats ComputeLogStatistics(const EventLog& log) {
  LogStats stats;
  stats.n_traces = log.traces.size();
  stats.n_activities = log.activity_alphabet.size();
  if (log.traces.empty()) return stats;

  std::vector<std::size_t> lengths;
  std::vector<double> durations;
  lengths.reserve(log.traces.size());
  durations.reserve(log.traces.size());
  for (const Trace& t : log.traces) {
    lengths.push_back(t.size());
    durations.push_back(
        t.events.back().timestamp.SecondsSince(t.events.front().timestamp));
  }
  const double n = static_cast<double>(lengths.size());
  stats.n_events = std::accumulate(lengths.begin(), lengths.end(),
                                   std::size_t{0});
  stats.max_events_per_trace = *std::max_element(lengths.begin(), lengths.end());
  stats.mean_events_per_trace = static_cast<double>(stats.n_events) / n;

  std::sort(lengths.begin(), lengths.end());
  const std::size_t mid = lengths.size() / 2;
  stats.median_events_per_trace =
      lengths.size() % 2 == 1
          ? static_cast<double>(lengths[mid])
          : (static_cast<double>(lengths[mid - 1]) + lengths[mid]) / 2.0;

  const double mean =
      std::accumulate(durations.begin(), durations.end(), 0.0) / n;
  double sq = 0;
  for (double d : durations) sq += (d - mean) * (d - mean);
  stats.mean_duration = mean;
  stats.std_duration = std::sqrt(sq / n);
  return stats;
}

std::vector<TracePrefix> Prefixes(const Trace& trace) {
  std::vector<TracePrefix> out;
  out.reserve(trace.size());
  for (std::size_t len = 1; len <= trace.size(); ++len) {
    out.push_back({&trace, len});
  }
  return out;
}

EventLog SelectTraces(const EventLog& log, const std::set<std::string>& ids) {
  std::vector<Trace> kept;
  for (const Trace& t : log.traces) {
    if (ids.contains(t.case_id)) kept.push_back(t);
  }
  return MakeEventLog(std::move(kept), log.schema);
}

// ---------------------------------------------------------------------------
// Timestamps.

namespace {

using std::chrono::days;
using std::chrono::sys_days;

bool ReadDigits(std::string_view s, std::size_t& pos, int count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (int i = 0; i < count; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  pos += count;
  return true;
}

std::optional<std::int64_t> CivilToMillis(int y, int mo, int d, int h, int mi,
                                          int s, int ms) {
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{unsigned(mo)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) return std::nullopt;
  const std::int64_t day_count = sys_days(ymd).time_since_epoch().count();
  return ((day_count * 24 + h) * 60 + mi) * 60000LL + s * 1000LL + ms;
}

// Parses ".ddd..." at pos into milliseconds (truncating beyond 3 digits).
bool ReadFraction(std::string_view s, std::size_t& pos, int& ms) {
  ms = 0;
  if (pos >= s.size() || (s[pos] != '.' && s[pos] != ',')) return true;
  ++pos;
  int digits = 0;
  while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
    if (digits < 3) ms = ms * 10 + (s[pos] - '0');
    ++digits;
    ++pos;
  }
  if (digits == 0) return false;
  for (int i = digits; i < 3; ++i) ms *= 10;
  return true;
}

}  // namespace

std::optional<Instant> ParseIso8601(std::string_view s) {
  std::size_t pos = 0;
  int y, mo, d, h = 0, mi = 0, sec = 0, ms = 0;
  if (!ReadDigits(s, pos, 4, y) || pos >= s.size() || s[pos++] != '-' ||
      !ReadDigits(s, pos, 2, mo) || pos >= s.size() || s[pos++] != '-' ||
      !ReadDigits(s, pos, 2, d)) {
    return std::nullopt;
  }
  std::int64_t offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
    ++pos;
    if (!ReadDigits(s, pos, 2, h) || pos >= s.size() || s[pos++] != ':' ||
        !ReadDigits(s, pos, 2, mi)) {
      return std::nullopt;
    }
    if (pos < s.size() && s[pos] == ':') {
      ++pos;
      if (!ReadDigits(s, pos, 2, sec) || !ReadFraction(s, pos, ms)) {
        return std::nullopt;
      }
    }
    if (pos < s.size()) {
      if (s[pos] == 'Z') {
        ++pos;
      } else if (s[pos] == '+' || s[pos] == '-') {
        const int sign = s[pos] == '+' ? 1 : -1;
        ++pos;
        int oh, om = 0;
        if (!ReadDigits(s, pos, 2, oh)) return std::nullopt;
        if (pos < s.size() && s[pos] == ':') ++pos;
        if (pos < s.size() && !ReadDigits(s, pos, 2, om)) return std::nullopt;
        offset_minutes = sign * (oh * 60 + om);
      }
    }
  }
  if (pos != s.size()) return std::nullopt;
  const auto millis = CivilToMillis(y, mo, d, h, mi, sec, ms);
  if (!millis) return std::nullopt;
  return Instant{*millis - offset_minutes * 60000};
}

std::optional<Instant> ParseTimestamp(std::string_view text,
                                      std::string_view format) {
  if (format.empty()) return ParseIso8601(text);
  const std::string buffer(text);
  const std::string fmt_str(format);
  std::tm tm{};
  const char* end = strptime(buffer.c_str(), fmt_str.c_str(), &tm);
  if (end == nullptr) return std::nullopt;
  std::string_view rest(end);
  std::size_t pos = 0;
  int ms = 0;
  if (!ReadFraction(rest, pos, ms)) return std::nullopt;
  while (pos < rest.size() && rest[pos] == ' ') ++pos;
  if (pos != rest.size()) return std::nullopt;
  const auto millis = CivilToMillis(tm.tm_year + 1900, tm.tm_mon + 1,
                                    tm.tm_mday, tm.tm_hour, tm.tm_min,
                                    tm.tm_sec, ms);
  if (!millis) return std::nullopt;
  return Instant{*millis};
}

std::string FormatIso8601(Instant t) {
  std::int64_t ms = t.millis;
  std::int64_t day_count = ms / 86400000;
  std::int64_t rem = ms % 86400000;
  if (rem < 0) {
    rem += 86400000;
    --day_count;
  }
  const std::chrono::year_month_day ymd{sys_days{days{day_count}}};
  const int h = static_cast<int>(rem / 3600000);
  const int mi = static_cast<int>(rem / 60000 % 60);
  const int s = static_cast<int>(rem / 1000 % 60);
  const int milli = static_cast<int>(rem % 1000);
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}.{:03d}Z",
                     static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()), h, mi, s, milli);
}

std::string WeekdayName(Instant t) {
  static constexpr const char* kNames[] = {"Sunday",   "Monday", "Tuesday",
                                           "Wednesday", "Thursday", "Friday",
                                           "Saturday"};
  std::int64_t day_count = t.millis / 86400000;
  if (t.millis % 86400000 < 0) --day_count;
  const std::chrono::weekday wd{sys_days{days{day_count}}};
  return kNames[wd.c_encoding()];
}

EventLog ReadLogFile(const std::filesystem::path& path,
                     const CsvConfig& config) {
  if (path.extension() == ".xes") return ReadXesFile(path);
  return ReadCsvFile(path, config);
}

}  // namespace xppa
