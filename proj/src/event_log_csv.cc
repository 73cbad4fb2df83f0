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
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

#include "xppa/error.h"
#include "xppa/event_log.h"

namespace xppa {
namespace {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may contain commas, quotes ("") and line
// breaks. Returns false at end of input.
bool ReadRow(std::istream& in, std::size_t& line, CsvRow& row) {
  row.fields.clear();
  row.line = line + 1;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      ++line;
      row.fields.push_back(std::move(field));
      return true;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (in_quotes) {
    throw Error("parse", fmt::format("line {}: unterminated quoted field",
                                     row.line));
  }
  if (!any) return false;
  ++line;
  row.fields.push_back(std::move(field));
  return true;
}

bool IsBlank(const CsvRow& row) {
  return row.fields.size() == 1 && row.fields[0].empty();
}

std::optional<double> ParseNumber(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::optional<bool> ParseBool(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "true") return true;
  if (lower == "false") return false;
  return std::nullopt;
}

ValueKind InferKind(const std::vector<CsvRow>& rows, std::size_t column) {
  bool any = false;
  bool numeric = true;
  bool boolean = true;
  for (const CsvRow& row : rows) {
    const std::string& cell = row.fields[column];
    if (cell.empty()) continue;
    any = true;
    if (numeric && !ParseNumber(cell)) numeric = false;
    if (boolean && !ParseBool(cell)) boolean = false;
    if (!numeric && !boolean) break;
  }
  if (!any) return ValueKind::kLiteral;
  if (numeric) return ValueKind::kNumeric;
  if (boolean) return ValueKind::kBoolean;
  return ValueKind::kLiteral;
}

AttributeValue ConvertCell(const std::string& cell, ValueKind kind,
                           const std::string& column, std::size_t line,
                           const CsvConfig& config) {
  if (cell.empty()) return Missing{};
  auto mismatch = [&]() {
    return Error("parse",
                 fmt::format("schema: column '{}' is {} but line {} holds '{}'",
                             column, ValueKindName(kind), line, cell));
  };
  switch (kind) {
    case ValueKind::kLiteral:
      return cell;
    case ValueKind::kNumeric: {
      const auto v = ParseNumber(cell);
      if (!v) throw mismatch();
      return *v;
    }
    case ValueKind::kBoolean: {
      const auto v = ParseBool(cell);
      if (!v) throw mismatch();
      return *v;
    }
    case ValueKind::kTimestamp: {
      const auto v = ParseTimestamp(cell, config.timestamp_format);
      if (!v) throw mismatch();
      return *v;
    }
  }
  return Missing{};
}

std::string Quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string FormatCell(const AttributeValue& value) {
  struct Visitor {
    std::string operator()(const Missing&) const { return ""; }
    std::string operator()(const std::string& s) const { return Quote(s); }
    std::string operator()(double d) const { return fmt::format("{}", d); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(Instant t) const { return FormatIso8601(t); }
  };
  return std::visit(Visitor{}, value);
}

}  // namespace

EventLog ParseCsv(std::istream& input, const CsvConfig& config) {
  std::size_t line = 0;
  CsvRow header;
  if (!ReadRow(input, line, header) || IsBlank(header)) {
    throw Error("parse", "missing header row");
  }
  auto find_column = [&](const std::string& name) {
    const auto it = std::find(header.fields.begin(), header.fields.end(), name);
    if (it == header.fields.end()) {
      throw Error("parse",
                  "schema: missing mandatory column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.fields.begin());
  };
  const std::size_t case_col = find_column(config.case_column);
  const std::size_t act_col = find_column(config.activity_column);
  const std::size_t time_col = find_column(config.timestamp_column);

  std::vector<std::size_t> attr_cols;
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    if (i != case_col && i != act_col && i != time_col) attr_cols.push_back(i);
  }

  std::vector<CsvRow> rows;
  CsvRow row;
  while (ReadRow(input, line, row)) {
    if (IsBlank(row)) continue;
    if (row.fields.size() != header.fields.size()) {
      throw Error("parse", fmt::format("line {}: expected {} fields, got {}",
                                       row.line, header.fields.size(),
                                       row.fields.size()));
    }
    rows.push_back(row);
  }

  std::vector<AttributeSpec> schema;
  for (std::size_t col : attr_cols) {
    const std::string& name = header.fields[col];
    const auto explicit_kind = config.kinds.find(name);
    schema.push_back({name, explicit_kind != config.kinds.end()
                                ? explicit_kind->second
                                : InferKind(rows, col)});
  }

  std::vector<Trace> traces;
  std::unordered_map<std::string, std::size_t> trace_index;
  for (const CsvRow& r : rows) {
    const std::string& case_id = r.fields[case_col];
    if (case_id.empty()) {
      throw Error("parse", fmt::format("line {}: empty case id", r.line));
    }
    Event event;
    event.activity = r.fields[act_col];
    if (event.activity.empty()) {
      throw Error("parse", fmt::format("line {}: empty activity", r.line));
    }
    const auto ts = ParseTimestamp(r.fields[time_col], config.timestamp_format);
    if (!ts) {
      throw Error("parse", fmt::format("line {}: unparseable timestamp '{}'",
                                       r.line, r.fields[time_col]));
    }
    event.timestamp = *ts;
    event.attributes.reserve(attr_cols.size());
    for (std::size_t a = 0; a < attr_cols.size(); ++a) {
      event.attributes.push_back(ConvertCell(r.fields[attr_cols[a]],
                                             schema[a].kind, schema[a].name,
                                             r.line, config));
    }
    const auto [it, inserted] = trace_index.emplace(case_id, traces.size());
    if (inserted) traces.push_back({case_id, {}});
    traces[it->second].events.push_back(std::move(event));
  }
  return MakeEventLog(std::move(traces), std::move(schema));
}

EventLog ReadCsvFile(const std::filesystem::path& path,
                     const CsvConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("parse", "cannot open '" + path.string() + "'");
  return ParseCsv(in, config);
}

void WriteCsv(const EventLog& log, std::ostream& out, const CsvConfig& config) {
  out << Quote(config.case_column) << ',' << Quote(config.activity_column)
      << ',' << Quote(config.timestamp_column);
  for (const AttributeSpec& spec : log.schema) out << ',' << Quote(spec.name);
  out << '\n';
  for (const Trace& trace : log.traces) {
    for (const Event& e : trace.events) {
      out << Quote(trace.case_id) << ',' << Quote(e.activity) << ','
          << FormatIso8601(e.timestamp);
      for (const AttributeValue& v : e.attributes) out << ',' << FormatCell(v);
      out << '\n';
    }
  }
}

}  // namespace xppa
