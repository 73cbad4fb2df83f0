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

#include <fstream>
#include <istream>
#include <unordered_map>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include "xppa/error.h"
#include "xppa/event_log.h"

namespace xppa {
namespace {

namespace pt = boost::property_tree;

struct TypedAttribute {
  std::string key;
  ValueKind kind;
  AttributeValue value;
};

std::optional<TypedAttribute> ReadAttribute(const std::string& tag,
                                            const pt::ptree& node) {
  const std::string key = node.get<std::string>("<xmlattr>.key", "");
  const std::string raw = node.get<std::string>("<xmlattr>.value", "");
  if (key.empty()) return std::nullopt;
  if (tag == "string" || tag == "id") {
    return TypedAttribute{key, ValueKind::kLiteral, raw};
  }
  if (tag == "int" || tag == "float") {
    try {
      std::size_t used = 0;
      const double v = std::stod(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return TypedAttribute{key, ValueKind::kNumeric, v};
    } catch (const std::exception&) {
      throw Error("parse", fmt::format("xes: bad {} value '{}' for '{}'", tag,
                                       raw, key));
    }
  }
  if (tag == "boolean") {
    return TypedAttribute{key, ValueKind::kBoolean, raw == "true"};
  }
  if (tag == "date") {
    const auto t = ParseIso8601(raw);
    if (!t) {
      throw Error("parse", fmt::format("xes: unparseable date '{}' for '{}'",
                                       raw, key));
    }
    return TypedAttribute{key, ValueKind::kTimestamp, *t};
  }
  return std::nullopt;
}

class SchemaBuilder {
 public:
  std::size_t Index(const std::string& name, ValueKind kind) {
    const auto it = index_.find(name);
    if (it == index_.end()) {
      index_.emplace(name, schema_.size());
      schema_.push_back({name, kind});
      return schema_.size() - 1;
    }
    if (schema_[it->second].kind != kind) {
      throw Error("parse", fmt::format("schema: attribute '{}' has mixed kinds "
                                       "({} and {})",
                                       name, ValueKindName(schema_[it->second].kind),
                                       ValueKindName(kind)));
    }
    return it->second;
  }
  std::vector<AttributeSpec> Take() { return std::move(schema_); }
  std::size_t size() const { return schema_.size(); }

 private:
  std::vector<AttributeSpec> schema_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct PendingEvent {
  Event event;
  std::vector<std::pair<std::size_t, AttributeValue>> values;
};

}  // namespace

EventLog ParseXes(std::istream& input) {
  pt::ptree tree;
  try {
    pt::read_xml(input, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error("parse", std::string("xes: ") + e.what());
  }
  const auto log_node = tree.get_child_optional("log");
  if (!log_node) throw Error("parse", "xes: missing <log> element");

  SchemaBuilder schema;
  std::vector<Trace> traces;
  std::vector<std::vector<PendingEvent>> pending;
  std::size_t trace_no = 0;
  for (const auto& [tag, trace_node] : *log_node) {
    if (tag != "trace") continue;
    ++trace_no;
    std::string case_id = fmt::format("trace_{}", trace_no);
    std::vector<std::pair<std::size_t, AttributeValue>> trace_values;
    std::vector<PendingEvent> events;
    for (const auto& [child_tag, child] : trace_node) {
      if (child_tag == "event") {
        PendingEvent pe;
        bool has_activity = false, has_time = false;
        for (const auto& [attr_tag, attr_node] : child) {
          const auto attr = ReadAttribute(attr_tag, attr_node);
          if (!attr) continue;
          if (attr->key == "concept:name" &&
              attr->kind == ValueKind::kLiteral) {
            pe.event.activity = std::get<std::string>(attr->value);
            has_activity = true;
          } else if (attr->key == "time:timestamp" &&
                     attr->kind == ValueKind::kTimestamp) {
            pe.event.timestamp = std::get<Instant>(attr->value);
            has_time = true;
          } else {
            pe.values.emplace_back(schema.Index(attr->key, attr->kind),
                                   attr->value);
          }
        }
        if (!has_activity || !has_time) {
          throw Error("parse",
                      fmt::format("xes: event without concept:name or "
                                  "time:timestamp in trace {}",
                                  trace_no));
        }
        events.push_back(std::move(pe));
        continue;
      }
      const auto attr = ReadAttribute(child_tag, child);
      if (!attr) continue;
      if (attr->key == "concept:name") {
        case_id = std::visit(
            [](const auto& v) -> std::string {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, std::string>) {
                return v;
              } else if constexpr (std::is_same_v<T, double>) {
                return fmt::format("{}", v);
              } else {
                return "";
              }
            },
            attr->value);
      } else {
        trace_values.emplace_back(schema.Index("case:" + attr->key, attr->kind),
                                  attr->value);
      }
    }
    if (events.empty()) continue;
    for (PendingEvent& pe : events) {
      pe.values.insert(pe.values.end(), trace_values.begin(),
                       trace_values.end());
    }
    traces.push_back({case_id, {}});
    pending.push_back(std::move(events));
  }

  const std::size_t width = schema.size();
  for (std::size_t t = 0; t < traces.size(); ++t) {
    for (PendingEvent& pe : pending[t]) {
      pe.event.attributes.assign(width, Missing{});
      for (auto& [idx, value] : pe.values) pe.event.attributes[idx] = value;
      traces[t].events.push_back(std::move(pe.event));
    }
  }
  return MakeEventLog(std::move(traces), schema.Take());
}

EventLog ReadXesFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("parse", "cannot open '" + path.string() + "'");
  return ParseXes(in);
}

}  // namespace xppa
