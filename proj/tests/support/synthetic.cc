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

#include "support/synthetic.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

namespace xppa::testing {
namespace {

constexpr std::int64_t kEpoch2024 = 1704067200000;  // 2024-01-01T00:00:00Z

Instant At(std::int64_t start, double seconds) {
  return Instant{start + static_cast<std::int64_t>(std::llround(seconds * 1000))};
}

std::int64_t RandomStart(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> d(0, 365LL * 86400 * 1000);
  return kEpoch2024 + d(rng);
}

}  // namespace

EventLog PlantedClosureLog(std::size_t n_traces, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution slow(0.3);
  std::bernoulli_distribution web(0.5);
  std::uniform_int_distribution<int> steps(1, 4);
  std::uniform_real_distribution<double> quick(60.0, 600.0);
  const std::vector<std::string> middle = {"Check", "Review", "Contact"};
  std::uniform_int_distribution<std::size_t> pick(0, middle.size() - 1);

  std::vector<Trace> traces;
  for (std::size_t t = 0; t < n_traces; ++t) {
    const std::int64_t start = RandomStart(rng);
    const bool is_slow = slow(rng);
    const std::string type = is_slow ? "slow" : "fast";
    const std::string channel = web(rng) ? "web" : "phone";
    Trace trace{fmt::format("case{:05}", t), {}};
    double clock = 0;
    auto add = [&](const std::string& activity) {
      trace.events.push_back({activity, At(start, clock), {type, channel}});
    };
    add("Open");
    const int n = steps(rng);
    for (int s = 0; s < n; ++s) {
      clock += quick(rng);
      add(middle[pick(rng)]);
    }
    clock += is_slow ? 10 * kDay : 1 * kDay;
    add("Close");
    traces.push_back(std::move(trace));
  }
  return MakeEventLog(std::move(traces), {{"closure_type", ValueKind::kLiteral, false},
                                          {"channel", ValueKind::kLiteral, false}});
}

EventLog HistorySignalLog(std::size_t n_traces, int k_star, std::uint64_t seed) {
  constexpr int kLength = 6;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution is_x(0.5);
  std::vector<Trace> traces;
  for (std::size_t t = 0; t < n_traces; ++t) {
    const std::int64_t start = RandomStart(rng);
    std::vector<bool> tau(kLength + 1);
    for (int j = 1; j <= kLength; ++j) tau[j] = is_x(rng);
    Trace trace{fmt::format("case{:05}", t), {}};
    double clock = 0;
    for (int j = 1; j <= kLength; ++j) {
      trace.events.push_back({fmt::format("S{}", j), At(start, clock),
                              {std::string(tau[j] ? "x" : "y")}});
      const int source = j - k_star;
      // Before the signal source exists the gap is the expected value.
      const double extra = source >= 1 ? (tau[source] ? 2.0 : 0.0) : 1.0;
      clock += (1.0 + extra) * kDay;
    }
    traces.push_back(std::move(trace));
  }
  return MakeEventLog(std::move(traces), {{"tau", ValueKind::kLiteral, false}});
}

EventLog ReworkCountLog(std::size_t n_traces, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> length(3, 8);
  const std::vector<std::string> activities = {"A", "B", "C", "Rework"};
  std::uniform_int_distribution<std::size_t> pick(0, activities.size() - 1);
  std::vector<Trace> traces;
  for (std::size_t t = 0; t < n_traces; ++t) {
    const std::int64_t start = RandomStart(rng);
    const int n = length(rng);
    Trace trace{fmt::format("case{:05}", t), {}};
    double clock = 0;
    int reworks = 0;
    for (int j = 1; j <= n; ++j) {
      const std::string a = j == 1 ? "Start" : j == n ? "End" : activities[pick(rng)];
      if (a == "Rework") ++reworks;
      trace.events.push_back({a, At(start, clock), {static_cast<double>(j)}});
      clock += (1.0 + reworks) * kDay;
    }
    traces.push_back(std::move(trace));
  }
  return MakeEventLog(std::move(traces), {{"step", ValueKind::kNumeric, false}});
}

EventLog EscalationLog(std::size_t n_traces, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution high(0.4);
  std::uniform_real_distribution<double> gap(0.1, 2.0);
  std::vector<Trace> traces;
  for (std::size_t t = 0; t < n_traces; ++t) {
    const std::int64_t start = RandomStart(rng);
    const bool is_high = high(rng);
    const std::string priority = is_high ? "high" : "low";
    Trace trace{fmt::format("case{:05}", t), {}};
    double clock = 0;
    std::vector<std::string> path = {"Open", "Triage"};
    if (is_high) path.push_back("Escalate");
    path.push_back("Resolve");
    path.push_back("Close");
    for (const std::string& a : path) {
      trace.events.push_back({a, At(start, clock), {priority}});
      clock += gap(rng) * kDay;
    }
    traces.push_back(std::move(trace));
  }
  return MakeEventLog(std::move(traces), {{"priority", ValueKind::kLiteral, false}});
}

EventLog RandomLog(std::mt19937_64& rng, std::size_t max_traces,
                   std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> n_traces(1, max_traces);
  std::uniform_int_distribution<std::size_t> length(1, max_len);
  std::uniform_int_distribution<int> activity(0, 4);
  std::uniform_int_distribution<int> resource(0, 2);
  std::uniform_real_distribution<double> amount(0, 100);
  std::uniform_real_distribution<double> gap(0, 3 * kDay);
  std::bernoulli_distribution missing(0.15);
  const std::size_t n = n_traces(rng);
  std::vector<Trace> traces;
  for (std::size_t t = 0; t < n; ++t) {
    const std::int64_t start = RandomStart(rng);
    Trace trace{fmt::format("r{}", t), {}};
    double clock = 0;
    const std::size_t len = length(rng);
    for (std::size_t j = 0; j < len; ++j) {
      AttributeValue res = missing(rng) ? AttributeValue{Missing{}}
                                        : AttributeValue{fmt::format("R{}", resource(rng))};
      AttributeValue amt = missing(rng) ? AttributeValue{Missing{}}
                                        : AttributeValue{amount(rng)};
      trace.events.push_back({fmt::format("A{}", activity(rng)), At(start, clock),
                              {std::move(res), std::move(amt)}});
      clock += gap(rng);
    }
    traces.push_back(std::move(trace));
  }
  return MakeEventLog(std::move(traces), {{"resource", ValueKind::kLiteral, false},
                                          {"amount", ValueKind::kNumeric, false}});
}

Tree RandomTree(std::mt19937_64& rng, std::size_t width, int depth,
                const std::vector<bool>& usable) {
  std::vector<std::size_t> features;
  for (std::size_t f = 0; f < width; ++f) {
    if (usable.empty() || usable[f]) features.push_back(f);
  }
  std::uniform_int_distribution<std::size_t> pick(0, features.size() - 1);
  std::uniform_int_distribution<int> threshold(0, 3);
  std::uniform_real_distribution<double> leaf(-1, 1);
  Tree tree;
  // Breadth-first construction of a complete tree.
  tree.nodes.push_back({});
  std::vector<std::pair<int, int>> frontier = {{0, 0}};
  while (!frontier.empty()) {
    const auto [id, d] = frontier.front();
    frontier.erase(frontier.begin());
    if (d == depth || features.empty()) {
      tree.nodes[id].value = leaf(rng);
      continue;
    }
    tree.nodes[id].feature = static_cast<int>(features[pick(rng)]);
    tree.nodes[id].threshold = threshold(rng) + 0.5;
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    tree.nodes[id].left = left;
    tree.nodes[id].right = left + 1;
    frontier.push_back({left, d + 1});
    frontier.push_back({left + 1, d + 1});
  }
  return tree;
}

double TreeEnsemble::operator()(std::span<const double> row) const {
  double sum = 0;
  for (const Tree& t : trees) sum += t.Predict(row);
  return sum;
}

TreeEnsemble RandomEnsemble(std::mt19937_64& rng, std::size_t width,
                            std::size_t n_trees, int depth,
                            const std::vector<bool>& usable) {
  TreeEnsemble e;
  for (std::size_t i = 0; i < n_trees; ++i) {
    e.trees.push_back(RandomTree(rng, width, depth, usable));
  }
  return e;
}

std::vector<double> RandomRows(std::mt19937_64& rng, std::size_t n,
                               std::size_t width) {
  std::uniform_int_distribution<int> v(0, 4);
  std::vector<double> rows(n * width);
  for (double& x : rows) x = v(rng);
  return rows;
}

}  // namespace xppa::testing
