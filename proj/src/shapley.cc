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

#include "xppa/shapley.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "xppa/error.h"

namespace xppa {
namespace {

bool SameValue(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b) ||
         (std::isnan(a) && std::isnan(b));
}

// Distinct background rows with multiplicities, in first-seen order.
struct WeightedBackground {
  std::vector<std::vector<double>> rows;
  std::vector<double> weights;
  double total = 0;
};

WeightedBackground Deduplicate(const PayoutConfig& payout) {
  WeightedBackground out;
  std::map<std::vector<std::uint64_t>, std::size_t> index;
  for (std::size_t b = 0; b < payout.rows(); ++b) {
    const auto row = payout.row(b);
    std::vector<std::uint64_t> key(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
      // All NaNs share one key.
      key[i] = std::isnan(row[i]) ? 0x7ff8000000000000ULL
                                  : std::bit_cast<std::uint64_t>(row[i]);
    }
    const auto [it, inserted] = index.emplace(std::move(key), out.rows.size());
    if (inserted) {
      out.rows.emplace_back(row.begin(), row.end());
      out.weights.push_back(0);
    }
    out.weights[it->second] += 1;
  }
  out.total = static_cast<double>(payout.rows());
  return out;
}

void CheckInputs(const Oracle& oracle, std::span<const double> instance,
                 const PayoutConfig& payout) {
  if (!oracle.predict) throw ContractViolation("oracle has no predict function");
  if (payout.rows() == 0) throw ContractViolation("empty background");
  if (payout.width != instance.size()) {
    throw ContractViolation(fmt::format("instance width {} != background width {}",
                                        instance.size(), payout.width));
  }
  if (!oracle.depends_on.empty() && oracle.depends_on.size() != instance.size()) {
    throw ContractViolation("oracle dependency mask has the wrong width");
  }
}

// Features that may change the payout for background row `b`.
std::vector<std::size_t> ActivePlayers(const Oracle& oracle,
                                       std::span<const double> instance,
                                       const std::vector<double>& b) {
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < instance.size(); ++i) {
    if (!oracle.depends_on.empty() && !oracle.depends_on[i]) continue;
    if (!SameValue(instance[i], b[i])) active.push_back(i);
  }
  return active;
}

double BaseValue(const Oracle& oracle, const WeightedBackground& bg,
                 std::vector<double>& f_background) {
  f_background.resize(bg.rows.size());
  double sum = 0;
  for (std::size_t b = 0; b < bg.rows.size(); ++b) {
    f_background[b] = oracle.predict(bg.rows[b]);
    sum += bg.weights[b] * f_background[b];
  }
  return sum / bg.total;
}

// Adds share * (Shapley values of the game against one background row) to
// `values`, enumerating all subsets of the active players.
void AccumulateRowExact(const Oracle& oracle, std::span<const double> instance,
                        const std::vector<double>& row, double f_row,
                        const std::vector<std::size_t>& active, double share,
                        std::vector<double>& values) {
  const std::size_t a = active.size();
  if (a == 0) return;
  const std::size_t n_subsets = std::size_t{1} << a;
  std::vector<double> payoff(n_subsets, 0.0);
  payoff[0] = f_row;
  std::vector<double> composite(row.size());
  for (std::size_t mask = 1; mask < n_subsets; ++mask) {
    composite = row;
    for (std::size_t p = 0; p < a; ++p) {
      if (mask & (std::size_t{1} << p)) composite[active[p]] = instance[active[p]];
    }
    payoff[mask] = oracle.predict(composite);
  }
  // weight[s] = s! (a - s - 1)! / a!
  std::vector<double> weight(a);
  for (std::size_t s = 0; s < a; ++s) {
    weight[s] = std::exp(std::lgamma(s + 1.0) + std::lgamma(a - s + 0.0) -
                         std::lgamma(a + 1.0));
  }
  for (std::size_t p = 0; p < a; ++p) {
    const std::size_t bit = std::size_t{1} << p;
    double psi = 0;
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      if (mask & bit) continue;
      psi += weight[std::popcount(mask)] * (payoff[mask | bit] - payoff[mask]);
    }
    values[active[p]] += share * psi;
  }
}

// Sets the residual and spreads it over the components proportionally to |psi|.
void RestoreEfficiency(ShapleyVector& out) {
  const double sum = std::accumulate(out.values.begin(), out.values.end(), 0.0);
  out.efficiency_residual = out.prediction - out.base_value - sum;
  double abs_sum = 0;
  for (double v : out.values) abs_sum += std::abs(v);
  if (abs_sum > 0 && out.efficiency_residual != 0) {
    const double r = out.efficiency_residual;
    for (double& v : out.values) v += r * std::abs(v) / abs_sum;
  }
}

}  // namespace

Oracle MakeOracle(const GbdtModel& model) {
  return Oracle{[&model](std::span<const double> row) { return model.Predict(row); },
                model.UsedFeatures()};
}

PayoutConfig SampleBackground(const EncodedDataset& ds, std::size_t size,
                              std::uint64_t seed) {
  PayoutConfig payout;
  payout.width = ds.width;
  std::vector<std::size_t> idx(ds.rows());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > size) {
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(size);
  }
  for (std::size_t r : idx) {
    const auto row = ds.row(r);
    payout.background.insert(payout.background.end(), row.begin(), row.end());
  }
  return payout;
}

ShapleyVector ExactShapley(const Oracle& oracle,
                           std::span<const double> instance,
                           const PayoutConfig& payout,
                           std::size_t exact_threshold) {
  CheckInputs(oracle, instance, payout);
  const std::size_t m = instance.size();
  if (m > exact_threshold) {
    throw Error("explain",
                fmt::format("{} features exceed the exact threshold {}; use "
                            "sampled Shapley values",
                            m, exact_threshold));
  }
  const WeightedBackground bg = Deduplicate(payout);
  ShapleyVector out;
  out.instance.assign(instance.begin(), instance.end());
  out.values.assign(m, 0.0);
  std::vector<double> f_background;
  out.base_value = BaseValue(oracle, bg, f_background);
  out.prediction = oracle.predict(instance);
  for (std::size_t b = 0; b < bg.rows.size(); ++b) {
    AccumulateRowExact(oracle, instance, bg.rows[b], f_background[b],
                       ActivePlayers(oracle, instance, bg.rows[b]),
                       bg.weights[b] / bg.total, out.values);
  }
  out.efficiency_residual =
      out.prediction - out.base_value -
      std::accumulate(out.values.begin(), out.values.end(), 0.0);
  return out;
}

ShapleyVector SampledShapley(const Oracle& oracle,
                             std::span<const double> instance,
                             const PayoutConfig& payout,
                             std::size_t n_permutations, std::uint64_t seed) {
  CheckInputs(oracle, instance, payout);
  if (n_permutations < 1) throw ContractViolation("n_permutations must be >= 1");
  const std::size_t m = instance.size();
  const WeightedBackground bg = Deduplicate(payout);
  ShapleyVector out;
  out.instance.assign(instance.begin(), instance.end());
  out.values.assign(m, 0.0);
  std::vector<double> f_background;
  out.base_value = BaseValue(oracle, bg, f_background);
  out.prediction = oracle.predict(instance);

  std::vector<std::vector<std::size_t>> active(bg.rows.size());
  std::vector<std::vector<bool>> is_active(bg.rows.size(),
                                           std::vector<bool>(m, false));
  for (std::size_t b = 0; b < bg.rows.size(); ++b) {
    active[b] = ActivePlayers(oracle, instance, bg.rows[b]);
    for (std::size_t i : active[b]) is_active[b][i] = true;
  }

  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> composite(m);
  auto walk = [&](const std::vector<std::size_t>& order, double scale) {
    for (std::size_t b = 0; b < bg.rows.size(); ++b) {
      if (active[b].empty()) continue;
      composite = bg.rows[b];
      double previous = f_background[b];
      const double w = scale * bg.weights[b] / bg.total;
      for (std::size_t i : order) {
        if (!is_active[b][i]) continue;
        composite[i] = instance[i];
        const double current = oracle.predict(composite);
        out.values[i] += w * (current - previous);
        previous = current;
      }
    }
  };

  // Enumerate all permutations when that is no more work than sampling.
  std::size_t factorial = 1;
  bool enumerate = true;
  for (std::size_t k = 2; k <= m; ++k) {
    factorial *= k;
    if (factorial > n_permutations) {
      enumerate = false;
      break;
    }
  }
  if (enumerate) {
    const double scale = 1.0 / static_cast<double>(factorial);
    do {
      walk(perm, scale);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::mt19937_64 rng(seed);
    const double scale = 1.0 / static_cast<double>(n_permutations);
    for (std::size_t p = 0; p < n_permutations; ++p) {
      for (std::size_t i = m; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(rng)]);
      }
      walk(perm, scale);
    }
  }
  RestoreEfficiency(out);
  return out;
}

ShapleyVector AdaptiveShapley(const Oracle& oracle,
                              std::span<const double> instance,
                              const PayoutConfig& payout,
                              const AdaptiveOptions& options) {
  CheckInputs(oracle, instance, payout);
  if (options.n_permutations < 1) {
    throw ContractViolation("n_permutations must be >= 1");
  }
  const WeightedBackground bg = Deduplicate(payout);
  ShapleyVector out;
  out.instance.assign(instance.begin(), instance.end());
  out.values.assign(instance.size(), 0.0);
  std::vector<double> f_background;
  out.base_value = BaseValue(oracle, bg, f_background);
  out.prediction = oracle.predict(instance);

  bool sampled = false;
  std::mt19937_64 rng(options.seed);
  std::vector<double> composite;
  for (std::size_t b = 0; b < bg.rows.size(); ++b) {
    const std::vector<std::size_t> active =
        ActivePlayers(oracle, instance, bg.rows[b]);
    const double share = bg.weights[b] / bg.total;
    if (active.size() <= options.exact_threshold) {
      AccumulateRowExact(oracle, instance, bg.rows[b], f_background[b], active,
                         share, out.values);
      continue;
    }
    sampled = true;
    std::vector<std::size_t> perm = active;
    const double w = share / static_cast<double>(options.n_permutations);
    for (std::size_t p = 0; p < options.n_permutations; ++p) {
      std::shuffle(perm.begin(), perm.end(), rng);
      composite = bg.rows[b];
      double previous = f_background[b];
      for (std::size_t i : perm) {
        composite[i] = instance[i];
        const double current = oracle.predict(composite);
        out.values[i] += w * (current - previous);
        previous = current;
      }
    }
  }
  if (sampled) {
    RestoreEfficiency(out);
  } else {
    out.efficiency_residual =
        out.prediction - out.base_value -
        std::accumulate(out.values.begin(), out.values.end(), 0.0);
  }
  return out;
}

ShapleyVector RescaleBoolean(const ShapleyVector& v, KpiValueKind kind) {
  if (kind != KpiValueKind::kBoolean) {
    throw ContractViolation("rescaling applies to boolean KPIs only");
  }
  ShapleyVector out = v;
  out.base_value = 2 * v.base_value - 1;
  out.prediction = 2 * v.prediction - 1;
  for (double& x : out.values) x *= 2;
  out.efficiency_residual = 2 * v.efficiency_residual;
  return out;
}

std::string FormatNumber(double value) {
  if (std::isnan(value)) return "nan";
  if (value == 0) return "0";
  const double a = std::abs(value);
  std::string s;
  if (a >= 1e4 && a < 1e15) {
    s = fmt::format("{:.0f}", value);
  } else {
    s = fmt::format("{:.4g}", value);
  }
  return s;
}

std::vector<Explanation> LabelExplanations(
    const ShapleyVector& vector,
    const std::vector<FeatureDescriptor>& descriptors,
    const DiscretizerSet& discretizers) {
  if (vector.values.size() != descriptors.size() ||
      vector.instance.size() != descriptors.size()) {
    throw ContractViolation("Shapley vector does not match descriptors");
  }
  std::vector<Explanation> out;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const double psi = vector.values[i];
    if (psi == 0) continue;
    const FeatureDescriptor& d = descriptors[i];
    const double x = vector.instance[i];
    const std::string name = d.Name();
    std::string label;
    const bool padded =
        d.presence_column >= 0 &&
        static_cast<std::size_t>(d.presence_column) < vector.instance.size() &&
        static_cast<int>(std::lround(vector.instance[d.presence_column])) ==
            kMissingCode;
    if (padded || std::isnan(x)) {
      label = name + "=missing";
    } else if (d.value_kind == FeatureKind::kCategorical) {
      label = name + "=" + d.CategoryLabel(x);
    } else if (i < discretizers.size() && discretizers[i]) {
      label = discretizers[i]->BucketLabel(name, x);
    } else {
      label = name + "=" + FormatNumber(x);
    }
    out.push_back({std::move(label), psi, d.derived});
  }
  return out;
}

std::vector<GlobalExplanation> AggregateGlobal(
    const std::vector<std::vector<Explanation>>& explanations,
    SortKey sort_key) {
  struct Group {
    std::vector<double> values;
    bool derived = false;
  };
  std::map<std::string, Group> groups;
  for (const auto& instance : explanations) {
    for (const Explanation& e : instance) {
      Group& g = groups[e.label];
      g.values.push_back(e.shapley_value);
      g.derived = e.derived;
    }
  }
  std::vector<GlobalExplanation> out;
  out.reserve(groups.size());
  for (auto& [label, g] : groups) {
    GlobalExplanation ge;
    ge.label = label;
    ge.count = g.values.size();
    ge.derived = g.derived;
    ge.mean_influence =
        std::accumulate(g.values.begin(), g.values.end(), 0.0) / ge.count;
    std::sort(g.values.begin(), g.values.end());
    const std::size_t mid = ge.count / 2;
    ge.median_influence = ge.count % 2 == 1
                              ? g.values[mid]
                              : (g.values[mid - 1] + g.values[mid]) / 2.0;
    out.push_back(std::move(ge));
  }
  auto key = [sort_key](const GlobalExplanation& g) {
    return std::abs(sort_key == SortKey::kMean ? g.mean_influence
                                               : g.median_influence);
  };
  std::stable_sort(out.begin(), out.end(),
                   [&](const GlobalExplanation& a, const GlobalExplanation& b) {
                     return key(a) > key(b);
                   });
  return out;
}

nlohmann::json ExplanationToJson(const ShapleyVector& v,
                                 const std::vector<Explanation>& explanations) {
  nlohmann::json items = nlohmann::json::array();
  for (const Explanation& e : explanations) {
    items.push_back(
        {{"label", e.label}, {"shap", e.shapley_value}, {"derived", e.derived}});
  }
  return {{"case_id", v.provenance.case_id},
          {"prefix_length", v.provenance.prefix_length},
          {"base_value", v.base_value},
          {"prediction", v.prediction},
          {"explanations", std::move(items)}};
}

nlohmann::json ToJson(const std::vector<GlobalExplanation>& globals) {
  nlohmann::json out = nlohmann::json::array();
  for (const GlobalExplanation& g : globals) {
    out.push_back({{"label", g.label},
                   {"mean", g.mean_influence},
                   {"median", g.median_influence},
                   {"count", g.count},
                   {"derived", g.derived}});
  }
  return out;
}

std::vector<GlobalExplanation> GlobalExplanationsFromJson(
    const nlohmann::json& j) {
  std::vector<GlobalExplanation> out;
  for (const auto& g : j) {
    out.push_back({g.at("label").get<std::string>(), g.at("mean").get<double>(),
                   g.at("median").get<double>(),
                   g.at("count").get<std::size_t>(),
                   g.value("derived", false)});
  }
  return out;
}

}  // namespace xppa
