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

#ifndef XPPA_SHAPLEY_H_
#define XPPA_SHAPLEY_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xppa/encoding.h"
#include "xppa/gbdt.h"
#include "xppa/kpi.h"

namespace xppa {

// A predictor seen as a pure function over encoded rows.
struct Oracle {
  std::function<double(std::span<const double>)> predict;
  // Features the output may depend on. Empty means "all". Features outside
  // the mask are treated as players that never change the payout.
  std::vector<bool> depends_on;
};

// Probability output for logistic models, raw value otherwise.
Oracle MakeOracle(const GbdtModel& model);

// Background sample defining the interventional payout:
//   val(S) = mean_b oracle(x_S, b_{not S}).
struct PayoutConfig {
  std::size_t width = 0;
  // Row-major background rows.
  std::vector<double> background;

  std::size_t rows() const { return width == 0 ? 0 : background.size() / width; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(background).subspan(i * width, width);
  }
};

// Uniform sample of `size` rows without replacement (all rows when the
// dataset is smaller).
PayoutConfig SampleBackground(const EncodedDataset& dataset, std::size_t size,
                              std::uint64_t seed);

struct ShapleyVector {
  std::vector<double> values;
  double base_value = 0;
  double prediction = 0;
  // The explained row.
  std::vector<double> instance;
  RowProvenance provenance;
  // prediction - base_value - sum(values) before any adjustment.
  double efficiency_residual = 0;
};

inline constexpr std::size_t kDefaultExactThreshold = 12;

// Subset-enumeration Shapley values under the interventional payout. Uses
// linearity over background rows: each distinct background row defines a
// game in which only features that differ from the instance (and that the
// oracle depends on) are non-dummy players, and the subset formula is
// evaluated over those players. Throws Error("explain") when the row width
// exceeds `exact_threshold`.
ShapleyVector ExactShapley(const Oracle& oracle,
                           std::span<const double> instance,
                           const PayoutConfig& payout,
                           std::size_t exact_threshold = kDefaultExactThreshold);

// Permutation-sampling estimate. When m! <= n_permutations every permutation
// is enumerated once (exact result). The residual prediction - base - sum is
// redistributed proportionally to |psi| so efficiency holds exactly.
ShapleyVector SampledShapley(const Oracle& oracle,
                             std::span<const double> instance,
                             const PayoutConfig& payout,
                             std::size_t n_permutations, std::uint64_t seed);

// Per background row, only features that differ from the instance matter.
// Rows with at most `exact_threshold` such features are solved by subset
// enumeration, the others by `n_permutations` sampled permutations. Exact
// whenever no row needs sampling; efficiency is restored as in
// SampledShapley otherwise.
struct AdaptiveOptions {
  std::size_t exact_threshold = kDefaultExactThreshold;
  std::size_t n_permutations = 2000;
  std::uint64_t seed = 0;
};

ShapleyVector AdaptiveShapley(const Oracle& oracle,
                              std::span<const double> instance,
                              const PayoutConfig& payout,
                              const AdaptiveOptions& options = {});

// Maps boolean-KPI probabilities p to 2p - 1 and scales psi by 2, so bars
// live in [-1, +1]. Throws ContractViolation for numeric KPIs.
ShapleyVector RescaleBoolean(const ShapleyVector& vector, KpiValueKind kind);

// Bucket boundaries for a numeric feature: split thresholds of a
// single-feature regression tree (feature -> KPI) grown best-first on squared
// error, at most max_buckets - 1 splits and depth ceil(log2(max_buckets)).
// Buckets are (-inf, w1), [w1, w2), ..., [wq, +inf).
class Discretizer {
 public:
  Discretizer() = default;
  explicit Discretizer(std::vector<double> boundaries);

  const std::vector<double>& boundaries() const { return boundaries_; }
  std::size_t bucket_count() const { return boundaries_.size() + 1; }
  std::size_t BucketOf(double value) const;
  // "f<w1", "w1≤f<w2", "f≥wq"; "f=any" without boundaries.
  std::string BucketLabel(const std::string& feature, double value) const;

  bool operator==(const Discretizer&) const = default;

 private:
  std::vector<double> boundaries_;
};

struct DiscretizerOptions {
  std::size_t max_buckets = 4;
  // Minimum samples per bucket as a fraction of the observed values
  // (at least 1 sample).
  double min_bucket_fraction = 0.0;
};

// NaN values are ignored.
Discretizer FitDiscretizer(std::span<const double> values,
                           std::span<const double> labels,
                           const DiscretizerOptions& options = {});

// One optional discretizer per descriptor (set for numeric features).
using DiscretizerSet = std::vector<std::optional<Discretizer>>;

DiscretizerSet FitDiscretizers(const EncodedDataset& dataset,
                               const DiscretizerOptions& options = {});

struct Explanation {
  std::string label;
  double shapley_value = 0;
  bool derived = false;
};

// Labels every feature with a non-zero Shapley value: "attr=value" for
// categories, bucket labels for numbers, "attr=missing" for missing values
// and history padding.
std::vector<Explanation> LabelExplanations(
    const ShapleyVector& vector,
    const std::vector<FeatureDescriptor>& descriptors,
    const DiscretizerSet& discretizers);

struct GlobalExplanation {
  std::string label;
  double mean_influence = 0;
  double median_influence = 0;
  std::size_t count = 0;
  bool derived = false;
};

enum class SortKey { kMean, kMedian };

// Groups by label (over the instances carrying it) and sorts by descending
// |mean| or |median|; ties broken by label.
std::vector<GlobalExplanation> AggregateGlobal(
    const std::vector<std::vector<Explanation>>& explanations,
    SortKey sort_key = SortKey::kMean);

// "1.83", "93600", "0.0004".
std::string FormatNumber(double value);

// {case_id, prefix_length, base_value, prediction, explanations: [...]}.
nlohmann::json ExplanationToJson(const ShapleyVector& vector,
                                 const std::vector<Explanation>& explanations);
nlohmann::json ToJson(const std::vector<GlobalExplanation>& globals);
std::vector<GlobalExplanation> GlobalExplanationsFromJson(
    const nlohmann::json& j);

nlohmann::json ToJson(const DiscretizerSet& set);
DiscretizerSet DiscretizerSetFromJson(const nlohmann::json& j);

}  // namespace xppa

#endif  // XPPA_SHAPLEY_H_
