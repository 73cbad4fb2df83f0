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
#include <cmath>
#include <numeric>
#include <queue>

#include "xppa/error.h"
#include "xppa/shapley.h"

namespace xppa {
namespace {

struct Segment {
  // Half-open range [begin, end) into the sorted sample.
  std::size_t begin = 0;
  std::size_t end = 0;
  int depth = 0;
  // Best split found inside the segment.
  double gain = 0;
  std::size_t cut = 0;
};

// Sorted (value, label) pairs with prefix sums.
struct Sample {
  std::vector<double> x;
  std::vector<double> sum;
  std::vector<double> sum_sq;

  double Sse(std::size_t b, std::size_t e) const {
    const double n = static_cast<double>(e - b);
    const double s = sum[e] - sum[b];
    return (sum_sq[e] - sum_sq[b]) - s * s / n;
  }
};

void FindSplit(const Sample& s, std::size_t min_bucket, Segment& seg) {
  seg.gain = 0;
  seg.cut = 0;
  if (seg.end - seg.begin < 2 * min_bucket) return;
  const double parent = s.Sse(seg.begin, seg.end);
  for (std::size_t c = seg.begin + min_bucket; c + min_bucket <= seg.end; ++c) {
    if (s.x[c - 1] == s.x[c]) continue;
    const double gain = parent - s.Sse(seg.begin, c) - s.Sse(c, seg.end);
    if (gain > seg.gain + 1e-12 * std::max(1.0, parent)) {
      seg.gain = gain;
      seg.cut = c;
    }
  }
}

}  // namespace

Discretizer::Discretizer(std::vector<double> boundaries)
    : boundaries_(std::move(boundaries)) {
  if (!std::is_sorted(boundaries_.begin(), boundaries_.end()) ||
      std::adjacent_find(boundaries_.begin(), boundaries_.end()) !=
          boundaries_.end()) {
    throw ContractViolation("discretizer boundaries must be strictly increasing");
  }
}

std::size_t Discretizer::BucketOf(double value) const {
  return static_cast<std::size_t>(
      std::upper_bound(boundaries_.begin(), boundaries_.end(), value) -
      boundaries_.begin());
}

std::string Discretizer::BucketLabel(const std::string& feature,
                                     double value) const {
  if (boundaries_.empty()) return feature + "=any";
  const std::size_t b = BucketOf(value);
  if (b == 0) return feature + "<" + FormatNumber(boundaries_.front());
  if (b == boundaries_.size()) {
    return feature + "≥" + FormatNumber(boundaries_.back());
  }
  return FormatNumber(boundaries_[b - 1]) + "≤" + feature + "<" +
         FormatNumber(boundaries_[b]);
}

Discretizer FitDiscretizer(std::span<const double> values,
                           std::span<const double> labels,
                           const DiscretizerOptions& options) {
  if (values.size() != labels.size()) {
    throw ContractViolation("values and labels differ in length");
  }
  if (options.max_buckets < 1) throw ContractViolation("max_buckets must be >= 1");
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i]) || std::isnan(labels[i])) continue;
    pairs.emplace_back(values[i], labels[i]);
  }
  if (pairs.size() < 2 || options.max_buckets == 1) return Discretizer();
  std::sort(pairs.begin(), pairs.end());

  Sample s;
  s.x.reserve(pairs.size());
  s.sum.assign(pairs.size() + 1, 0.0);
  s.sum_sq.assign(pairs.size() + 1, 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    s.x.push_back(pairs[i].first);
    s.sum[i + 1] = s.sum[i] + pairs[i].second;
    s.sum_sq[i + 1] = s.sum_sq[i] + pairs[i].second * pairs[i].second;
  }
  const std::size_t min_bucket = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(options.min_bucket_fraction * pairs.size())));
  const int max_depth = static_cast<int>(
      std::ceil(std::log2(static_cast<double>(options.max_buckets))));

  auto worse = [](const Segment& a, const Segment& b) {
    if (a.gain != b.gain) return a.gain < b.gain;
    return a.begin > b.begin;
  };
  std::priority_queue<Segment, std::vector<Segment>, decltype(worse)> open(worse);
  Segment root{0, pairs.size(), 0};
  FindSplit(s, min_bucket, root);
  open.push(root);

  std::vector<double> boundaries;
  while (!open.empty() && boundaries.size() + 1 < options.max_buckets) {
    Segment seg = open.top();
    open.pop();
    if (seg.gain <= 0 || seg.depth >= max_depth) continue;
    boundaries.push_back((s.x[seg.cut - 1] + s.x[seg.cut]) / 2.0);
    Segment left{seg.begin, seg.cut, seg.depth + 1};
    Segment right{seg.cut, seg.end, seg.depth + 1};
    FindSplit(s, min_bucket, left);
    FindSplit(s, min_bucket, right);
    open.push(left);
    open.push(right);
  }
  std::sort(boundaries.begin(), boundaries.end());
  return Discretizer(std::move(boundaries));
}

DiscretizerSet FitDiscretizers(const EncodedDataset& dataset,
                               const DiscretizerOptions& options) {
  DiscretizerSet out(dataset.width);
  std::vector<double> column(dataset.rows());
  for (std::size_t f = 0; f < dataset.width; ++f) {
    if (dataset.descriptors[f].value_kind != FeatureKind::kNumeric) continue;
    for (std::size_t r = 0; r < dataset.rows(); ++r) {
      column[r] = dataset.values[r * dataset.width + f];
    }
    out[f] = FitDiscretizer(column, dataset.labels, options);
  }
  return out;
}

nlohmann::json ToJson(const DiscretizerSet& set) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : set) {
    if (d) {
      out.push_back(d->boundaries());
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

DiscretizerSet DiscretizerSetFromJson(const nlohmann::json& j) {
  DiscretizerSet out;
  for (const auto& d : j) {
    if (d.is_null()) {
      out.emplace_back();
    } else {
      out.emplace_back(Discretizer(d.get<std::vector<double>>()));
    }
  }
  return out;
}

}  // namespace xppa
