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

#ifndef XPPA_GBDT_H_
#define XPPA_GBDT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xppa/encoding.h"

namespace xppa {

enum class Objective { kSquaredError, kLogistic };

std::string_view ObjectiveName(Objective objective);

// One node of a regression tree. A node is a leaf when `feature` < 0.
// Numeric split: NaN or value <= threshold goes left. Categorical split:
// codes listed in `left_categories` go left, everything else (including codes
// never seen in training) goes right.
struct TreeNode {
  int feature = -1;
  bool categorical = false;
  double threshold = 0;
  std::vector<int> left_categories;
  int left = -1;
  int right = -1;
  double value = 0;

  bool is_leaf() const { return feature < 0; }
  bool GoesLeft(double x) const;
  bool operator==(const TreeNode&) const = default;
};

// Nodes stored by index, root at 0.
struct Tree {
  std::vector<TreeNode> nodes;

  double Predict(std::span<const double> row) const;
  int LeafIndex(std::span<const double> row) const;
  bool operator==(const Tree&) const = default;
};

struct TrainConfig {
  int n_trees = 300;
  int max_depth = 6;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  // Kept for reproducibility bookkeeping; training draws no random numbers.
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json ToJson(const TrainConfig& config);
TrainConfig TrainConfigFromJson(const nlohmann::json& j);

// Additive tree ensemble:
//   raw(x) = base_score + learning_rate * sum_t tree_t(x)
// Predict returns raw(x) for squared error and sigmoid(raw(x)) for logistic.
class GbdtModel {
 public:
  GbdtModel(Objective objective, double base_score, double learning_rate,
            std::vector<Tree> trees, std::vector<FeatureDescriptor> descriptors,
            EncoderConfig encoder_config);

  Objective objective() const { return objective_; }
  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<FeatureDescriptor>& descriptors() const {
    return descriptors_;
  }
  const EncoderConfig& encoder_config() const { return encoder_config_; }
  std::size_t width() const { return descriptors_.size(); }

  double PredictRaw(std::span<const double> row) const;
  double Predict(std::span<const double> row) const;
  std::vector<double> PredictAll(const EncodedDataset& dataset) const;

  // Features referenced by at least one split.
  std::vector<bool> UsedFeatures() const;

  nlohmann::json ToJson() const;
  static GbdtModel FromJson(const nlohmann::json& j);

  bool operator==(const GbdtModel&) const = default;

 private:
  Objective objective_;
  double base_score_;
  double learning_rate_;
  std::vector<Tree> trees_;
  std::vector<FeatureDescriptor> descriptors_;
  EncoderConfig encoder_config_;
};

// Greedy gradient boosting. Numeric features are scanned over their sorted
// distinct values (bucketed into at most kMaxNumericBins quantile groups when
// a feature has more distinct values than that); categorical features are
// scanned after ordering categories by mean gradient. Equal gains keep the
// lowest feature index, then the lowest threshold. Boosting stops early when
// a tree finds no split.
inline constexpr int kMaxNumericBins = 255;

GbdtModel Train(const EncodedDataset& dataset, const TrainConfig& config,
                Objective objective,
                const EncoderConfig& encoder_config = {});

// Training loss after each boosting round (index 0 is the base score alone).
// Diagnostic used by tests.
std::vector<double> TrainingLossCurve(const GbdtModel& model,
                                      const EncodedDataset& dataset);

double Sigmoid(double x);

}  // namespace xppa

#endif  // XPPA_GBDT_H_
