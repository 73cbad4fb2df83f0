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

#include "xppa/gbdt.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "xppa/error.h"

namespace xppa {

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string_view ObjectiveName(Objective objective) {
  return objective == Objective::kLogistic ? "logistic" : "squared_error";
}

bool TreeNode::GoesLeft(double x) const {
  if (categorical) {
    if (std::isnan(x)) return false;
    const int code = static_cast<int>(std::lround(x));
    return std::binary_search(left_categories.begin(), left_categories.end(),
                              code);
  }
  return std::isnan(x) || x <= threshold;
}

int Tree::LeafIndex(std::span<const double> row) const {
  int i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = n.GoesLeft(row[n.feature]) ? n.left : n.right;
  }
  return i;
}

double Tree::Predict(std::span<const double> row) const {
  return nodes[LeafIndex(row)].value;
}

nlohmann::json ToJson(const TrainConfig& c) {
  return {{"n_trees", c.n_trees},
          {"max_depth", c.max_depth},
          {"learning_rate", c.learning_rate},
          {"min_samples_leaf", c.min_samples_leaf},
          {"seed", c.seed}};
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j) {
  TrainConfig c;
  c.n_trees = j.value("n_trees", c.n_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
  c.seed = j.value("seed", c.seed);
  return c;
}

GbdtModel::GbdtModel(Objective objective, double base_score,
                     double learning_rate, std::vector<Tree> trees,
                     std::vector<FeatureDescriptor> descriptors,
                     EncoderConfig encoder_config)
    : objective_(objective),
      base_score_(base_score),
      learning_rate_(learning_rate),
      trees_(std::move(trees)),
      descriptors_(std::move(descriptors)),
      encoder_config_(std::move(encoder_config)) {
  for (const Tree& t : trees_) {
    if (t.nodes.empty()) throw Error("model", "empty tree");
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) continue;
      const int size = static_cast<int>(t.nodes.size());
      if (n.feature >= static_cast<int>(descriptors_.size()) || n.left <= 0 ||
          n.right <= 0 || n.left >= size || n.right >= size) {
        throw Error("model", "malformed split node");
      }
    }
  }
}

double GbdtModel::PredictRaw(std::span<const double> row) const {
  if (row.size() != descriptors_.size()) {
    throw ContractViolation(fmt::format(
        "row width {} != model width {}", row.size(), descriptors_.size()));
  }
  double sum = 0;
  for (const Tree& t : trees_) sum += t.Predict(row);
  return base_score_ + learning_rate_ * sum;
}

double GbdtModel::Predict(std::span<const double> row) const {
  const double raw = PredictRaw(row);
  return objective_ == Objective::kLogistic ? Sigmoid(raw) : raw;
}

std::vector<double> GbdtModel::PredictAll(const EncodedDataset& ds) const {
  std::vector<double> out(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r) out[r] = Predict(ds.row(r));
  return out;
}

std::vector<bool> GbdtModel::UsedFeatures() const {
  std::vector<bool> used(descriptors_.size(), false);
  for (const Tree& t : trees_) {
    for (const TreeNode& n : t.nodes) {
      if (!n.is_leaf()) used[n.feature] = true;
    }
  }
  return used;
}

nlohmann::json GbdtModel::ToJson() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const TreeNode& n = t.nodes[i];
      nlohmann::json node = {{"id", i}};
      if (n.is_leaf()) {
        node["leaf"] = n.value;
      } else {
        node["feature"] = n.feature;
        if (n.categorical) {
          node["categories"] = n.left_categories;
        } else {
          node["threshold"] = n.threshold;
        }
        node["left"] = n.left;
        node["right"] = n.right;
      }
      nodes.push_back(std::move(node));
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  nlohmann::json descs = nlohmann::json::array();
  for (const FeatureDescriptor& d : descriptors_) descs.push_back(xppa::ToJson(d));
  return {{"format", "xppa-gbdt"},
          {"version", 1},
          {"objective", ObjectiveName(objective_)},
          {"base_score", base_score_},
          {"learning_rate", learning_rate_},
          {"trees", std::move(trees)},
          {"descriptors", std::move(descs)},
          {"encoder_config", xppa::ToJson(encoder_config_)}};
}

GbdtModel GbdtModel::FromJson(const nlohmann::json& j) {
  if (j.value("format", "") != "xppa-gbdt" || j.value("version", 0) != 1) {
    throw Error("model", "unsupported model format/version");
  }
  const std::string obj = j.at("objective").get<std::string>();
  if (obj != "logistic" && obj != "squared_error") {
    throw Error("model", "unknown objective '" + obj + "'");
  }
  std::vector<Tree> trees;
  for (const auto& jt : j.at("trees")) {
    Tree t;
    const auto& jn = jt.at("nodes");
    t.nodes.resize(jn.size());
    for (const auto& node : jn) {
      const std::size_t id = node.at("id").get<std::size_t>();
      if (id >= t.nodes.size()) throw Error("model", "node id out of range");
      TreeNode& n = t.nodes[id];
      if (node.contains("leaf")) {
        n.value = node.at("leaf").get<double>();
        continue;
      }
      n.feature = node.at("feature").get<int>();
      if (node.contains("categories")) {
        n.categorical = true;
        n.left_categories = node.at("categories").get<std::vector<int>>();
      } else {
        n.threshold = node.at("threshold").get<double>();
      }
      n.left = node.at("left").get<int>();
      n.right = node.at("right").get<int>();
    }
    trees.push_back(std::move(t));
  }
  std::vector<FeatureDescriptor> descs;
  for (const auto& d : j.at("descriptors")) {
    descs.push_back(FeatureDescriptorFromJson(d));
  }
  return GbdtModel(
      obj == "logistic" ? Objective::kLogistic : Objective::kSquaredError,
      j.at("base_score").get<double>(), j.at("learning_rate").get<double>(),
      std::move(trees), std::move(descs),
      EncoderConfigFromJson(j.at("encoder_config")));
}

// ---------------------------------------------------------------------------
// Training.

namespace {

constexpr double kLogisticLambda = 1e-6;
constexpr double kLogisticMaxLeaf = 5.0;
constexpr double kMinGainRatio = 1e-12;

struct FeatureBins {
  bool categorical = false;
  int n_bins = 0;
  // Numeric: bin 0 holds NaN; bin b >= 1 holds values up to upper[b].
  std::vector<double> upper;
};

struct HistBin {
  double g = 0;
  double h = 0;
  std::uint32_t count = 0;
};

struct Split {
  int feature = -1;
  double gain = 0;
  // Numeric: rows with bin <= last_left_bin go left.
  int last_left_bin = -1;
  // Categorical: bins (codes) going left, sorted.
  std::vector<int> left_bins;
};

class Trainer {
 public:
  Trainer(const EncodedDataset& ds, const TrainConfig& cfg, Objective obj)
      : ds_(ds), cfg_(cfg), obj_(obj), n_(ds.rows()), m_(ds.width) {
    lambda_ = obj == Objective::kLogistic ? kLogisticLambda : 0.0;
    BinFeatures();
  }

  GbdtModel Run(const EncoderConfig& encoder_config) {
    const double base = BaseScore();
    std::vector<double> raw(n_, base);
    grad_.resize(n_);
    hess_.resize(n_);
    std::vector<Tree> trees;
    std::vector<std::uint32_t> rows;
    for (int t = 0; t < cfg_.n_trees; ++t) {
      ComputeGradients(raw);
      rows.resize(n_);
      std::iota(rows.begin(), rows.end(), 0u);
      Tree tree;
      leaf_of_row_.assign(n_, 0);
      Grow(tree, rows, 0);
      if (tree.nodes.size() == 1) break;
      for (std::size_t r = 0; r < n_; ++r) {
        raw[r] += cfg_.learning_rate * tree.nodes[leaf_of_row_[r]].value;
      }
      trees.push_back(std::move(tree));
    }
    return GbdtModel(obj_, base, cfg_.learning_rate, std::move(trees),
                     ds_.descriptors, encoder_config);
  }

 private:
  double BaseScore() const {
    const double mean =
        std::accumulate(ds_.labels.begin(), ds_.labels.end(), 0.0) / n_;
    if (obj_ == Objective::kSquaredError) return mean;
    const double p = std::clamp(mean, 1e-6, 1.0 - 1e-6);
    return std::log(p / (1.0 - p));
  }

  void ComputeGradients(const std::vector<double>& raw) {
    for (std::size_t r = 0; r < n_; ++r) {
      if (obj_ == Objective::kSquaredError) {
        grad_[r] = raw[r] - ds_.labels[r];
        hess_[r] = 1.0;
      } else {
        const double p = Sigmoid(raw[r]);
        grad_[r] = p - ds_.labels[r];
        hess_[r] = std::max(p * (1.0 - p), 1e-12);
      }
    }
  }

  void BinFeatures() {
    features_.resize(m_);
    bins_.resize(n_ * m_);
    for (std::size_t j = 0; j < m_; ++j) {
      FeatureBins& fb = features_[j];
      std::uint32_t* col = &bins_[j * n_];
      fb.categorical = ds_.descriptors[j].value_kind == FeatureKind::kCategorical;
      if (fb.categorical) {
        int max_code = 0;
        for (std::size_t r = 0; r < n_; ++r) {
          const double v = ds_.values[r * m_ + j];
          const int code =
              std::isnan(v) || v < 0 ? 0 : static_cast<int>(std::lround(v));
          col[r] = static_cast<std::uint32_t>(code);
          max_code = std::max(max_code, code);
        }
        fb.n_bins = max_code + 1;
        continue;
      }
      std::vector<double> sorted;
      sorted.reserve(n_);
      for (std::size_t r = 0; r < n_; ++r) {
        const double v = ds_.values[r * m_ + j];
        if (!std::isnan(v)) sorted.push_back(v);
      }
      std::sort(sorted.begin(), sorted.end());
      std::vector<double> uniq;
      std::vector<std::size_t> counts;
      for (double v : sorted) {
        if (uniq.empty() || v != uniq.back()) {
          uniq.push_back(v);
          counts.push_back(0);
        }
        ++counts.back();
      }
      fb.upper.assign(1, std::numeric_limits<double>::lowest());
      if (uniq.size() <= static_cast<std::size_t>(kMaxNumericBins)) {
        fb.upper.insert(fb.upper.end(), uniq.begin(), uniq.end());
      } else {
        // Equal-mass groups of distinct values.
        const double per_bin =
            static_cast<double>(sorted.size()) / kMaxNumericBins;
        std::size_t cumulative = 0;
        int groups = 1;
        for (std::size_t u = 0; u < uniq.size(); ++u) {
          cumulative += counts[u];
          if (cumulative >= per_bin * groups || u + 1 == uniq.size()) {
            fb.upper.push_back(uniq[u]);
            while (cumulative >= per_bin * groups) ++groups;
          }
        }
      }
      fb.n_bins = static_cast<int>(fb.upper.size());
      for (std::size_t r = 0; r < n_; ++r) {
        const double v = ds_.values[r * m_ + j];
        if (std::isnan(v)) {
          col[r] = 0;
        } else {
          const auto it = std::lower_bound(fb.upper.begin() + 1, fb.upper.end(), v);
          col[r] = static_cast<std::uint32_t>(it - fb.upper.begin());
        }
      }
    }
  }

  double LeafValue(double g, double h) const {
    double v = -g / (h + lambda_);
    if (obj_ == Objective::kLogistic) {
      v = std::clamp(v, -kLogisticMaxLeaf, kLogisticMaxLeaf);
    }
    return v;
  }

  double Score(double g, double h) const { return g * g / (h + lambda_); }

  Split FindSplit(const std::vector<std::uint32_t>& rows, double g_total,
                  double h_total, double min_gain) {
    Split best;
    best.gain = min_gain;
    const std::uint32_t n_node = static_cast<std::uint32_t>(rows.size());
    const std::uint32_t min_leaf =
        static_cast<std::uint32_t>(std::max(1, cfg_.min_samples_leaf));
    const double parent = Score(g_total, h_total);
    for (std::size_t j = 0; j < m_; ++j) {
      const FeatureBins& fb = features_[j];
      hist_.assign(fb.n_bins, HistBin{});
      const std::uint32_t* col = &bins_[j * n_];
      for (std::uint32_t r : rows) {
        HistBin& b = hist_[col[r]];
        b.g += grad_[r];
        b.h += hess_[r];
        ++b.count;
      }
      if (!fb.categorical) {
        double gl = 0, hl = 0;
        std::uint32_t cl = 0;
        for (int b = 0; b + 1 < fb.n_bins; ++b) {
          if (hist_[b].count == 0) continue;
          gl += hist_[b].g;
          hl += hist_[b].h;
          cl += hist_[b].count;
          const std::uint32_t cr = n_node - cl;
          if (cr < min_leaf) break;
          if (cl < min_leaf) continue;
          const double gain =
              Score(gl, hl) + Score(g_total - gl, h_total - hl) - parent;
          if (gain > best.gain) {
            best.gain = gain;
            best.feature = static_cast<int>(j);
            best.last_left_bin = b;
            best.left_bins.clear();
          }
        }
        continue;
      }
      order_.clear();
      for (int b = 0; b < fb.n_bins; ++b) {
        if (hist_[b].count > 0) order_.push_back(b);
      }
      if (order_.size() < 2) continue;
      std::sort(order_.begin(), order_.end(), [&](int a, int b) {
        const double ma = hist_[a].g / (hist_[a].h + lambda_ + 1e-300);
        const double mb = hist_[b].g / (hist_[b].h + lambda_ + 1e-300);
        if (ma != mb) return ma < mb;
        return a < b;
      });
      double gl = 0, hl = 0;
      std::uint32_t cl = 0;
      for (std::size_t k = 0; k + 1 < order_.size(); ++k) {
        gl += hist_[order_[k]].g;
        hl += hist_[order_[k]].h;
        cl += hist_[order_[k]].count;
        const std::uint32_t cr = n_node - cl;
        if (cr < min_leaf) break;
        if (cl < min_leaf) continue;
        const double gain =
            Score(gl, hl) + Score(g_total - gl, h_total - hl) - parent;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<int>(j);
          best.last_left_bin = -1;
          best.left_bins.assign(order_.begin(), order_.begin() + k + 1);
        }
      }
      if (best.feature == static_cast<int>(j) && !best.left_bins.empty()) {
        std::sort(best.left_bins.begin(), best.left_bins.end());
      }
    }
    return best;
  }

  int Grow(Tree& tree, std::vector<std::uint32_t>& rows, int depth) {
    double g = 0, h = 0, sq = 0;
    for (std::uint32_t r : rows) {
      g += grad_[r];
      h += hess_[r];
      sq += grad_[r] * grad_[r];
    }
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});

    const std::size_t min_leaf = std::max(1, cfg_.min_samples_leaf);
    Split split;
    if (depth < cfg_.max_depth && rows.size() >= 2 * min_leaf && sq > 0) {
      split = FindSplit(rows, g, h, kMinGainRatio * sq);
    }
    if (split.feature < 0) {
      tree.nodes[index].value = LeafValue(g, h);
      for (std::uint32_t r : rows) leaf_of_row_[r] = index;
      return index;
    }

    const FeatureBins& fb = features_[split.feature];
    const std::uint32_t* col = &bins_[split.feature * n_];
    std::vector<bool> goes_left;
    if (fb.categorical) {
      goes_left.assign(fb.n_bins, false);
      for (int b : split.left_bins) goes_left[b] = true;
    }
    std::vector<std::uint32_t> left_rows, right_rows;
    for (std::uint32_t r : rows) {
      const bool left = fb.categorical ? goes_left[col[r]]
                                       : col[r] <= static_cast<std::uint32_t>(
                                                       split.last_left_bin);
      (left ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    TreeNode& node = tree.nodes[index];
    node.feature = split.feature;
    node.categorical = fb.categorical;
    if (fb.categorical) {
      node.left_categories = split.left_bins;
    } else {
      node.threshold = fb.upper[split.last_left_bin];
    }
    const int left = Grow(tree, left_rows, depth + 1);
    const int right = Grow(tree, right_rows, depth + 1);
    tree.nodes[index].left = left;
    tree.nodes[index].right = right;
    return index;
  }

  const EncodedDataset& ds_;
  TrainConfig cfg_;
  Objective obj_;
  std::size_t n_;
  std::size_t m_;
  double lambda_ = 0;
  std::vector<FeatureBins> features_;
  std::vector<std::uint32_t> bins_;  // column-major
  std::vector<double> grad_, hess_;
  std::vector<HistBin> hist_;
  std::vector<int> order_;
  std::vector<int> leaf_of_row_;
};

}  // namespace

GbdtModel Train(const EncodedDataset& dataset, const TrainConfig& config,
                Objective objective, const EncoderConfig& encoder_config) {
  if (dataset.width == 0) throw Error("config", "dataset has no features");
  if (dataset.rows() == 0) throw Error("train", "empty training dataset");
  if (config.n_trees < 1 || config.max_depth < 1) {
    throw Error("config", "n_trees and max_depth must be >= 1");
  }
  if (!(config.learning_rate > 0)) {
    throw Error("config", "learning_rate must be positive");
  }
  for (double y : dataset.labels) {
    if (!std::isfinite(y)) throw Error("train", "non-finite label");
    if (objective == Objective::kLogistic && y != 0.0 && y != 1.0) {
      throw Error("train", "logistic objective needs 0/1 labels");
    }
  }
  return Trainer(dataset, config, objective).Run(encoder_config);
}

std::vector<double> TrainingLossCurve(const GbdtModel& model,
                                      const EncodedDataset& ds) {
  std::vector<double> raw(ds.rows(), model.base_score());
  std::vector<double> curve;
  auto loss = [&]() {
    double total = 0;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
      const double y = ds.labels[r];
      if (model.objective() == Objective::kSquaredError) {
        total += (raw[r] - y) * (raw[r] - y);
      } else {
        const double p = std::clamp(Sigmoid(raw[r]), 1e-15, 1 - 1e-15);
        total -= y * std::log(p) + (1 - y) * std::log(1 - p);
      }
    }
    return total / static_cast<double>(ds.rows());
  };
  curve.push_back(loss());
  for (const Tree& t : model.trees()) {
    for (std::size_t r = 0; r < ds.rows(); ++r) {
      raw[r] += model.learning_rate() * t.Predict(ds.row(r));
    }
    curve.push_back(loss());
  }
  return curve;
}

}  // namespace xppa
