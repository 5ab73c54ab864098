#pragma once

// Random forest over sparse TF-IDF vectors. Each tree is grown on a seeded
// bootstrap resample; at every node sqrt(n_features) candidate features are
// drawn and the split with the largest Gini impurity decrease wins, ties
// going to the lowest feature index, then the lowest threshold. Training is
// deterministic given (seed, tree index) streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "scamdetect/corpus.hpp"
#include "scamdetect/features.hpp"
#include "scamdetect/util.hpp"

namespace scamdetect {

struct DegenerateTrainingError : Error {
  DegenerateTrainingError() : Error("training set contains a single class") {}
};

struct DimensionMismatchError : Error {
  DimensionMismatchError() : Error("vector dimension exceeds model feature space") {}
};

struct TreeNode {
  // internal node when leaf == -1, otherwise leaf holds the label
  std::uint32_t feature = 0;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf = -1;  // -1 internal, 0 Legit, 1 Scam
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  Label predict(const TermVector& x) const {
    std::int32_t at = 0;
    while (nodes[static_cast<std::size_t>(at)].leaf < 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(at)];
      at = x.value_at(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].leaf == 1 ? Label::Scam
                                                         : Label::Legit;
  }
};

struct RfParams {
  std::uint32_t n_trees = 101;  // odd, so binary votes cannot tie
  std::uint32_t max_depth = 0;  // 0 = unbounded
  std::uint64_t seed = 0;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  std::uint32_t n_features = 0;
  RfParams params;
};

namespace detail {

inline void check_dims(const std::vector<TermVector>& X,
                       std::uint32_t n_features) {
  for (const TermVector& v : X) {
    if (!v.entries.empty() && v.max_index() >= n_features)
      throw DimensionMismatchError();
  }
}

inline void check_both_labels(const std::vector<Label>& y) {
  bool scam = false, legit = false;
  for (Label l : y) (l == Label::Scam ? scam : legit) = true;
  if (!scam || !legit) throw DegenerateTrainingError();
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<TermVector>& X, const std::vector<Label>& y,
              std::uint32_t n_features, std::uint32_t max_depth, Rng& rng)
      : X_(X), y_(y), n_features_(n_features), max_depth_(max_depth), rng_(rng) {
    mtry_ = std::max<std::uint32_t>(
        1, static_cast<std::uint32_t>(std::sqrt(static_cast<double>(n_features))));
  }

  DecisionTree build(std::vector<std::uint32_t> indices) {
    DecisionTree tree;
    grow(tree, std::move(indices), 1);
    return tree;
  }

 private:
  static double gini(std::size_t n_scam, std::size_t n_total) {
    if (n_total == 0) return 0.0;
    double p = static_cast<double>(n_scam) / static_cast<double>(n_total);
    return 2.0 * p * (1.0 - p);
  }

  std::int32_t make_leaf(DecisionTree& tree, std::size_t n_scam,
                         std::size_t n_total) {
    TreeNode node;
    // majority label; ties resolve to Legit to avoid false accusations
    node.leaf = (2 * n_scam > n_total) ? 1 : 0;
    tree.nodes.push_back(node);
    return static_cast<std::int32_t>(tree.nodes.size() - 1);
  }

  std::int32_t grow(DecisionTree& tree, std::vector<std::uint32_t> indices,
                    std::uint32_t depth) {
    std::size_t n_scam = 0;
    for (std::uint32_t i : indices)
      if (y_[i] == Label::Scam) ++n_scam;
    const std::size_t n = indices.size();
    bool stop = n_scam == 0 || n_scam == n || n < 2 ||
                (max_depth_ != 0 && depth > max_depth_);
    if (stop) return make_leaf(tree, n_scam, n);

    // sample mtry distinct candidate features
    std::vector<std::uint32_t> candidates;
    candidates.reserve(mtry_);
    if (mtry_ >= n_features_) {
      for (std::uint32_t f = 0; f < n_features_; ++f) candidates.push_back(f);
    } else {
      std::vector<std::uint32_t> pool(n_features_);
      for (std::uint32_t f = 0; f < n_features_; ++f) pool[f] = f;
      for (std::uint32_t k = 0; k < mtry_; ++k) {
        std::size_t j =
            k + static_cast<std::size_t>(bounded(rng_, pool.size() - k));
        std::swap(pool[k], pool[j]);
        candidates.push_back(pool[k]);
      }
      std::sort(candidates.begin(), candidates.end());
    }

    double parent_gini = gini(n_scam, n);
    double best_gain = 0.0;
    std::uint32_t best_feature = 0;
    double best_threshold = 0.0;
    bool found = false;
    std::vector<std::pair<double, Label>> vals;
    vals.reserve(n);
    for (std::uint32_t f : candidates) {
      vals.clear();
      for (std::uint32_t i : indices) vals.emplace_back(X_[i].value_at(f), y_[i]);
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t left_n = 0, left_scam = 0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        ++left_n;
        if (vals[i].second == Label::Scam) ++left_scam;
        if (vals[i].first == vals[i + 1].first) continue;
        double thr = vals[i].first + 0.5 * (vals[i + 1].first - vals[i].first);
        std::size_t right_n = n - left_n;
        std::size_t right_scam = n_scam - left_scam;
        double child =
            (static_cast<double>(left_n) * gini(left_scam, left_n) +
             static_cast<double>(right_n) * gini(right_scam, right_n)) /
            static_cast<double>(n);
        double gain = parent_gini - child;
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = f;
          best_threshold = thr;
          found = true;
        }
      }
    }
    if (!found) return make_leaf(tree, n_scam, n);

    std::vector<std::uint32_t> left_idx, right_idx;
    for (std::uint32_t i : indices) {
      (X_[i].value_at(best_feature) <= best_threshold ? left_idx : right_idx)
          .push_back(i);
    }
    indices.clear();
    indices.shrink_to_fit();
    std::size_t self = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes[self].feature = best_feature;
    tree.nodes[self].threshold = best_threshold;
    std::int32_t l = grow(tree, std::move(left_idx), depth + 1);
    std::int32_t r = grow(tree, std::move(right_idx), depth + 1);
    tree.nodes[self].left = l;
    tree.nodes[self].right = r;
    return static_cast<std::int32_t>(self);
  }

  const std::vector<TermVector>& X_;
  const std::vector<Label>& y_;
  std::uint32_t n_features_;
  std::uint32_t max_depth_;
  std::uint32_t mtry_ = 1;
  Rng& rng_;
};

}  // namespace detail

inline RandomForestModel train_random_forest(const std::vector<TermVector>& X,
                                             const std::vector<Label>& y,
                                             std::uint32_t n_features,
                                             const RfParams& params = {}) {
  if (X.size() != y.size()) throw DimensionMismatchError();
  if (X.size() < 2) throw DegenerateTrainingError();
  if (params.n_trees == 0 || params.n_trees % 2 == 0)
    throw InvalidArgumentError("n_trees must be a positive odd number");
  detail::check_both_labels(y);
  detail::check_dims(X, n_features);

  RandomForestModel model;
  model.n_features = n_features;
  model.params = params;
  model.trees.reserve(params.n_trees);
  const std::size_t n = X.size();
  for (std::uint32_t t = 0; t < params.n_trees; ++t) {
    Rng rng(mix_seed(params.seed, t));
    std::vector<std::uint32_t> sample(n);
    for (std::size_t i = 0; i < n; ++i)
      sample[i] = static_cast<std::uint32_t>(bounded(rng, n));
    detail::TreeBuilder builder(X, y, n_features, params.max_depth, rng);
    model.trees.push_back(builder.build(std::move(sample)));
  }
  return model;
}

inline Label predict(const RandomForestModel& model, const TermVector& x) {
  if (!x.entries.empty() && x.max_index() >= model.n_features)
    throw DimensionMismatchError();
  std::size_t scam_votes = 0;
  for (const DecisionTree& tree : model.trees) {
    if (tree.predict(x) == Label::Scam) ++scam_votes;
  }
  return 2 * scam_votes > model.trees.size() ? Label::Scam : Label::Legit;
}

}  // namespace scamdetect
