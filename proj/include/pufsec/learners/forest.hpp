#pragma once

// Random forest of Gini-split decision trees with bootstrap sampling and a
// per-split feature subsample. Labels are class indices 0..K-1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "pufsec/dataset.hpp"
#include "pufsec/error.hpp"
#include "pufsec/parallel.hpp"
#include "pufsec/rng.hpp"

namespace pufsec {

struct ForestHyper {
  int trees = 100;
  int max_depth = 16;  ///< <= 0 means unbounded
  int mtry = 0;        ///< 0 means ceil(sqrt(dim))
  bool bootstrap = true;
  int min_samples_split = 2;
};

/// Internal node when feature >= 0; otherwise a leaf. For two classes a leaf
/// holds the fraction of class-1 samples, for more classes the majority class.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Nodes are stored in pre-order; node 0 is the root.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left
                                                                              : nodes[i].right);
    return nodes[i];
  }

  /// Class index this tree votes for. Two-class leaf ties go to class 1.
  int vote(std::span<const double> x, int classes) const {
    const double v = leaf_for(x).value;
    if (classes == 2) return v >= 0.5 ? 1 : 0;
    return static_cast<int>(v);
  }
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const LabeledSet& data, int classes, const ForestHyper& h, Rng& rng)
      : data_(data), classes_(classes), hyper_(h), rng_(rng), counts_(static_cast<std::size_t>(classes)) {
    const std::size_t d = data.dim();
    mtry_ = h.mtry > 0 ? std::min<std::size_t>(static_cast<std::size_t>(h.mtry), d)
                       : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> samples) {
    DecisionTree tree;
    grow(tree, samples, 0, samples.size(), 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  int grow(DecisionTree& tree, std::vector<std::size_t>& s, std::size_t lo, std::size_t hi, int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::fill(counts_.begin(), counts_.end(), 0);
    for (std::size_t i = lo; i < hi; ++i) ++counts_[static_cast<std::size_t>(data_.y[s[i]])];
    const std::size_t n = hi - lo;
    const bool pure = std::count(counts_.begin(), counts_.end(), 0) >= classes_ - 1;
    const bool depth_cap = hyper_.max_depth > 0 && depth >= hyper_.max_depth;
    if (pure || depth_cap || n < static_cast<std::size_t>(std::max(hyper_.min_samples_split, 2))) {
      tree.nodes[index].value = leaf_value(n);
      return index;
    }
    const Split split = best_split(s, lo, hi);
    if (split.feature < 0) {
      tree.nodes[index].value = leaf_value(n);
      return index;
    }
    auto mid = std::partition(s.begin() + static_cast<std::ptrdiff_t>(lo), s.begin() + static_cast<std::ptrdiff_t>(hi),
                              [&](std::size_t r) { return data_.x(r, split.feature) <= split.threshold; });
    const std::size_t m = static_cast<std::size_t>(mid - s.begin());
    tree.nodes[index].feature = split.feature;
    tree.nodes[index].threshold = split.threshold;
    const int left = grow(tree, s, lo, m, depth + 1);
    const int right = grow(tree, s, m, hi, depth + 1);
    tree.nodes[index].left = left;
    tree.nodes[index].right = right;
    return index;
  }

  double leaf_value(std::size_t n) const {
    if (classes_ == 2) return static_cast<double>(counts_[1]) / static_cast<double>(n);
    return static_cast<double>(std::max_element(counts_.begin(), counts_.end()) - counts_.begin());
  }

  /// Examines features in random order; at least mtry of them, more if none
  /// of the first mtry admits a split. Any valid split is accepted, including
  /// one with zero Gini gain.
  Split best_split(const std::vector<std::size_t>& s, std::size_t lo, std::size_t hi) {
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    const std::size_t n = hi - lo;
    std::vector<std::pair<double, int>> column(n);
    std::vector<std::size_t> left(counts_.size()), right(counts_.size());
    for (std::size_t tried = 0; tried < features_.size(); ++tried) {
      if (tried >= mtry_ && best.feature >= 0) break;
      std::swap(features_[tried], features_[tried + uniform_index(rng_, features_.size() - tried)]);
      const int f = features_[tried];
      for (std::size_t i = 0; i < n; ++i) column[i] = {data_.x(s[lo + i], f), data_.y[s[lo + i]]};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      std::fill(left.begin(), left.end(), 0);
      right = counts_;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[static_cast<std::size_t>(column[i].second)];
        --right[static_cast<std::size_t>(column[i].second)];
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        const double impurity = nl * gini(left, nl) + nr * gini(right, nr);
        if (impurity < best.impurity) {
          best.impurity = impurity;
          best.feature = f;
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }
    return best;
  }

  static double gini(const std::vector<std::size_t>& c, double n) {
    double sum = 0.0;
    for (std::size_t v : c) {
      const double p = static_cast<double>(v) / n;
      sum += p * p;
    }
    return 1.0 - sum;
  }

  const LabeledSet& data_;
  int classes_;
  const ForestHyper& hyper_;
  Rng& rng_;
  std::vector<std::size_t> counts_;
  std::vector<int> features_;
  std::size_t mtry_ = 1;
};

}  // namespace detail

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::size_t dim, int classes, std::vector<DecisionTree> trees)
      : dim_(dim), classes_(classes), trees_(std::move(trees)) {
    if (classes < 2) throw InvalidArgument("forest needs >= 2 classes");
    if (trees_.empty()) throw InvalidArgument("forest needs at least one tree");
  }

  std::size_t dim() const noexcept { return dim_; }
  int classes() const noexcept { return classes_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  /// Vote fractions per class.
  void probabilities(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dim_) throw DimensionMismatch("forest input width");
    std::fill(out.begin(), out.begin() + classes_, 0.0);
    for (const auto& t : trees_) out[static_cast<std::size_t>(t.vote(x, classes_))] += 1.0;
    for (int k = 0; k < classes_; ++k) out[k] /= static_cast<double>(trees_.size());
  }

 private:
  std::size_t dim_ = 0;
  int classes_ = 2;
  std::vector<DecisionTree> trees_;
};

/// Tree t is grown from an engine seeded with derive_seed(seed, "tree", t), so
/// the forest does not depend on how trees are spread over threads.
inline ForestModel train_forest(const LabeledSet& data, int classes, const ForestHyper& hyper,
                                std::uint64_t seed, int threads = 1) {
  data.check();
  if (hyper.trees < 1) throw InvalidArgument("forest needs at least one tree");
  std::vector<DecisionTree> trees(static_cast<std::size_t>(hyper.trees));
  parallel_for(trees.size(), threads, [&](std::size_t t) {
    Rng rng = make_rng(derive_seed(seed, "tree", t));
    std::vector<std::size_t> samples(data.size());
    if (hyper.bootstrap) {
      for (auto& s : samples) s = uniform_index(rng, data.size());
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    detail::TreeBuilder builder(data, classes, hyper, rng);
    trees[t] = builder.build(std::move(samples));
  });
  return ForestModel(data.dim(), classes, std::move(trees));
}

}  // namespace pufsec
