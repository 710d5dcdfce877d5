#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "hrlfs/dataset.hpp"
#include "hrlfs/error.hpp"
#include "hrlfs/mask.hpp"
#include "hrlfs/metrics.hpp"
#include "hrlfs/random.hpp"

namespace hrlfs {

struct ForestParams {
  int n_trees = 20;
  int max_depth = 12;
  int min_leaf = 2;
};

// One CART tree stored as a flat node array; node 0 is the root.
struct CartTree {
  struct Node {
    int feature = -1;  // original feature index; -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // class index or mean target
  };
  std::vector<Node> nodes;

  double predict(std::span<const double> row) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(i)];
      i = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
};

struct ForestModel {
  std::vector<CartTree> trees;
  TaskKind task_kind = TaskKind::BinaryClassification;
  int num_classes = 0;
  std::vector<std::size_t> features;  // masked feature indices the model uses
  std::vector<std::size_t> bag_sizes;
  bool constant_input = false;  // every masked training column was constant

  // `row` is indexed by original feature index.
  double predict(std::span<const double> row) const {
    if (task_kind == TaskKind::Regression) {
      double s = 0.0;
      for (const auto& t : trees) s += t.predict(row);
      return s / static_cast<double>(trees.size());
    }
    std::vector<int> votes(static_cast<std::size_t>(std::max(num_classes, 1)), 0);
    for (const auto& t : trees) ++votes[static_cast<std::size_t>(t.predict(row))];
    return static_cast<double>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }

  std::vector<double> predict(const FeatureTable& t) const {
    std::vector<double> out(t.n_rows());
    std::vector<double> row(t.n_features(), 0.0);
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      for (std::size_t j : features) row[j] = t.columns[j][r];
      out[r] = predict(row);
    }
    return out;
  }
};

namespace detail {

class CartBuilder {
public:
  CartBuilder(const FeatureTable& data, const std::vector<std::size_t>& features, const ForestParams& params,
              Rng& rng)
      : data_(data), features_(features), params_(params), rng_(rng) {
    classification_ = is_classification(data.task_kind);
    n_classes_ = std::max(data.num_classes, 1);
    mtry_ = classification_ ? static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(features.size()))))
                            : features.size() / 3;
    mtry_ = std::clamp<std::size_t>(mtry_, 1, features.size());
  }

  CartTree build(std::vector<std::size_t> rows) {
    CartTree tree;
    tree.nodes.emplace_back();
    grow(tree, 0, rows, 0);
    return tree;
  }

private:
  double leaf_value(const std::vector<std::size_t>& rows) const {
    if (!classification_) {
      double s = 0.0;
      for (auto r : rows) s += data_.labels[r];
      return s / static_cast<double>(rows.size());
    }
    std::vector<int> counts(n_classes_, 0);
    for (auto r : rows) ++counts[static_cast<std::size_t>(data_.labels[r])];
    return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  bool pure(const std::vector<std::size_t>& rows) const {
    for (auto r : rows) {
      if (data_.labels[r] != data_.labels[rows.front()]) return false;
    }
    return true;
  }

  struct Split {
    double gain = 0.0;
    std::size_t feature = 0;
    double threshold = 0.0;
    bool found = false;
  };

  // Impurity is Gini * count for classification and SSE for regression, so
  // the gain is parent - (left + right).
  Split best_split_on(std::size_t f, std::vector<std::size_t>& rows, double parent) const {
    const auto& col = data_.columns[f];
    std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return col[a] < col[b] || (col[a] == col[b] && a < b);
    });
    const std::size_t m = rows.size();
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    Split best;
    if (classification_) {
      std::vector<double> left(n_classes_, 0.0), right(n_classes_, 0.0);
      for (auto r : rows) right[static_cast<std::size_t>(data_.labels[r])] += 1.0;
      double lsq = 0.0, rsq = 0.0;
      for (double c : right) rsq += c * c;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const auto c = static_cast<std::size_t>(data_.labels[rows[i]]);
        lsq += 2.0 * left[c] + 1.0;
        rsq -= 2.0 * right[c] - 1.0;
        left[c] += 1.0;
        right[c] -= 1.0;
        const std::size_t nl = i + 1, nr = m - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        if (col[rows[i]] == col[rows[i + 1]]) continue;
        const double imp = (static_cast<double>(nl) - lsq / static_cast<double>(nl)) +
                           (static_cast<double>(nr) - rsq / static_cast<double>(nr));
        const double gain = parent - imp;
        if (gain > best.gain + 1e-12) best = {gain, f, 0.5 * (col[rows[i]] + col[rows[i + 1]]), true};
      }
    } else {
      double ls = 0.0, lss = 0.0, rs = 0.0, rss = 0.0;
      for (auto r : rows) {
        rs += data_.labels[r];
        rss += data_.labels[r] * data_.labels[r];
      }
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const double y = data_.labels[rows[i]];
        ls += y;
        lss += y * y;
        rs -= y;
        rss -= y * y;
        const std::size_t nl = i + 1, nr = m - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        if (col[rows[i]] == col[rows[i + 1]]) continue;
        const double imp = (lss - ls * ls / static_cast<double>(nl)) + (rss - rs * rs / static_cast<double>(nr));
        const double gain = parent - imp;
        if (gain > best.gain + 1e-12) best = {gain, f, 0.5 * (col[rows[i]] + col[rows[i + 1]]), true};
      }
    }
    return best;
  }

  double impurity(const std::vector<std::size_t>& rows) const {
    const auto m = static_cast<double>(rows.size());
    if (classification_) {
      std::vector<double> counts(n_classes_, 0.0);
      for (auto r : rows) counts[static_cast<std::size_t>(data_.labels[r])] += 1.0;
      double sq = 0.0;
      for (double c : counts) sq += c * c;
      return m - sq / m;
    }
    double s = 0.0, ss = 0.0;
    for (auto r : rows) {
      s += data_.labels[r];
      ss += data_.labels[r] * data_.labels[r];
    }
    return ss - s * s / m;
  }

  void grow(CartTree& tree, std::size_t node, std::vector<std::size_t>& rows, int depth) {
    tree.nodes[node].value = leaf_value(rows);
    if (depth >= params_.max_depth || rows.size() < 2 * static_cast<std::size_t>(params_.min_leaf) || pure(rows))
      return;

    // Partial Fisher-Yates: the first mtry entries are the candidates.
    std::vector<std::size_t> cand = features_;
    for (std::size_t i = 0; i < mtry_; ++i) {
      const auto j = i + static_cast<std::size_t>(rng_.below(cand.size() - i));
      std::swap(cand[i], cand[j]);
    }
    const double parent = impurity(rows);
    Split best;
    for (std::size_t i = 0; i < mtry_; ++i) {
      const auto s = best_split_on(cand[i], rows, parent);
      if (s.found && (!best.found || s.gain > best.gain)) best = s;
    }
    if (!best.found) return;

    std::vector<std::size_t> left, right;
    const auto& col = data_.columns[best.feature];
    for (auto r : rows) (col[r] <= best.threshold ? left : right).push_back(r);
    const auto l = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    tree.nodes[node].feature = static_cast<int>(best.feature);
    tree.nodes[node].threshold = best.threshold;
    tree.nodes[node].left = static_cast<int>(l);
    tree.nodes[node].right = static_cast<int>(l + 1);
    grow(tree, l, left, depth + 1);
    grow(tree, l + 1, right, depth + 1);
  }

  const FeatureTable& data_;
  const std::vector<std::size_t>& features_;
  ForestParams params_;
  Rng& rng_;
  bool classification_ = true;
  std::size_t n_classes_ = 1;
  std::size_t mtry_ = 1;
};

}  // namespace detail

// Bagged CART ensemble on the masked features of `train`. Each tree draws a
// bootstrap of m rows from its own seed derived from `seed`.
inline ForestModel train_forest(const FeatureTable& train, const Mask& mask, const ForestParams& params,
                                std::uint64_t seed) {
  if (mask.size() != train.n_features()) throw InputError("mask length does not match feature count");
  if (train.n_rows() < 2) throw InputError("forest needs at least 2 training rows");
  if (params.n_trees < 1 || params.max_depth < 0 || params.min_leaf < 1)
    throw InputError("invalid forest parameters");

  ForestModel model;
  model.task_kind = train.task_kind;
  model.num_classes = train.num_classes;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j]) model.features.push_back(j);
  }
  if (model.features.empty()) throw InputError("forest needs at least one selected feature");

  model.constant_input = std::all_of(model.features.begin(), model.features.end(), [&](std::size_t j) {
    const auto& c = train.columns[j];
    return std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); });
  });

  const std::size_t m = train.n_rows();
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, {0xf0e57ULL, static_cast<std::uint64_t>(t)}));
    std::vector<std::size_t> bag(m);
    for (auto& r : bag) r = static_cast<std::size_t>(rng.below(m));
    model.bag_sizes.push_back(bag.size());
    detail::CartBuilder builder(train, model.features, params, rng);
    model.trees.push_back(builder.build(std::move(bag)));
  }
  return model;
}

// Scores the model on `valid` with the given metric.
inline double score(const ForestModel& model, const FeatureTable& valid, MetricKind metric) {
  if (!metric_supports(metric, valid.task_kind))
    throw InputError("metric " + to_string(metric) + " does not apply to " + to_string(valid.task_kind));
  const auto pred = model.predict(valid);
  return compute_metric(metric, valid.labels, pred);
}

inline double score(const ForestModel& model, const FeatureTable& valid, const Mask& mask, MetricKind metric) {
  if (mask.size() != valid.n_features()) throw InputError("mask length does not match feature count");
  for (std::size_t j : model.features) {
    if (!mask[j]) throw InputError("model uses a feature outside the scoring mask");
  }
  return score(model, valid, metric);
}

}  // namespace hrlfs
