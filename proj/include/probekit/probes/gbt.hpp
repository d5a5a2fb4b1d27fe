#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "probekit/error.hpp"
#include "probekit/matrix.hpp"

namespace probekit {

struct GbtConfig {
  int rounds = 300;
  int max_depth = 3;
  double learning_rate = 0.1;
  Index min_samples_leaf = 1;

  void validate() const {
    if (rounds < 0 || max_depth < 0 || !(learning_rate > 0.0 && learning_rate <= 1.0) || min_samples_leaf < 1)
      throw Error(ErrorCode::InvalidConfig, "gbt: rounds >= 0, depth >= 0, learning_rate in (0, 1]");
  }
};

/// Axis-aligned regression tree; rows with x[feature] <= threshold go left.
struct RegressionTree {
  struct Node {
    Index feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    int depth = 0;
  };
  std::vector<Node> nodes;

  double predict_row(const Matrix& x, Index r) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x(r, n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  int depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
  }
};

struct GbtModel {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  double base_prediction = 0.0;
  std::vector<double> train_loss;  // mean squared error after each round, starting with the base

  Vector predict(const Matrix& x) const {
    Vector out = Vector::Constant(x.rows(), base_prediction);
    for (const auto& t : trees)
      for (Index r = 0; r < x.rows(); ++r) out(r) += learning_rate * t.predict_row(x, r);
    return out;
  }
};

namespace detail {

/// Grows one least-squares tree level by level using pre-sorted feature orders.
inline RegressionTree grow_tree(const Matrix& x, const Vector& target, const std::vector<std::vector<Index>>& order,
                                const GbtConfig& cfg) {
  const Index n = x.rows();
  RegressionTree tree;
  tree.nodes.push_back({});
  std::vector<int> node_of(static_cast<std::size_t>(n), 0);

  struct Stats {
    double sum = 0.0;
    Index count = 0;
  };
  std::vector<int> frontier{0};
  for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
    // Totals per frontier node.
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
    std::vector<Stats> total(frontier.size());
    for (Index r = 0; r < n; ++r) {
      const int s = slot[static_cast<std::size_t>(node_of[static_cast<std::size_t>(r)])];
      if (s < 0) continue;
      total[static_cast<std::size_t>(s)].sum += target(r);
      ++total[static_cast<std::size_t>(s)].count;
    }

    struct Best {
      double gain = 1e-12;
      Index feature = -1;
      double threshold = 0.0;
    };
    std::vector<Best> best(frontier.size());
    std::vector<Stats> left(frontier.size());
    std::vector<double> last(frontier.size());
    for (Index f = 0; f < x.cols(); ++f) {
      std::fill(left.begin(), left.end(), Stats{});
      for (Index r : order[static_cast<std::size_t>(f)]) {
        const int s = slot[static_cast<std::size_t>(node_of[static_cast<std::size_t>(r)])];
        if (s < 0) continue;
        const auto si = static_cast<std::size_t>(s);
        const double v = x(r, f);
        auto& l = left[si];
        const auto& t = total[si];
        if (l.count >= cfg.min_samples_leaf && v > last[si] && t.count - l.count >= cfg.min_samples_leaf) {
          const double rs = t.sum - l.sum;
          const auto rc = static_cast<double>(t.count - l.count);
          const double gain = l.sum * l.sum / static_cast<double>(l.count) + rs * rs / rc -
                              t.sum * t.sum / static_cast<double>(t.count);
          if (gain > best[si].gain) best[si] = {gain, f, 0.5 * (last[si] + v)};
        }
        l.sum += target(r);
        ++l.count;
        last[si] = v;
      }
    }

    std::vector<int> next;
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      const int id = frontier[s];
      tree.nodes[static_cast<std::size_t>(id)].value =
          total[s].count ? total[s].sum / static_cast<double>(total[s].count) : 0.0;
      if (best[s].feature < 0) continue;
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      auto& node = tree.nodes[static_cast<std::size_t>(id)];
      node.feature = best[s].feature;
      node.threshold = best[s].threshold;
      node.left = l;
      node.right = l + 1;
      tree.nodes[static_cast<std::size_t>(l)].depth = depth + 1;
      tree.nodes[static_cast<std::size_t>(l + 1)].depth = depth + 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (Index r = 0; r < n; ++r) {
      auto& id = node_of[static_cast<std::size_t>(r)];
      const auto& node = tree.nodes[static_cast<std::size_t>(id)];
      if (node.feature >= 0) id = x(r, node.feature) <= node.threshold ? node.left : node.right;
    }
    frontier = std::move(next);
  }

  // Leaf values for the last level (and any node never split).
  std::vector<Stats> leaf(tree.nodes.size());
  for (Index r = 0; r < n; ++r) {
    auto& st = leaf[static_cast<std::size_t>(node_of[static_cast<std::size_t>(r)])];
    st.sum += target(r);
    ++st.count;
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    if (tree.nodes[i].feature < 0 && leaf[i].count > 0) tree.nodes[i].value = leaf[i].sum / static_cast<double>(leaf[i].count);
  return tree;
}

}  // namespace detail

/// Least-squares gradient boosting: base = mean(y), each round fits a tree to the residuals.
inline GbtModel gbt_fit(const Matrix& x, const Vector& y, const GbtConfig& cfg = {}) {
  cfg.validate();
  if (x.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "gbt: X and y lengths differ");
  if (x.rows() < 2) throw Error(ErrorCode::TooFewRows, "gbt needs at least 2 rows");
  const Index n = x.rows();

  std::vector<std::vector<Index>> order(static_cast<std::size_t>(x.cols()));
  for (Index f = 0; f < x.cols(); ++f) {
    auto& o = order[static_cast<std::size_t>(f)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), Index{0});
    std::stable_sort(o.begin(), o.end(), [&](Index a, Index b) { return x(a, f) < x(b, f); });
  }

  GbtModel model;
  model.learning_rate = cfg.learning_rate;
  model.base_prediction = y.mean();
  Vector pred = Vector::Constant(n, model.base_prediction);
  model.train_loss.push_back((y - pred).squaredNorm() / static_cast<double>(n));
  for (int round = 0; round < cfg.rounds; ++round) {
    const Vector residual = y - pred;
    auto tree = detail::grow_tree(x, residual, order, cfg);
    for (Index r = 0; r < n; ++r) pred(r) += cfg.learning_rate * tree.predict_row(x, r);
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back((y - pred).squaredNorm() / static_cast<double>(n));
  }
  return model;
}

/// The inflating probe: boosted trees fit on train rows, predictions for test rows.
inline Vector gbt_probe(const Matrix& x_train, const Vector& y_train, const Matrix& x_test, const GbtConfig& cfg = {}) {
  if (x_train.rows() < 20) throw Error(ErrorCode::TooFewRows, "gbt_probe needs at least 20 training rows");
  if (x_test.cols() != x_train.cols()) throw Error(ErrorCode::DimensionMismatch, "gbt_probe column count");
  return gbt_fit(x_train, y_train, cfg).predict(x_test);
}

}  // namespace probekit
