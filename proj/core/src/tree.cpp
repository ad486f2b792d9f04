#include "vipcop/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "vipcop/error.hpp"

namespace vipcop {

namespace {

double impurity(std::span<const std::size_t> counts, std::size_t total,
                TreeOptions::Criterion criterion) {
  if (total == 0) return 0.0;
  const double t = static_cast<double>(total);
  double v = criterion == TreeOptions::Criterion::kGini ? 1.0 : 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / t;
    if (criterion == TreeOptions::Criterion::kGini) {
      v -= p * p;
    } else {
      v -= p * std::log2(p);
    }
  }
  return v;
}

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best threshold on one feature, or nullopt if no admissible split.
std::optional<Split> best_split_on(const Table& train, std::span<const std::size_t> rows,
                                   std::size_t feature, double parent,
                                   const TreeOptions& options) {
  const std::size_t m = rows.size();
  const std::size_t k = train.class_count();
  std::vector<std::pair<double, Label>> sorted(m);
  for (std::size_t i = 0; i < m; ++i) sorted[i] = {train.at(rows[i], feature), train.label(rows[i])};
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> left(k, 0);
  std::vector<std::size_t> right(k, 0);
  for (const auto& s : sorted) ++right[s.second];
  std::optional<Split> best;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    ++left[sorted[i].second];
    --right[sorted[i].second];
    if (sorted[i].first == sorted[i + 1].first) continue;
    const std::size_t nl = i + 1;
    const std::size_t nr = m - nl;
    if (nl < options.min_leaf || nr < options.min_leaf) continue;
    const double child = (static_cast<double>(nl) * impurity(left, nl, options.criterion) +
                          static_cast<double>(nr) * impurity(right, nr, options.criterion)) /
                         static_cast<double>(m);
    const double gain = parent - child;
    if (!best || gain > best->gain + 1e-15) {
      best = Split{feature, 0.5 * (sorted[i].first + sorted[i + 1].first), gain};
    }
  }
  return best;
}

}  // namespace

DecisionTree::DecisionTree(const Table& train, std::span<const std::size_t> features,
                           const TreeOptions& options, Stream* rng) {
  if (options.min_leaf < 1) throw ConfigError("tree: min_leaf must be at least 1");
  if (options.top_splits < 1) throw ConfigError("tree: top_splits must be at least 1");
  if (options.top_splits > 1 && rng == nullptr) throw ConfigError("tree: random splits need an rng");
  for (std::size_t f : features) {
    if (f >= train.cols()) throw ConfigError("tree: feature index out of range");
  }
  grow(train, features, options, rng);
}

void DecisionTree::grow(const Table& train, std::span<const std::size_t> features,
                        const TreeOptions& options, Stream* rng) {
  nodes_.clear();
  TreeNode root;
  root.rows = iota_indices(train.rows());
  nodes_.push_back(std::move(root));
  std::deque<std::size_t> queue{0};
  while (!queue.empty()) {
    const std::size_t id = queue.front();
    queue.pop_front();
    const std::vector<std::size_t> rows = nodes_[id].rows;
    const std::size_t depth = nodes_[id].depth;
    if (depth >= options.max_depth || rows.size() < 2 * options.min_leaf) continue;
    std::vector<std::size_t> counts(train.class_count(), 0);
    for (std::size_t r : rows) ++counts[train.label(r)];
    const double parent = impurity(counts, rows.size(), options.criterion);
    if (parent <= 0.0) continue;

    std::vector<Split> candidates;
    for (std::size_t f : features) {
      auto s = best_split_on(train, rows, f, parent, options);
      if (s && s->gain > 1e-12) candidates.push_back(*s);
    }
    if (candidates.empty()) continue;
    std::stable_sort(candidates.begin(), candidates.end(), [](const Split& a, const Split& b) {
      return a.gain > b.gain + 1e-15 || (std::abs(a.gain - b.gain) <= 1e-15 && a.feature < b.feature);
    });
    const std::size_t pool = std::min(options.top_splits, candidates.size());
    const Split chosen = pool == 1 ? candidates.front() : candidates[rng->index(pool)];

    TreeNode left;
    TreeNode right;
    left.depth = right.depth = depth + 1;
    for (std::size_t r : rows) {
      (train.at(r, chosen.feature) <= chosen.threshold ? left.rows : right.rows).push_back(r);
    }
    nodes_[id].feature = chosen.feature;
    nodes_[id].threshold = chosen.threshold;
    nodes_[id].rows.clear();
    nodes_[id].left = nodes_.size();
    nodes_.push_back(std::move(left));
    nodes_[id].right = nodes_.size();
    nodes_.push_back(std::move(right));
    queue.push_back(*nodes_[id].left);
    queue.push_back(*nodes_[id].right);
  }
}

std::vector<std::size_t> DecisionTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf()) out.push_back(i);
  }
  return out;
}

std::size_t DecisionTree::route(std::span<const double> row) const {
  std::size_t id = 0;
  while (!nodes_[id].is_leaf()) {
    const auto& node = nodes_[id];
    id = row[node.feature] <= node.threshold ? *node.left : *node.right;
  }
  return id;
}

std::vector<std::size_t> DecisionTree::split_features(std::size_t limit) const {
  // Nodes are appended breadth-first, so index order is level order.
  std::vector<std::size_t> out;
  std::set<std::size_t> seen;
  for (const auto& node : nodes_) {
    if (out.size() >= limit) break;
    if (node.is_leaf()) continue;
    if (seen.insert(node.feature).second) out.push_back(node.feature);
  }
  return out;
}

}  // namespace vipcop
