#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vipcop/rng.hpp"
#include "vipcop/table.hpp"

namespace vipcop {

struct TreeNode {
  // Internal nodes: rows with value <= threshold go left.
  std::size_t feature = 0;
  double threshold = 0.0;
  std::optional<std::size_t> left;
  std::optional<std::size_t> right;
  std::size_t depth = 0;
  // Leaves: the training rows routed here, ascending.
  std::vector<std::size_t> rows;

  bool is_leaf() const { return !left.has_value(); }
};

struct TreeOptions {
  std::size_t min_leaf = 1;
  std::size_t max_depth = 1000;
  enum class Criterion { kGini, kEntropy } criterion = Criterion::kGini;
  // 1: deterministic best split. Larger: pick uniformly among the best split
  // of each of the top-ranked features (needs an rng).
  std::size_t top_splits = 1;
};

// Axis-aligned classification tree. Candidate thresholds are midpoints of
// consecutive distinct values; a node splits only when the best split has
// positive impurity decrease and both children keep min_leaf rows. Ties go to
// the lower feature, then the lower threshold.
class DecisionTree {
 public:
  DecisionTree(const Table& train, std::span<const std::size_t> features,
               const TreeOptions& options, Stream* rng = nullptr);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::vector<std::size_t> leaves() const;
  std::size_t leaf_count() const { return leaves().size(); }

  // Node index of the leaf `row` (full feature universe) lands in.
  std::size_t route(std::span<const double> row) const;

  // Distinct split features in breadth-first order, at most `limit`.
  std::vector<std::size_t> split_features(std::size_t limit) const;

 private:
  void grow(const Table& train, std::span<const std::size_t> features,
            const TreeOptions& options, Stream* rng);

  std::vector<TreeNode> nodes_;
};

}  // namespace vipcop
