#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vipcop/rng.hpp"

namespace vipcop {

// Points are row-major: count rows of `dim` coordinates.
struct PointSet {
  std::span<const double> values;
  std::size_t count = 0;
  std::size_t dim = 0;

  std::span<const double> point(std::size_t i) const { return values.subspan(i * dim, dim); }
};

struct KMeansResult {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
  // Stop once no centroid moves farther than this (Euclidean).
  double tolerance = 1e-6;
};

// Lloyd's algorithm from k-means++ seeding. An empty cluster is re-seeded
// with the point farthest from its centroid.
KMeansResult kmeans(const PointSet& points, std::size_t k, Stream& rng,
                    const KMeansOptions& options = {});

// For each centroid in order, the nearest point not picked by an earlier
// centroid (ties: lower index). Returned in centroid order.
std::vector<std::size_t> nearest_unique(const PointSet& points, const KMeansResult& fit);

}  // namespace vipcop
