#include "vipcop/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vipcop/error.hpp"

namespace vipcop {

namespace {

double sq_dist(std::span<const double> a, const double* b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace

KMeansResult kmeans(const PointSet& points, std::size_t k, Stream& rng,
                    const KMeansOptions& options) {
  const std::size_t n = points.count;
  const std::size_t dim = points.dim;
  if (points.values.size() != n * dim) throw ConfigError("kmeans: point buffer size mismatch");
  if (k < 1 || k > n) {
    throw ConfigError("kmeans: k=" + std::to_string(k) + " with " + std::to_string(n) +
                      " points");
  }
  KMeansResult fit;
  fit.k = k;
  fit.dim = dim;
  fit.centroids.assign(k * dim, 0.0);
  fit.assignment.assign(n, 0);

  // k-means++ seeding.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.index(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pick = first;
    if (c > 0) {
      double total = 0.0;
      for (double v : nearest) total += v;
      if (total > 0.0) {
        double target = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          target -= nearest[i];
          if (target < 0.0) {
            pick = i;
            break;
          }
        }
        // Never land on a zero-weight point through rounding.
        while (nearest[pick] == 0.0 && pick > 0) --pick;
      } else {
        pick = rng.index(n);
      }
    }
    auto p = points.point(pick);
    std::copy(p.begin(), p.end(), fit.centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(points.point(i), fit.centroids.data() + c * dim));
    }
  }

  std::vector<double> sums(k * dim);
  std::vector<std::size_t> sizes(k);
  std::vector<double> best_d(n);
  for (fit.iterations = 0; fit.iterations < options.max_iterations;) {
    for (std::size_t i = 0; i < n; ++i) {
      auto p = points.point(i);
      std::size_t arg = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(p, fit.centroids.data() + c * dim);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      fit.assignment[i] = arg;
      best_d[i] = best;
    }
    ++fit.iterations;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto p = points.point(i);
      double* s = sums.data() + fit.assignment[i] * dim;
      for (std::size_t j = 0; j < dim; ++j) s[j] += p[j];
      ++sizes[fit.assignment[i]];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double* centroid = fit.centroids.data() + c * dim;
      std::vector<double> next(dim);
      if (sizes[c] == 0) {
        const auto far = static_cast<std::size_t>(
            std::max_element(best_d.begin(), best_d.end()) - best_d.begin());
        auto p = points.point(far);
        std::copy(p.begin(), p.end(), next.begin());
        best_d[far] = 0.0;
      } else {
        for (std::size_t j = 0; j < dim; ++j) {
          next[j] = sums[c * dim + j] / static_cast<double>(sizes[c]);
        }
      }
      shift = std::max(shift, std::sqrt(sq_dist(next, centroid)));
      std::copy(next.begin(), next.end(), centroid);
    }
    if (shift <= options.tolerance) break;
  }
  fit.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = points.point(i);
    std::size_t arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = sq_dist(p, fit.centroids.data() + c * dim);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    fit.assignment[i] = arg;
    fit.inertia += best;
  }
  return fit;
}

std::vector<std::size_t> nearest_unique(const PointSet& points, const KMeansResult& fit) {
  if (fit.dim != points.dim) throw ConfigError("nearest_unique: dimension mismatch");
  if (fit.k > points.count) throw ConfigError("nearest_unique: more centroids than points");
  std::vector<std::uint8_t> taken(points.count, 0);
  std::vector<std::size_t> out;
  out.reserve(fit.k);
  for (std::size_t c = 0; c < fit.k; ++c) {
    std::size_t arg = points.count;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.count; ++i) {
      if (taken[i]) continue;
      const double d = sq_dist(points.point(i), fit.centroids.data() + c * fit.dim);
      if (d < best) {
        best = d;
        arg = i;
      }
    }
    taken[arg] = 1;
    out.push_back(arg);
  }
  return out;
}

}  // namespace vipcop
