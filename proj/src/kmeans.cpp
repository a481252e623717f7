#include "slidesearch/kmeans.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "slidesearch/seed.hpp"

namespace slidesearch {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

namespace {

std::vector<double> seed_plus_plus(std::span<const double> points,
                                   std::size_t dim, std::size_t n,
                                   std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> centroids;
  centroids.reserve(k * dim);
  auto row = [&](std::size_t i) { return points.subspan(i * dim, dim); };

  const std::size_t first = static_cast<std::size_t>(uniform01(rng) * n);
  centroids.insert(centroids.end(), row(first).begin(), row(first).end());

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(row(i), row(first));

  while (centroids.size() / dim < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (total <= 0.0) break;  // every point already coincides with a centre
    const double target = uniform01(rng) * total;
    double cum = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      cum += d2[i];
      pick = i;
      if (cum > target) break;
    }
    centroids.insert(centroids.end(), row(pick).begin(), row(pick).end());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(row(i), row(pick)));
    }
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const double> points, std::size_t dim,
                    std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  KMeansResult result;
  const std::size_t n = dim ? points.size() / dim : 0;
  if (n == 0 || k == 0) return result;
  auto row = [&](std::size_t i) { return points.subspan(i * dim, dim); };

  if (n <= k) {
    result.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.assignment[i] = i;
    result.centroids.assign(points.begin(), points.end());
    result.clusters = n;
    result.objective.push_back(0.0);
    return result;
  }

  std::vector<double> centroids = seed_plus_plus(points, dim, n, k, seed);
  std::vector<std::size_t> assign(n, 0);
  std::vector<double> sums;
  std::vector<std::size_t> counts;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const std::size_t c = centroids.size() / dim;
    const auto cent = [&](std::size_t j) {
      return std::span<const double>(centroids).subspan(j * dim, dim);
    };
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const double d = squared_distance(row(i), cent(j));
        if (d < best) {
          best = d;
          best_j = j;
        }
      }
      assign[i] = best_j;
      wcss += best;
    }
    result.objective.push_back(wcss);
    result.iterations = iter + 1;

    sums.assign(c * dim, 0.0);
    counts.assign(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t t = 0; t < dim; ++t) sums[assign[i] * dim + t] += row(i)[t];
    }
    std::vector<double> next;
    std::vector<std::size_t> remap(c, 0);
    next.reserve(c * dim);
    double moved = 0.0;
    bool dropped = false;
    for (std::size_t j = 0; j < c; ++j) {
      if (counts[j] == 0) {
        dropped = true;
        continue;
      }
      remap[j] = next.size() / dim;
      double shift = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        const double m = sums[j * dim + t] / static_cast<double>(counts[j]);
        const double delta = m - centroids[j * dim + t];
        shift += delta * delta;
        next.push_back(m);
      }
      moved = std::max(moved, std::sqrt(shift));
    }
    centroids = std::move(next);
    if (dropped) {
      for (auto& a : assign) a = remap[a];
    }
    if (!dropped && moved < options.tolerance) break;
  }

  result.assignment = std::move(assign);
  result.centroids = std::move(centroids);
  result.clusters = result.centroids.size() / dim;
  return result;
}

}  // namespace slidesearch
