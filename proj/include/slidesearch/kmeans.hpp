#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace slidesearch {

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // max centroid movement (Euclidean)
};

struct KMeansResult {
  // Cluster id per point, compacted to 0..clusters-1 after empty clusters
  // are dropped. Ids are ordered by the centroid's seeding order.
  std::vector<std::size_t> assignment;
  std::vector<double> centroids;  // clusters x dim, row-major
  std::size_t clusters = 0;
  int iterations = 0;
  // Within-cluster sum of squares after each assignment step.
  std::vector<double> objective;
};

// Lloyd's algorithm with k-means++ seeding. Points are row-major, `dim`
// columns. When n <= k every point becomes its own cluster. Seeding stops
// early once all remaining points coincide with a chosen centre, so
// duplicate data yields fewer clusters. Empty clusters are dropped, never
// re-seeded. Deterministic for a fixed seed.
KMeansResult kmeans(std::span<const double> points, std::size_t dim,
                    std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace slidesearch
