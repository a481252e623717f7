#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slidesearch/cohort.hpp"
#include "slidesearch/features.hpp"

namespace slidesearch {

struct Mosaic {
  std::string slide_id;
  std::vector<std::size_t> selected_indices;  // sorted ascending
  double rate = 1.0;
};

// Per-patch bookkeeping from the two clustering rounds, for inspection and
// tests. spatial_cluster ids are local to their chromatic cluster.
struct MosaicTrace {
  std::vector<std::size_t> chromatic_cluster;
  std::vector<std::size_t> spatial_cluster;
  // For each chromatic cluster (by id), spatial centroids row-major (x, y).
  std::vector<std::vector<double>> spatial_centroids;
};

inline constexpr std::size_t kDefaultChromaticClusters = 9;

// max(1, round-half-away(m * rate))
std::size_t selection_count(std::size_t m, double rate);

// k-means over the chromatic descriptors (first three embedding dims when
// the block has none).
std::vector<std::size_t> chromatic_cluster(const FeatureBlock& patches,
                                           std::size_t k, std::uint64_t seed);

// Within each chromatic cluster of size m, k-means on grid coordinates with
// selection_count(m, rate) clusters; picks the patch nearest each spatial
// centroid (lowest row index on ties). If clustering collapses below the
// target count, the remaining members closest to their centroids fill the
// gap so the per-cluster count is exact.
Mosaic spatial_sample(const FeatureBlock& patches,
                      const std::vector<std::size_t>& assignment, double rate,
                      std::uint64_t seed, MosaicTrace* trace = nullptr);

Mosaic build_mosaic(const std::string& slide_id, const FeatureBlock& patches,
                    double rate, std::size_t k_chroma, std::uint64_t seed,
                    MosaicTrace* trace = nullptr);

// Reads the slide's patch features and builds its mosaic. Throws DataError
// ("empty slide") when the block has no rows.
Mosaic build_mosaic(const SlideRecord& slide, double rate,
                    std::size_t k_chroma, std::uint64_t seed);

// One mosaic per slide, OpenMP-parallel across slides. Each slide's seed is
// derive_seed(seed, "mosaic", slide_id). Output order follows `slides`.
std::vector<Mosaic> build_mosaics(const std::vector<SlideRecord>& slides,
                                  double rate, std::size_t k_chroma,
                                  std::uint64_t seed);
std::vector<Mosaic> build_mosaics_serial(const std::vector<SlideRecord>& slides,
                                         double rate, std::size_t k_chroma,
                                         std::uint64_t seed);

// CSV `slide_id,row_index`.
void write_mosaic(const std::filesystem::path& path, const Mosaic& mosaic);
Mosaic read_mosaic(const std::filesystem::path& path);

}  // namespace slidesearch
