#include "slidesearch/mosaic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "slidesearch/csv.hpp"
#include "slidesearch/error.hpp"
#include "slidesearch/kmeans.hpp"
#include "slidesearch/seed.hpp"

namespace slidesearch {

std::size_t selection_count(std::size_t m, double rate) {
  const double target = std::round(static_cast<double>(m) * rate);
  return std::max<std::size_t>(1, static_cast<std::size_t>(target));
}

std::vector<std::size_t> chromatic_cluster(const FeatureBlock& patches,
                                           std::size_t k, std::uint64_t seed) {
  std::vector<double> points;
  points.reserve(patches.rows() * 3);
  for (std::size_t r = 0; r < patches.rows(); ++r) {
    for (float v : patches.chromatic_or_embedding(r)) points.push_back(v);
  }
  return kmeans(points, 3, k, seed).assignment;
}

Mosaic spatial_sample(const FeatureBlock& patches,
                      const std::vector<std::size_t>& assignment, double rate,
                      std::uint64_t seed, MosaicTrace* trace) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ConfigError("sampling rate must be in (0, 1]");
  }
  if (assignment.size() != patches.rows()) {
    throw DataError("spatial_sample: assignment size does not match patches");
  }
  std::size_t clusters = 0;
  for (auto a : assignment) clusters = std::max(clusters, a + 1);
  std::vector<std::vector<std::size_t>> members(clusters);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    members[assignment[i]].push_back(i);
  }

  if (trace) {
    trace->chromatic_cluster = assignment;
    trace->spatial_cluster.assign(patches.rows(), 0);
    trace->spatial_centroids.assign(clusters, {});
  }

  Mosaic mosaic;
  mosaic.rate = rate;
  for (std::size_t c = 0; c < clusters; ++c) {
    const auto& idx = members[c];
    if (idx.empty()) continue;
    const std::size_t target = selection_count(idx.size(), rate);
    std::vector<double> xy;
    xy.reserve(idx.size() * 2);
    for (auto i : idx) {
      const auto p = patches.coords(i);
      xy.push_back(p[0]);
      xy.push_back(p[1]);
    }
    const KMeansResult km = kmeans(xy, 2, target, derive_seed(seed, "spatial", c));

    // Nearest member to each centroid; ties to the lowest row index (members
    // are in ascending row order).
    std::vector<double> best(km.clusters, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> pick(km.clusters, 0);
    std::vector<double> own_dist(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
      const std::size_t s = km.assignment[t];
      const double d = squared_distance(
          std::span<const double>(xy).subspan(t * 2, 2),
          std::span<const double>(km.centroids).subspan(s * 2, 2));
      own_dist[t] = d;
      if (d < best[s]) {
        best[s] = d;
        pick[s] = t;
      }
    }
    std::vector<bool> chosen(idx.size(), false);
    for (auto t : pick) chosen[t] = true;
    std::size_t have = km.clusters;
    if (have < target) {
      std::vector<std::size_t> rest;
      for (std::size_t t = 0; t < idx.size(); ++t) {
        if (!chosen[t]) rest.push_back(t);
      }
      std::stable_sort(rest.begin(), rest.end(), [&](auto a, auto b) {
        return own_dist[a] < own_dist[b];
      });
      for (std::size_t r = 0; r < rest.size() && have < target; ++r, ++have) {
        chosen[rest[r]] = true;
      }
    }
    for (std::size_t t = 0; t < idx.size(); ++t) {
      if (chosen[t]) mosaic.selected_indices.push_back(idx[t]);
    }
    if (trace) {
      for (std::size_t t = 0; t < idx.size(); ++t) {
        trace->spatial_cluster[idx[t]] = km.assignment[t];
      }
      trace->spatial_centroids[c] = km.centroids;
    }
  }
  std::sort(mosaic.selected_indices.begin(), mosaic.selected_indices.end());
  return mosaic;
}

Mosaic build_mosaic(const std::string& slide_id, const FeatureBlock& patches,
                    double rate, std::size_t k_chroma, std::uint64_t seed,
                    MosaicTrace* trace) {
  if (patches.rows() == 0) throw DataError("empty slide: " + slide_id);
  if (k_chroma == 0) throw ConfigError("k_chroma must be at least 1");
  const auto assignment =
      chromatic_cluster(patches, k_chroma, derive_seed(seed, "chromatic"));
  Mosaic m = spatial_sample(patches, assignment, rate, seed, trace);
  m.slide_id = slide_id;
  return m;
}

Mosaic build_mosaic(const SlideRecord& slide, double rate, std::size_t k_chroma,
                    std::uint64_t seed) {
  return build_mosaic(slide.slide_id, read_feature_file(slide.patch_features),
                      rate, k_chroma, seed);
}

namespace {

Mosaic mosaic_for(const SlideRecord& s, double rate, std::size_t k_chroma,
                  std::uint64_t seed) {
  try {
    return build_mosaic(s, rate, k_chroma, derive_seed(seed, "mosaic", s.slide_id));
  } catch (const DataError& e) {
    throw DataError("mosaic stage, slide '" + s.slide_id + "': " + e.what());
  }
}

}  // namespace

std::vector<Mosaic> build_mosaics(const std::vector<SlideRecord>& slides,
                                  double rate, std::size_t k_chroma,
                                  std::uint64_t seed) {
  std::vector<Mosaic> out(slides.size());
  std::string error;
  const auto n = static_cast<std::ptrdiff_t>(slides.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = mosaic_for(slides[i], rate, k_chroma, seed);
    } catch (const std::exception& e) {
#pragma omp critical(mosaic_error)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw DataError(error);
  return out;
}

std::vector<Mosaic> build_mosaics_serial(const std::vector<SlideRecord>& slides,
                                         double rate, std::size_t k_chroma,
                                         std::uint64_t seed) {
  std::vector<Mosaic> out;
  out.reserve(slides.size());
  for (const auto& s : slides) out.push_back(mosaic_for(s, rate, k_chroma, seed));
  return out;
}

void write_mosaic(const std::filesystem::path& path, const Mosaic& mosaic) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write mosaic " + path.string());
  out << "slide_id,row_index\n";
  for (auto i : mosaic.selected_indices) {
    csv::write_record(out, {mosaic.slide_id, std::to_string(i)});
  }
}

Mosaic read_mosaic(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path.string());
  const auto sc = t.column("slide_id");
  const auto rc = t.column("row_index");
  Mosaic m;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (m.slide_id.empty()) {
      m.slide_id = row[sc];
    } else if (row[sc] != m.slide_id) {
      throw DataError(path.string() + ":" + std::to_string(t.line_numbers[i]) +
                      ": mixed slide ids in one mosaic file");
    }
    m.selected_indices.push_back(static_cast<std::size_t>(csv::parse_int(row[rc])));
  }
  std::sort(m.selected_indices.begin(), m.selected_indices.end());
  if (std::adjacent_find(m.selected_indices.begin(), m.selected_indices.end()) !=
      m.selected_indices.end()) {
    throw DataError(path.string() + ": duplicate row index");
  }
  m.rate = 0.0;  // not stored on disk
  return m;
}

}  // namespace slidesearch
