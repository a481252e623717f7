#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "slidesearch/error.hpp"
#include "slidesearch/kmeans.hpp"
#include "slidesearch/mosaic.hpp"
#include "test_util.hpp"

namespace slidesearch {
namespace {

double wcss(const std::vector<double>& pts, std::size_t dim,
            const std::vector<std::size_t>& assign) {
  std::size_t k = 0;
  for (auto a : assign) k = std::max(k, a + 1);
  std::vector<double> sum(k * dim, 0.0);
  std::vector<double> cnt(k, 0.0);
  for (std::size_t i = 0; i < assign.size(); ++i) {
    cnt[assign[i]] += 1;
    for (std::size_t j = 0; j < dim; ++j) sum[assign[i] * dim + j] += pts[i * dim + j];
  }
  double total = 0;
  for (std::size_t i = 0; i < assign.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double c = sum[assign[i] * dim + j] / cnt[assign[i]];
      total += (pts[i * dim + j] - c) * (pts[i * dim + j] - c);
    }
  }
  return total;
}

TEST(KMeans, SinglePointWithManyClusters) {
  const std::vector<double> p = {1.0, 2.0, 3.0};
  const auto r = kmeans(p, 3, 9, 1);
  EXPECT_EQ(r.clusters, 1u);
  EXPECT_EQ(r.assignment, std::vector<std::size_t>{0});
}

TEST(KMeans, IdenticalPointsCollapse) {
  const std::vector<double> p(30, 0.5);  // 10 points in 3-D
  const auto r = kmeans(p, 3, 4, 9);
  EXPECT_EQ(r.clusters, 1u);
  for (auto a : r.assignment) EXPECT_EQ(a, 0u);
}

TEST(KMeans, TwoBlobsMatchBruteForcePartition) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + trial % 7;  // 6..12 points
    std::vector<double> p;
    for (std::size_t i = 0; i < n; ++i) {
      const double cx = i % 2 ? 10.0 : 0.0;
      p.push_back(cx + noise(rng));
      p.push_back(noise(rng));
    }
    // Brute force: best 2-partition over all labelings.
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
      std::vector<std::size_t> a(n);
      for (std::size_t i = 0; i < n; ++i) a[i] = (mask >> i) & 1u;
      best = std::min(best, wcss(p, 2, a));
    }
    const auto r = kmeans(p, 2, 2, 100 + trial);
    ASSERT_EQ(r.clusters, 2u);
    EXPECT_NEAR(wcss(p, 2, r.assignment), best, 1e-9);
  }
}

TEST(KMeans, ObjectiveNeverIncreases) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> p(200 * 3);
    for (auto& v : p) v = u(rng);
    const auto r = kmeans(p, 3, 9, trial);
    ASSERT_FALSE(r.objective.empty());
    for (std::size_t i = 1; i < r.objective.size(); ++i) {
      EXPECT_LE(r.objective[i], r.objective[i - 1] + 1e-9);
    }
  }
}

TEST(KMeans, DeterministicForSeed) {
  std::vector<double> p(90);
  std::mt19937_64 rng(1);
  for (auto& v : p) v = static_cast<double>(rng() % 1000) / 100.0;
  const auto a = kmeans(p, 3, 5, 42);
  const auto b = kmeans(p, 3, 5, 42);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(SelectionCount, RoundsAndFloorsAtOne) {
  EXPECT_EQ(selection_count(100, 0.5), 50u);
  EXPECT_EQ(selection_count(10, 0.05), 1u);
  EXPECT_EQ(selection_count(10, 0.25), 3u);  // 2.5 rounds away from zero
  EXPECT_EQ(selection_count(1, 0.01), 1u);
  EXPECT_EQ(selection_count(7, 1.0), 7u);
}

FeatureBlock random_block(std::size_t rows, std::uint64_t seed, bool chromatic = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  FeatureBlock b(rows, 4, true, chromatic);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& v : b.embedding(r)) v = u(rng);
    b.set_coords(r, static_cast<float>(rng() % 64), static_cast<float>(rng() % 64));
    if (chromatic) b.set_chromatic(r, {u(rng), u(rng), u(rng)});
  }
  return b;
}

TEST(Mosaic, RateOneKeepsEveryPatch) {
  const auto b = random_block(37, 2);
  const auto m = build_mosaic("s", b, 1.0, 9, 4);
  std::vector<std::size_t> all(37);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  EXPECT_EQ(m.selected_indices, all);
}

TEST(Mosaic, OnePatchSlideKeepsThatPatch) {
  const auto b = random_block(1, 4);
  for (double rate : {0.05, 0.5, 1.0}) {
    EXPECT_EQ(build_mosaic("s", b, rate, 9, 3).selected_indices, std::vector<std::size_t>{0});
  }
}

TEST(Mosaic, SingleChromaticClusterAtHalf) {
  FeatureBlock b(100, 2, true, true);
  for (std::size_t r = 0; r < 100; ++r) {
    b.set_coords(r, static_cast<float>(r % 10), static_cast<float>(r / 10));
    b.set_chromatic(r, {0.2f, 0.4f, 0.6f});
  }
  const auto m = build_mosaic("s", b, 0.5, 9, 1);
  EXPECT_EQ(m.selected_indices.size(), 50u);
}

TEST(Mosaic, PicksNearestToSpatialCentroids) {
  // Three colour groups of 10, 10 and 20 patches.
  FeatureBlock b(40, 2, true, true);
  std::mt19937_64 rng(8);
  for (std::size_t r = 0; r < 40; ++r) {
    const float colour = r < 10 ? 0.0f : (r < 20 ? 0.5f : 1.0f);
    b.set_chromatic(r, {colour, colour, colour});
    b.set_coords(r, static_cast<float>(rng() % 50), static_cast<float>(rng() % 50));
  }
  MosaicTrace trace;
  const auto m = build_mosaic("s", b, 0.2, 3, 6, &trace);
  ASSERT_EQ(m.selected_indices.size(), 8u);  // 2 + 2 + 4

  // Recompute picks from the traced centroids.
  std::set<std::size_t> expected;
  for (std::size_t c = 0; c < trace.spatial_centroids.size(); ++c) {
    const auto& cent = trace.spatial_centroids[c];
    for (std::size_t s = 0; s < cent.size() / 2; ++s) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t pick = 0;
      for (std::size_t r = 0; r < 40; ++r) {
        if (trace.chromatic_cluster[r] != c || trace.spatial_cluster[r] != s) continue;
        const auto p = b.coords(r);
        const double d = (p[0] - cent[2 * s]) * (p[0] - cent[2 * s]) +
                         (p[1] - cent[2 * s + 1]) * (p[1] - cent[2 * s + 1]);
        if (d < best) {
          best = d;
          pick = r;
        }
      }
      expected.insert(pick);
    }
  }
  EXPECT_EQ(std::vector<std::size_t>(expected.begin(), expected.end()), m.selected_indices);
  // Per colour group counts.
  std::array<int, 3> per{};
  for (auto i : m.selected_indices) ++per[i < 10 ? 0 : (i < 20 ? 1 : 2)];
  EXPECT_EQ(per, (std::array<int, 3>{2, 2, 4}));
}

TEST(Mosaic, DuplicateCoordinatesStillMeetTarget) {
  FeatureBlock b(20, 2, true, true);
  for (std::size_t r = 0; r < 20; ++r) {
    b.set_coords(r, 3.0f, 3.0f);
    b.set_chromatic(r, {0.1f, 0.1f, 0.1f});
  }
  const auto m = build_mosaic("s", b, 0.5, 9, 2);
  EXPECT_EQ(m.selected_indices.size(), 10u);
}

TEST(Mosaic, SizeMonotoneInRate) {
  const auto b = random_block(400, 13);
  std::size_t prev = 0;
  for (double rate : {0.05, 0.1, 0.2, 0.5, 1.0}) {
    const auto m = build_mosaic("s", b, rate, 9, 17);
    EXPECT_GE(m.selected_indices.size(), prev);
    prev = m.selected_indices.size();
  }
  EXPECT_EQ(prev, 400u);
}

TEST(Mosaic, PropertiesOnRandomSlides) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t rows = 1 + seed * 7 % 150;
    const auto b = random_block(rows, seed, seed % 2 == 0);
    const double rate = std::array<double, 4>{0.05, 0.1, 0.2, 0.5}[seed % 4];
    MosaicTrace trace;
    const auto m = build_mosaic("s", b, rate, 9, seed, &trace);
    // Valid, sorted, unique indices.
    EXPECT_TRUE(std::is_sorted(m.selected_indices.begin(), m.selected_indices.end()));
    EXPECT_EQ(std::set<std::size_t>(m.selected_indices.begin(), m.selected_indices.end()).size(),
              m.selected_indices.size());
    for (auto i : m.selected_indices) EXPECT_LT(i, rows);
    // Exact size: sum over chromatic clusters of selection_count(m_c, rate).
    std::map<std::size_t, std::size_t> sizes;
    for (auto c : trace.chromatic_cluster) ++sizes[c];
    std::size_t expected = 0;
    for (const auto& [c, n] : sizes) expected += selection_count(n, rate);
    EXPECT_EQ(m.selected_indices.size(), expected);
    EXPECT_LE(m.selected_indices.size(), rows);
    EXPECT_GE(m.selected_indices.size(), 1u);
    // Deterministic.
    EXPECT_EQ(build_mosaic("s", b, rate, 9, seed).selected_indices, m.selected_indices);
  }
}

TEST(Mosaic, EmptySlideIsError) {
  FeatureBlock b(0, 4, true, false);
  EXPECT_THROW(build_mosaic("empty", b, 0.5, 9, 1), DataError);
  const auto one = random_block(3, 1);
  EXPECT_THROW(build_mosaic("s", one, 0.0, 9, 1), ConfigError);
  EXPECT_THROW(build_mosaic("s", one, 1.5, 9, 1), ConfigError);
}

TEST(Mosaic, ParallelMatchesSerialAndRoundTrips) {
  testing::TempDir dir("mosaic");
  std::vector<SlideRecord> slides;
  for (int i = 0; i < 12; ++i) {
    const auto path = dir / ("s" + std::to_string(i) + ".ssb");
    write_feature_file(path, random_block(20 + i * 9, i));
    slides.push_back({"s" + std::to_string(i), "p", "O", "D", path, {}});
  }
  const auto par = build_mosaics(slides, 0.2, 9, 77);
  const auto ser = build_mosaics_serial(slides, 0.2, 9, 77);
  ASSERT_EQ(par.size(), ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    EXPECT_EQ(par[i].slide_id, ser[i].slide_id);
    EXPECT_EQ(par[i].selected_indices, ser[i].selected_indices);
  }
  write_mosaic(dir / "m.csv", par[3]);
  const auto back = read_mosaic(dir / "m.csv");
  EXPECT_EQ(back.slide_id, par[3].slide_id);
  EXPECT_EQ(back.selected_indices, par[3].selected_indices);

  slides.push_back({"bad", "p", "O", "D", dir / "empty.ssb", {}});
  write_feature_file(dir / "empty.ssb", FeatureBlock(0, 4, true, false));
  try {
    build_mosaics(slides, 0.2, 9, 77);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
  }
}

}  // namespace
}  // namespace slidesearch
