#include <algorithm>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "slidesearch/barcode.hpp"
#include "test_util.hpp"

namespace slidesearch {
namespace {

Barcode bits(const std::vector<int>& b) {
  Barcode code(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i]) code.set(i);
  }
  return code;
}

Barcode random_code(std::size_t n, std::mt19937_64& rng) {
  Barcode code(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() & 1) code.set(i);
  }
  return code;
}

TEST(MinMax, SignOfDifference) {
  const std::vector<double> v = {0.1, 0.5, 0.3};
  EXPECT_EQ(minmax_binarize<double>(v), bits({1, 0}));
  const std::vector<float> ties = {1.0f, 1.0f, 2.0f, 2.0f};
  EXPECT_EQ(minmax_binarize<float>(ties), bits({0, 1, 0}));
}

TEST(MinMax, InvariantUnderIncreasingMaps) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(70), affine(70), cube(70);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = g(rng);
      affine[i] = 2 * v[i] + 1;
      cube[i] = v[i] * v[i] * v[i];
    }
    const auto code = minmax_binarize<double>(v);
    EXPECT_EQ(minmax_binarize<double>(affine), code);
    EXPECT_EQ(minmax_binarize<double>(cube), code);
  }
}

TEST(MinMax, MatchesBitLoopOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-1, 1);
  for (std::size_t d : {2u, 16u, 64u, 65u, 66u, 129u, 768u}) {
    std::vector<float> v(d);
    for (auto& x : v) x = std::round(u(rng) * 4) / 4;  // force some ties
    const auto code = minmax_binarize<float>(v);
    ASSERT_EQ(code.size(), d - 1);
    ASSERT_EQ(code.words().size(), words_for_bits(d - 1));
    for (std::size_t i = 0; i + 1 < d; ++i) EXPECT_EQ(code.test(i), v[i + 1] > v[i]) << i;
    // Padding bits stay zero.
    const std::size_t tail = (d - 1) % 64;
    if (tail) {
      EXPECT_EQ(code.words().back() >> tail, 0u);
    }
  }
}

TEST(MinMax, RejectsShortOrNonFinite) {
  EXPECT_THROW(minmax_binarize<double>(std::vector<double>{1.0}), DataError);
  EXPECT_THROW(minmax_binarize<double>(std::vector<double>{1.0, std::nan("")}), DataError);
  EXPECT_THROW(minmax_binarize<double>(std::vector<double>{1.0, INFINITY}), DataError);
}

TEST(Hamming, BasicCases) {
  std::mt19937_64 rng(3);
  const auto a = random_code(15, rng);
  EXPECT_EQ(hamming(a, a), 0u);
  Barcode complement(15);
  for (std::size_t i = 0; i < 15; ++i) {
    if (!a.test(i)) complement.set(i);
  }
  EXPECT_EQ(hamming(a, complement), 15u);
  EXPECT_THROW(hamming(a, Barcode(16)), DataError);
}

TEST(Hamming, MetricAndLoopOracle) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 300;
    const auto a = random_code(n, rng), b = random_code(n, rng), c = random_code(n, rng);
    std::size_t naive = 0;
    for (std::size_t i = 0; i < n; ++i) naive += a.test(i) != b.test(i);
    EXPECT_EQ(hamming(a, b), naive);
    EXPECT_EQ(hamming(a, b), hamming(b, a));
    EXPECT_LE(hamming(a, c), hamming(a, b) + hamming(b, c));
    EXPECT_LE(hamming(a, b), n);
  }
}

BoB bob_of(const std::string& id, const std::vector<Barcode>& codes) { return BoB(id, codes); }

// Double loop + sort.
double median_of_min(const std::vector<Barcode>& q, const std::vector<Barcode>& c) {
  std::vector<double> mins;
  for (const auto& x : q) {
    std::size_t best = SIZE_MAX;
    for (const auto& y : c) {
      std::size_t d = 0;
      for (std::size_t i = 0; i < x.size(); ++i) d += x.test(i) != y.test(i);
      best = std::min(best, d);
    }
    mins.push_back(static_cast<double>(best));
  }
  std::sort(mins.begin(), mins.end());
  const std::size_t m = mins.size();
  return m % 2 ? mins[m / 2] : (mins[m / 2 - 1] + mins[m / 2]) / 2;
}

TEST(SlideDistance, SubsetIsZero) {
  std::mt19937_64 rng(5);
  std::vector<Barcode> c;
  for (int i = 0; i < 6; ++i) c.push_back(random_code(40, rng));
  const std::vector<Barcode> q(c.begin() + 1, c.begin() + 4);
  EXPECT_EQ(slide_distance(bob_of("q", q), bob_of("c", c)), 0.0);
}

TEST(SlideDistance, OddMedianOfMinima) {
  // Candidate is all-zero; query codes have 2, 5 and 7 set bits.
  const Barcode zero(10);
  const auto q = std::vector<Barcode>{bits({1, 1, 0, 0, 0, 0, 0, 0, 0, 0}),
                                      bits({1, 1, 1, 1, 1, 0, 0, 0, 0, 0}),
                                      bits({1, 1, 1, 1, 1, 1, 1, 0, 0, 0})};
  EXPECT_EQ(slide_distance(bob_of("q", q), bob_of("c", {zero})), 5.0);
  const auto even = std::vector<Barcode>{q[0], q[1]};
  EXPECT_EQ(slide_distance(bob_of("q", even), bob_of("c", {zero})), 3.5);
  SlideDistanceOptions norm;
  norm.normalize = true;
  EXPECT_DOUBLE_EQ(slide_distance(bob_of("q", q), bob_of("c", {zero}), norm), 0.5);
}

TEST(SlideDistance, MatchesBruteForceOracle) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 130;
    std::vector<Barcode> q, c;
    const std::size_t nq = 1 + rng() % 8, nc = 1 + rng() % 8;
    for (std::size_t i = 0; i < nq; ++i) q.push_back(random_code(n, rng));
    for (std::size_t i = 0; i < nc; ++i) c.push_back(random_code(n, rng));
    if (t == 0) {
      q.resize(4);
      c.resize(6);
      for (auto& x : q) x = random_code(n, rng);
      for (auto& x : c) x = random_code(n, rng);
    }
    EXPECT_EQ(slide_distance(bob_of("q", q), bob_of("c", c)), median_of_min(q, c));
  }
}

TEST(SlideDistance, IsNotSymmetric) {
  // Query {0000} against {0000, 1111}: the 0000 code matches exactly.
  // Reversed, 1111 finds nothing closer than 4, so the median is 2.
  const auto zero = bits({0, 0, 0, 0});
  const auto ones = bits({1, 1, 1, 1});
  const auto small = bob_of("a", {zero});
  const auto big = bob_of("b", {zero, ones});
  EXPECT_EQ(slide_distance(small, big), 0.0);
  EXPECT_EQ(slide_distance(big, small), 2.0);
}

TEST(SlideDistance, EmptyOrMismatchedIsError) {
  EXPECT_THROW(slide_distance(BoB("q", 8), bob_of("c", {Barcode(8)})), DataError);
  EXPECT_THROW(slide_distance(bob_of("q", {Barcode(8)}), bob_of("c", {Barcode(9)})), DataError);
}

IndexEntry entry(const std::string& id, const std::string& patient, const std::string& organ,
                 const std::vector<Barcode>& codes) {
  return {id, patient, {organ, "D"}, BoB(id, codes)};
}

TEST(BobSearch, HandComputedRanking) {
  const Barcode zero(12);
  Barcode three(12), nine(12);
  for (int i = 0; i < 3; ++i) three.set(i);
  for (int i = 0; i < 9; ++i) nine.set(i);
  const BarcodeIndex index({entry("far", "p3", "Lung", {nine}), entry("near", "p1", "Lung", {zero}),
                            entry("mid", "p2", "Lung", {three}),
                            entry("other", "p4", "Colon", {zero})});
  const BoB q("q", std::vector<Barcode>{zero});
  const auto r = bob_search({&q, "pq", "Lung"}, index, 2);
  ASSERT_EQ(r.neighbors.size(), 2u);
  EXPECT_EQ(r.neighbors[0], (Neighbor{"near", 0.0}));
  EXPECT_EQ(r.neighbors[1], (Neighbor{"mid", 3.0}));
  EXPECT_FALSE(r.shortfall);
  const auto all = bob_search({&q, "pq", "Lung"}, index, 5);
  EXPECT_TRUE(all.shortfall);
  ASSERT_EQ(all.neighbors.size(), 3u);
  EXPECT_EQ(all.neighbors[2], (Neighbor{"far", 9.0}));
}

TEST(BobSearch, OwnPatientOnlyGivesShortfall) {
  const BarcodeIndex index({entry("a", "p", "Lung", {Barcode(8)}),
                            entry("b", "p", "Lung", {Barcode(8)})});
  const auto& q = index.at(0);
  const auto r = bob_search({&q.bob, q.patient_id, "Lung"}, index, 1);
  EXPECT_TRUE(r.neighbors.empty());
  EXPECT_TRUE(r.shortfall);
}

TEST(BobSearch, DuplicateUnderOtherPatientRanksFirstAndTiesBreakById) {
  std::mt19937_64 rng(7);
  std::vector<Barcode> codes;
  for (int i = 0; i < 5; ++i) codes.push_back(random_code(50, rng));
  std::vector<Barcode> shifted;
  for (int i = 0; i < 5; ++i) shifted.push_back(random_code(50, rng));
  const BarcodeIndex index({entry("q", "p0", "Lung", codes), entry("z_dup", "p1", "Lung", codes),
                            entry("a_dup", "p2", "Lung", codes),
                            entry("x", "p3", "Lung", shifted)});
  const auto& q = index.at(0);
  const auto r = bob_search({&q.bob, "p0", "Lung"}, index, 3);
  ASSERT_EQ(r.neighbors.size(), 3u);
  EXPECT_EQ(r.neighbors[0], (Neighbor{"a_dup", 0.0}));
  EXPECT_EQ(r.neighbors[1], (Neighbor{"z_dup", 0.0}));
  EXPECT_EQ(r.neighbors[2].slide_id, "x");
}

BarcodeIndex random_index(std::uint64_t seed, std::size_t slides, std::size_t n_bits) {
  std::mt19937_64 rng(seed);
  std::vector<IndexEntry> entries;
  for (std::size_t s = 0; s < slides; ++s) {
    std::vector<Barcode> codes;
    const std::size_t m = 1 + rng() % 12;
    for (std::size_t i = 0; i < m; ++i) codes.push_back(random_code(n_bits, rng));
    entries.push_back(entry("s" + std::to_string(s), "p" + std::to_string(rng() % (slides / 2 + 1)),
                            rng() % 3 ? "Lung" : "Colon", codes));
  }
  return BarcodeIndex(std::move(entries));
}

TEST(BobSearch, ParallelMatchesSerialAndBruteForce) {
  const auto index = random_index(8, 60, 40);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& e = index.at(i);
    const BobQuery q{&e.bob, e.patient_id, e.label.organ};
    const auto par = bob_search(q, index, 5);
    const auto ser = bob_search_serial(q, index, 5);
    EXPECT_EQ(par.neighbors, ser.neighbors);
    EXPECT_EQ(par.shortfall, ser.shortfall);

    std::vector<Neighbor> brute;
    for (const auto& c : index.entries()) {
      if (c.label.organ != e.label.organ || c.patient_id == e.patient_id) continue;
      std::vector<Barcode> qc, cc;
      for (std::size_t k = 0; k < e.bob.size(); ++k) qc.push_back(e.bob.code(k));
      for (std::size_t k = 0; k < c.bob.size(); ++k) cc.push_back(c.bob.code(k));
      brute.push_back({c.slide_id, median_of_min(qc, cc)});
    }
    std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.slide_id < b.slide_id;
    });
    if (brute.size() > 5) brute.resize(5);
    EXPECT_EQ(ser.neighbors, brute);
    for (const auto& nb : ser.neighbors) EXPECT_NE(index.at(index.find(nb.slide_id)).patient_id, e.patient_id);
  }
  const auto all = bob_search_all(index, 3);
  ASSERT_EQ(all.size(), index.size());
  EXPECT_EQ(all[7].query_slide_id, "s7");
}

TEST(BarcodeIndex, FileRoundTrip) {
  testing::TempDir dir("index");
  const auto index = random_index(9, 25, 767);
  write_index(dir / "i.bob", index);
  const auto back = read_index(dir / "i.bob");
  ASSERT_EQ(back.size(), index.size());
  EXPECT_EQ(back.bits(), 767u);
  for (std::size_t i = 0; i < index.size(); ++i) {
    EXPECT_EQ(back.at(i).slide_id, index.at(i).slide_id);
    EXPECT_EQ(back.at(i).patient_id, index.at(i).patient_id);
    EXPECT_EQ(back.at(i).label, index.at(i).label);
    EXPECT_EQ(back.at(i).bob.size(), index.at(i).bob.size());
    EXPECT_TRUE(std::ranges::equal(back.at(i).bob.all_words(), index.at(i).bob.all_words()));
  }
  std::ofstream(dir / "junk.bob") << "nope";
  EXPECT_THROW(read_index(dir / "junk.bob"), DataError);
}

TEST(BarcodeIndex, MakeBobUsesMosaicRows) {
  FeatureBlock b(3, 3, false, false);
  const float rows[3][3] = {{0, 1, 2}, {2, 1, 0}, {0, 2, 1}};
  for (std::size_t r = 0; r < 3; ++r) std::copy(rows[r], rows[r] + 3, b.embedding(r).begin());
  const auto bob = make_bob("s", b, {0, 2});
  ASSERT_EQ(bob.size(), 2u);
  EXPECT_EQ(bob.code(0), bits({1, 1}));
  EXPECT_EQ(bob.code(1), bits({1, 0}));
}

}  // namespace
}  // namespace slidesearch
