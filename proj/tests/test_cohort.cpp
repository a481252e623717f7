#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "slidesearch/cohort.hpp"
#include "slidesearch/error.hpp"
#include "slidesearch/features.hpp"
#include "test_util.hpp"

namespace slidesearch {
namespace {

class ManifestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    FeatureBlock block(2, 4, true, false);
    write_feature_file(dir_ / "f.ssb", block);
    write_slide_vector(dir_ / "v.ssb", std::vector<float>{1.0f, 2.0f});
  }

  std::filesystem::path write(const std::string& body) {
    const auto p = dir_ / "manifest.csv";
    std::ofstream(p, std::ios::binary) << kManifestHeader << '\n' << body;
    return p;
  }

  testing::TempDir dir_{"cohort"};
};

TEST_F(ManifestTest, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(load_manifest(write("")).empty());
}

TEST_F(ManifestTest, ReadsRowsInOrder) {
  const auto slides = load_manifest(write(
      "s2,p1,Lung,Adenocarcinoma,f.ssb,\n"
      "s1,p2,Lung,\"Squamous cell carcinoma, NOS\",f.ssb,conch=v.ssb;titan=v.ssb\n"));
  ASSERT_EQ(slides.size(), 2u);
  EXPECT_EQ(slides[0].slide_id, "s2");
  EXPECT_EQ(slides[1].diagnosis, "Squamous cell carcinoma, NOS");
  EXPECT_EQ(slides[1].slide_vectors.size(), 2u);
  EXPECT_EQ(slides[1].slide_vectors.at("titan"), dir_ / "v.ssb");
  EXPECT_TRUE(slides[0].slide_vectors.empty());
}

TEST_F(ManifestTest, ThymusTally) {
  // Thymus block of the per-organ diagnosis table: 6 diagnoses, 179 WSIs.
  const std::vector<std::pair<std::string, int>> thymus = {
      {"Thymic carcinoma", 11}, {"Thymoma, type A", 27}, {"Thymoma, type AB", 45},
      {"Thymoma, type B1", 35}, {"Thymoma, type B2", 48}, {"Thymoma, type B3", 13}};
  std::string body;
  int id = 0;
  for (const auto& [dx, count] : thymus) {
    for (int i = 0; i < count; ++i, ++id) {
      body += "t" + std::to_string(id) + ",p" + std::to_string(id) + ",Thymus,\"" + dx +
              "\",f.ssb,\n";
    }
  }
  const auto tally = organ_tally(load_manifest(write(body)));
  ASSERT_EQ(tally.size(), 1u);
  EXPECT_EQ(tally.at("Thymus").slides, 179u);
  EXPECT_EQ(tally.at("Thymus").labels, 6u);
}

TEST_F(ManifestTest, ErrorsNameTheLine) {
  try {
    load_manifest(write("a,p,Lung,X,f.ssb,\nb,p,Lung,X\n"));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_manifest(write("a,p,Lung,X,f.ssb,\na,q,Lung,X,f.ssb,\n")), DataError);
  EXPECT_THROW(load_manifest(write("a,p,Lung,X,nope.ssb,\n")), DataError);
  EXPECT_THROW(load_manifest(write("a,p,Lung,X,f.ssb,m=nope.ssb\n")), DataError);
  EXPECT_THROW(load_manifest(write("a,p,Lung,X,f.ssb,broken\n")), DataError);
  EXPECT_THROW(load_manifest(write("a,p,,X,f.ssb,\n")), DataError);
  EXPECT_THROW(load_manifest(dir_ / "absent.csv"), DataError);
}

TEST_F(ManifestTest, WriteThenLoadPreservesRecords) {
  const auto slides = load_manifest(write(
      "s1,p1,Lung,\"A, \"\"quoted\"\"\",f.ssb,m=v.ssb\ns2,p2,Colon,B,f.ssb,\n"));
  write_manifest(dir_ / "copy.csv", slides);
  EXPECT_EQ(load_manifest(dir_ / "copy.csv"), slides);
}

SlideRecord slide(const std::string& id, const std::string& patient,
                  const std::string& organ, const std::string& dx) {
  return {id, patient, organ, dx, "f.ssb", {}};
}

TEST(Exclusions, LabelWithThreePatientsIsDropped) {
  std::vector<SlideRecord> s;
  for (int i = 0; i < 3; ++i) s.push_back(slide("a" + std::to_string(i), "pa" + std::to_string(i), "O", "A"));
  for (int i = 0; i < 4; ++i) s.push_back(slide("b" + std::to_string(i), "pb" + std::to_string(i), "O", "B"));
  for (int i = 0; i < 4; ++i) s.push_back(slide("c" + std::to_string(i), "pc" + std::to_string(i), "O", "C"));
  const Cohort c = apply_exclusions(s);
  EXPECT_EQ(c.slides.size(), 8u);
  EXPECT_EQ(c.labels.size(), 2u);
  EXPECT_EQ(c.excluded.size(), 3u);
  EXPECT_FALSE(c.patients_per_label.contains({"O", "A"}));
}

TEST(Exclusions, MultipleSlidesOfOnePatientCountOnce) {
  std::vector<SlideRecord> s;
  for (int i = 0; i < 6; ++i) s.push_back(slide("a" + std::to_string(i), "p" + std::to_string(i % 3), "O", "A"));
  for (int i = 0; i < 4; ++i) s.push_back(slide("b" + std::to_string(i), "q" + std::to_string(i), "O", "B"));
  const Cohort c = apply_exclusions(s);
  EXPECT_TRUE(c.slides.empty());  // A has 3 patients; O is left with one label
}

TEST(Exclusions, OrganWithOneSurvivingLabelIsDropped) {
  std::vector<SlideRecord> s;
  for (int i = 0; i < 5; ++i) s.push_back(slide("x" + std::to_string(i), "px" + std::to_string(i), "Liver", "HCC"));
  const Cohort c = apply_exclusions(s);
  EXPECT_TRUE(c.slides.empty());
  EXPECT_EQ(c.excluded.size(), 5u);
  EXPECT_TRUE(c.labels.empty());
}

TEST(Exclusions, SharedDiagnosisNamesStayOrganScoped) {
  const std::vector<std::string> organs = {"Colon", "Rectum", "Stomach", "Esophagus",
                                           "Lung", "Pancreas", "Prostate"};
  std::vector<SlideRecord> s;
  int id = 0;
  for (const auto& organ : organs) {
    for (const std::string dx : {"Adenocarcinoma", "Other"}) {
      for (int p = 0; p < 4; ++p, ++id) {
        s.push_back(slide("s" + std::to_string(id), organ + std::to_string(p) + dx, organ, dx));
      }
    }
  }
  const Cohort c = apply_exclusions(s);
  const auto adeno = std::count_if(c.labels.begin(), c.labels.end(), [](const auto& l) {
    return l.diagnosis == "Adenocarcinoma";
  });
  EXPECT_EQ(adeno, 7);
  EXPECT_EQ(c.labels.size(), 14u);
}

// Independent set-filter oracle: surviving (organ, diagnosis) pairs.
std::set<DiagnosisLabel> oracle_labels(const std::vector<SlideRecord>& slides,
                                       std::size_t min_p, std::size_t min_d) {
  std::set<DiagnosisLabel> all;
  for (const auto& s : slides) all.insert(s.label());
  std::set<DiagnosisLabel> pass;
  for (const auto& l : all) {
    std::set<std::string> patients;
    for (const auto& s : slides) {
      if (s.organ == l.organ && s.diagnosis == l.diagnosis) patients.insert(s.patient_id);
    }
    if (patients.size() >= min_p) pass.insert(l);
  }
  std::set<DiagnosisLabel> out;
  for (const auto& l : pass) {
    const auto same_organ = std::count_if(pass.begin(), pass.end(),
                                          [&](const auto& m) { return m.organ == l.organ; });
    if (static_cast<std::size_t>(same_organ) >= min_d) out.insert(l);
  }
  return out;
}

TEST(Exclusions, MatchesSetFilterOracle) {
  // Organ P keeps A (5 patients) and B (4); organ Q keeps only C (6) after D (2)
  // fails, so Q disappears entirely. E (3) also fails in P.
  std::vector<SlideRecord> s;
  const auto add = [&](const std::string& organ, const std::string& dx, int patients) {
    for (int p = 0; p < patients; ++p) {
      s.push_back(slide(organ + dx + std::to_string(p), organ + dx + "p" + std::to_string(p),
                        organ, dx));
    }
  };
  add("P", "A", 5);
  add("P", "B", 4);
  add("P", "E", 3);
  add("Q", "C", 6);
  add("Q", "D", 2);
  const Cohort c = apply_exclusions(s);
  const auto expected = oracle_labels(s, 4, 2);
  EXPECT_EQ(std::set<DiagnosisLabel>(c.labels.begin(), c.labels.end()), expected);
  EXPECT_EQ(expected.size(), 2u);
  EXPECT_EQ(c.slides.size(), 9u);
  for (const auto& r : c.slides) EXPECT_TRUE(expected.contains(r.label()));
  EXPECT_EQ(c.patients_per_label.at({"P", "A"}), 5u);
  EXPECT_EQ(c.labels_per_organ.at("P"), 2u);
  EXPECT_FALSE(c.labels_per_organ.contains("Q"));
}

TEST(Exclusions, PropertiesOnRandomManifests) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SlideRecord> s;
    const int rows = 1 + static_cast<int>(rng() % 80);
    for (int i = 0; i < rows; ++i) {
      const std::string organ = "O" + std::to_string(rng() % 4);
      const std::string dx = "D" + std::to_string(rng() % 4);
      const std::string patient = "P" + std::to_string(rng() % 25);
      s.push_back(slide("s" + std::to_string(i), patient, organ, dx));
    }
    const Cohort c = apply_exclusions(s);
    // Thresholds hold on the output.
    for (const auto& l : c.labels) {
      std::set<std::string> ps;
      for (const auto& r : c.slides) {
        if (r.label() == l) ps.insert(r.patient_id);
      }
      EXPECT_GE(ps.size(), 4u);
      EXPECT_GE(c.labels_per_organ.at(l.organ), 2u);
    }
    // Output is a verbatim, order-preserving subset; counts reconcile.
    EXPECT_EQ(c.slides.size() + c.excluded.size(), s.size());
    std::size_t j = 0;
    for (const auto& r : c.slides) {
      while (j < s.size() && !(s[j] == r)) ++j;
      ASSERT_LT(j, s.size());
    }
    // Oracle agreement.
    EXPECT_EQ(std::set<DiagnosisLabel>(c.labels.begin(), c.labels.end()),
              oracle_labels(s, 4, 2));
    // Idempotence.
    const Cohort again = apply_exclusions(c.slides);
    EXPECT_EQ(again.slides, c.slides);
    EXPECT_EQ(again.labels, c.labels);
    EXPECT_TRUE(again.excluded.empty());
  }
}

}  // namespace
}  // namespace slidesearch
