#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace slidesearch {

// Organ-scoped diagnosis: "Adenocarcinoma" in Colon and in Lung are
// different labels.
struct DiagnosisLabel {
  std::string organ;
  std::string diagnosis;

  auto operator<=>(const DiagnosisLabel&) const = default;
  bool operator==(const DiagnosisLabel&) const = default;
};

struct SlideRecord {
  std::string slide_id;
  std::string patient_id;
  std::string organ;
  std::string diagnosis;
  std::filesystem::path patch_features;
  // model name -> slide-vector file
  std::map<std::string, std::filesystem::path> slide_vectors;

  DiagnosisLabel label() const { return {organ, diagnosis}; }
  bool operator==(const SlideRecord&) const = default;
};

struct ExcludedSlide {
  SlideRecord slide;
  std::string reason;
};

struct Cohort {
  std::vector<SlideRecord> slides;
  std::vector<DiagnosisLabel> labels;  // sorted
  std::map<DiagnosisLabel, std::size_t> patients_per_label;
  std::map<std::string, std::size_t> labels_per_organ;
  std::vector<ExcludedSlide> excluded;
};

inline constexpr const char* kManifestHeader =
    "slide_id,patient_id,organ,diagnosis,patch_features,slide_vectors";

// Reads a manifest CSV. Relative feature paths are resolved against the
// manifest's directory. Every referenced feature file must exist and carry
// a valid header. Errors are DataError and name the offending line.
std::vector<SlideRecord> load_manifest(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path,
                    const std::vector<SlideRecord>& slides);

// Drops labels with fewer than `min_patients` unique patients, then organs
// left with fewer than `min_diagnoses` labels. One pass each, in that order.
Cohort apply_exclusions(const std::vector<SlideRecord>& slides,
                        std::size_t min_patients = 4,
                        std::size_t min_diagnoses = 2);

struct OrganTally {
  std::size_t slides = 0;
  std::size_t labels = 0;
  std::size_t patients = 0;
};

std::map<std::string, OrganTally> organ_tally(
    const std::vector<SlideRecord>& slides);

}  // namespace slidesearch
