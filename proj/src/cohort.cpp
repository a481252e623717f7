#include "slidesearch/cohort.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include "slidesearch/csv.hpp"
#include "slidesearch/error.hpp"
#include "slidesearch/features.hpp"

namespace slidesearch {
namespace fs = std::filesystem;
namespace {

const std::vector<std::string> kColumns = {
    "slide_id", "patient_id", "organ", "diagnosis", "patch_features",
    "slide_vectors"};

std::string at_line(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::string relative_or_absolute(const fs::path& target, const fs::path& base) {
  std::error_code ec;
  fs::path rel = fs::relative(target, base, ec);
  if (ec || rel.empty()) return target.generic_string();
  return rel.generic_string();
}

}  // namespace

std::vector<SlideRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!csv::read_record(in, fields, line)) {
    throw DataError(path.string() + ": missing header");
  }
  if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) {
    fields[0].erase(0, 3);
  }
  if (fields != kColumns) {
    throw DataError(at_line(path, 1) + "header must be '" + kManifestHeader + "'");
  }

  std::vector<SlideRecord> slides;
  std::unordered_set<std::string> seen;
  while (true) {
    const std::size_t row_line = line + 1;
    if (!csv::read_record(in, fields, line)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != kColumns.size()) {
      throw DataError(at_line(path, row_line) + "expected 6 fields, got " +
                      std::to_string(fields.size()));
    }
    SlideRecord r;
    r.slide_id = fields[0];
    r.patient_id = fields[1];
    r.organ = fields[2];
    r.diagnosis = fields[3];
    for (int i = 0; i < 5; ++i) {
      if (fields[i].empty()) {
        throw DataError(at_line(path, row_line) + "empty " + kColumns[i]);
      }
    }
    if (!seen.insert(r.slide_id).second) {
      throw DataError(at_line(path, row_line) + "duplicate slide_id '" +
                      r.slide_id + "'");
    }
    r.patch_features = base / fields[4];
    try {
      read_feature_header(r.patch_features);
    } catch (const DataError& e) {
      throw DataError(at_line(path, row_line) + "dangling patch_features: " +
                      e.what());
    }
    std::string_view rest = fields[5];
    while (!rest.empty()) {
      const auto semi = rest.find(';');
      std::string_view pair = rest.substr(0, semi);
      rest = semi == std::string_view::npos ? std::string_view{}
                                            : rest.substr(semi + 1);
      if (pair.empty()) continue;
      const auto eq = pair.find('=');
      if (eq == std::string_view::npos || eq == 0 || eq + 1 == pair.size()) {
        throw DataError(at_line(path, row_line) + "slide_vectors entry '" +
                        std::string(pair) + "' is not model=path");
      }
      const std::string model(pair.substr(0, eq));
      const fs::path vec = base / fs::path(std::string(pair.substr(eq + 1)));
      try {
        read_feature_header(vec);
      } catch (const DataError& e) {
        throw DataError(at_line(path, row_line) + "dangling slide vector for '" +
                        model + "': " + e.what());
      }
      if (!r.slide_vectors.emplace(model, vec).second) {
        throw DataError(at_line(path, row_line) + "model '" + model +
                        "' listed twice");
      }
    }
    slides.push_back(std::move(r));
  }
  return slides;
}

void write_manifest(const fs::path& path, const std::vector<SlideRecord>& slides) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const fs::path base = path.parent_path().empty() ? fs::path(".")
                                                   : path.parent_path();
  out << kManifestHeader << '\n';
  for (const auto& s : slides) {
    std::string vectors;
    for (const auto& [model, file] : s.slide_vectors) {
      if (!vectors.empty()) vectors += ';';
      vectors += model + "=" + relative_or_absolute(file, base);
    }
    csv::write_record(out, {s.slide_id, s.patient_id, s.organ, s.diagnosis,
                            relative_or_absolute(s.patch_features, base),
                            vectors});
  }
}

Cohort apply_exclusions(const std::vector<SlideRecord>& slides,
                        std::size_t min_patients, std::size_t min_diagnoses) {
  std::map<DiagnosisLabel, std::set<std::string>> patients;
  for (const auto& s : slides) patients[s.label()].insert(s.patient_id);

  std::set<DiagnosisLabel> kept_labels;
  std::map<std::string, std::size_t> labels_per_organ;
  for (const auto& [label, ps] : patients) {
    if (ps.size() >= min_patients) {
      kept_labels.insert(label);
      ++labels_per_organ[label.organ];
    }
  }

  Cohort cohort;
  for (const auto& s : slides) {
    const DiagnosisLabel label = s.label();
    if (!kept_labels.contains(label)) {
      cohort.excluded.push_back(
          {s, "diagnosis has " + std::to_string(patients[label].size()) +
                  " unique patients (< " + std::to_string(min_patients) + ")"});
      continue;
    }
    const std::size_t organ_labels = labels_per_organ[s.organ];
    if (organ_labels < min_diagnoses) {
      cohort.excluded.push_back(
          {s, "organ has " + std::to_string(organ_labels) +
                  " eligible diagnoses (< " + std::to_string(min_diagnoses) +
                  ")"});
      continue;
    }
    cohort.slides.push_back(s);
  }
  for (const auto& label : kept_labels) {
    if (labels_per_organ[label.organ] < min_diagnoses) continue;
    cohort.labels.push_back(label);
    cohort.patients_per_label[label] = patients[label].size();
    ++cohort.labels_per_organ[label.organ];
  }
  return cohort;
}

std::map<std::string, OrganTally> organ_tally(const std::vector<SlideRecord>& slides) {
  std::map<std::string, std::set<std::string>> labels, patients;
  std::map<std::string, OrganTally> tally;
  for (const auto& s : slides) {
    ++tally[s.organ].slides;
    labels[s.organ].insert(s.diagnosis);
    patients[s.organ].insert(s.patient_id);
  }
  for (auto& [organ, t] : tally) {
    t.labels = labels[organ].size();
    t.patients = patients[organ].size();
  }
  return tally;
}

}  // namespace slidesearch
