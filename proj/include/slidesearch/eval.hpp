#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slidesearch/cohort.hpp"
#include "slidesearch/retrieval.hpp"

namespace slidesearch {

struct SlideMeta {
  std::string patient_id;
  DiagnosisLabel label;
};
using SlideMetaMap = std::map<std::string, SlideMeta>;

SlideMetaMap make_meta(const std::vector<SlideRecord>& slides);

struct Prediction {
  std::string query_id;  // slide id, or patient id after aggregation
  std::string patient_id;
  DiagnosisLabel true_label;
  DiagnosisLabel predicted_label;
  std::size_t n_used = 0;
  double rank1_distance = 0.0;
};

// Most frequent label among the first min(n, available) neighbours. Ties go
// to the tied label whose best-ranked neighbour is nearest. Throws
// DataError for an empty neighbour list or an unknown slide id.
Prediction majority_vote(const RetrievalResult& result,
                         const SlideMetaMap& meta, std::size_t n);

enum class PatientAggregation { kVote, kBestSlide, kPerSlide };

PatientAggregation parse_patient_aggregation(const std::string& text);
std::string to_string(PatientAggregation mode);

// Collapses slide predictions sharing (patient, true label) into one case.
// kVote: majority over the slides' predictions, ties to the slide with the
// smallest rank-1 distance (then query id). kBestSlide: that slide's
// prediction outright. kPerSlide: unchanged. Output sorted by query id.
std::vector<Prediction> aggregate_patients(std::span<const Prediction> preds,
                                           PatientAggregation mode);

struct LabelScore {
  DiagnosisLabel label;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t support = 0;  // tp + fn
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// One-vs-rest scores for every label of `organ` that occurs as a truth or a
// prediction among the organ's cases. Zero denominators score 0. Sorted by
// label.
std::vector<LabelScore> per_diagnosis_f1(std::span<const Prediction> preds,
                                         const std::string& organ);

// Unweighted mean F1 over labels with support > 0; 0 when there are none.
double organ_macro_f1(std::span<const LabelScore> scores);

struct OrganScores {
  std::map<std::string, std::vector<LabelScore>> per_label;
  std::map<std::string, double> macro_f1;
};

// per_diagnosis_f1 + organ_macro_f1 for every organ present in `preds`.
OrganScores score_by_organ(std::span<const Prediction> preds);

struct OrganSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Mean, sample sd, and mean +/- t(1 - (1 - confidence) / 2, n - 1) * sd /
// sqrt(n). CI bounds are not clipped. With n == 1 the interval collapses to
// the point.
OrganSummary organ_summary(std::span<const double> values,
                           double confidence = 0.95);

enum class WinLevel { kOrgan, kDiagnosis };

// rows x models; NaN marks a missing score and never wins.
struct ScoreMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> models;
  std::vector<double> values;

  double at(std::size_t r, std::size_t m) const {
    return values[r * models.size() + m];
  }
};

// Per row, every model tied at the maximum (after rounding to 2 decimals)
// gets a win. At diagnosis level, rows where all models score 0 or all
// score 1 are skipped.
std::vector<std::size_t> win_counts(const ScoreMatrix& scores, WinLevel level);

struct MisclassificationProfile {
  std::size_t support = 0;
  std::map<DiagnosisLabel, std::size_t> errors;  // predicted -> count
};

// Error tallies for true labels whose case count lies in [lo, hi]. Labels in
// range with no errors are present with an empty map.
std::map<DiagnosisLabel, MisclassificationProfile> misclassification_profile(
    std::span<const Prediction> preds, std::size_t support_lo = 5,
    std::size_t support_hi = 7);

struct FoldAssignment {
  std::size_t k = 0;
  std::map<std::string, std::size_t> fold_of_patient;
  std::map<std::string, DiagnosisLabel> stratum_of_patient;
  std::vector<std::string> warnings;

  std::size_t fold_of(const SlideRecord& slide) const;
};

// Patient-grouped folds stratified by diagnosis. A patient's stratum is its
// most frequent label (smallest label on ties). Labels are visited by
// descending patient count (label order on ties); patients within a label are
// shuffled with the seed, then each goes to the fold holding the fewest
// patients of that label, ties to the fold with fewest patients overall,
// then the lowest fold index.
FoldAssignment grouped_stratified_folds(const Cohort& cohort, std::size_t k = 3,
                                        std::uint64_t seed = 0);

// Concatenates the folds' test predictions and scores them once.
OrganScores pooled_f1(const std::vector<std::vector<Prediction>>& folds);

}  // namespace slidesearch
