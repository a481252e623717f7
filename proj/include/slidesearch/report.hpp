#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "slidesearch/cohort.hpp"
#include "slidesearch/eval.hpp"
#include "slidesearch/retrieval.hpp"
#include "slidesearch/stats.hpp"

namespace slidesearch {

struct EvalOptions {
  std::vector<std::size_t> n_values{1, 3};
  PatientAggregation aggregation = PatientAggregation::kVote;
  std::size_t misclass_lo = 5;
  std::size_t misclass_hi = 7;
};

struct ModelRun {
  std::string model;
  std::size_t n = 1;
  std::vector<Prediction> predictions;
  OrganScores scores;
  OrganSummary summary;
};

struct WinTable {
  std::size_t n = 1;
  std::string level;  // "organ" or "diagnosis"
  std::vector<std::string> models;
  std::vector<std::size_t> wins;
};

struct MetricsReport {
  std::vector<std::string> models;
  std::vector<ModelRun> runs;  // models x n_values, model-major
  std::vector<WinTable> wins;
  // (model, n) -> profile
  std::map<std::pair<std::string, std::size_t>,
           std::map<DiagnosisLabel, MisclassificationProfile>>
      misclassification;
  // Queries that could not be scored (e.g. no candidates) with reasons.
  std::vector<ExcludedSlide> unscored;
};

using ModelResults =
    std::vector<std::pair<std::string, std::vector<RetrievalResult>>>;

// Votes, aggregates and scores every model's retrieval results over the
// cohort, keeping the given model order. Queries outside the cohort are
// ignored and neighbours outside it are skipped; queries left without
// neighbours are reported as unscored.
MetricsReport evaluate_results(const Cohort& cohort, const ModelResults& results,
                               const EvalOptions& options);

// Organ x model matrix of macro-F1 for one n.
ScoreMatrix organ_matrix(const MetricsReport& report, std::size_t n);
// Diagnosis x model matrix of per-label F1 for one n.
ScoreMatrix diagnosis_matrix(const MetricsReport& report, std::size_t n);

// per_diagnosis.csv, per_organ.csv, summary.csv, wins.csv,
// misclassification.csv, predictions.csv, excluded.csv. Returns the same
// tables as JSON.
nlohmann::json write_report_tables(const std::filesystem::path& dir,
                                   const MetricsReport& report,
                                   const Cohort& cohort);

struct TTestRow {
  std::size_t n = 1;
  std::string baseline;
  std::string model;
  std::string status;  // "ok" or "degenerate"
  stats::PairedTestResult test;
  std::size_t rank = 0;
  double threshold = 0.0;
  bool rejected = false;
};

// Baseline-vs-each paired t-tests over shared organs, Holm-corrected per n.
// Reads the per_organ.csv shape (model,n,organ,macro_f1,...).
std::vector<TTestRow> ttests_from_per_organ(const std::filesystem::path& path,
                                            const std::string& baseline,
                                            double alpha);
std::vector<TTestRow> ttests_from_report(const MetricsReport& report,
                                         const std::string& baseline,
                                         double alpha);
void write_ttests(const std::filesystem::path& path,
                  const std::vector<TTestRow>& rows);
nlohmann::json ttests_json(const std::vector<TTestRow>& rows);

struct ThresholdRow {
  std::string model;
  std::size_t n = 1;
  std::string x_status;
  std::string y_status;
  stats::GmmThreshold x;  // case count axis
  stats::GmmThreshold y;  // F1 axis
};

struct GmmAxisOptions {
  stats::GmmOptions gmm;
  bool log_x = false;  // fit log(1 + support) instead of raw counts
};

// Per (model, n): GMM cut-offs on support and on F1 across diagnoses with
// support > 0. Reads the per_diagnosis.csv shape.
std::vector<ThresholdRow> thresholds_from_per_diagnosis(
    const std::filesystem::path& path, const GmmAxisOptions& options);
std::vector<ThresholdRow> thresholds_from_report(const MetricsReport& report,
                                                 const GmmAxisOptions& options);
void write_thresholds(const std::filesystem::path& path,
                      const std::vector<ThresholdRow>& rows);
nlohmann::json thresholds_json(const std::vector<ThresholdRow>& rows);

}  // namespace slidesearch
