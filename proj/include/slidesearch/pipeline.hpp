#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slidesearch/eval.hpp"

namespace slidesearch {

// End-to-end benchmark configuration. Serialized as `key = value` lines;
// lists are comma-separated.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir = "report";
  std::vector<std::string> vector_models;
  std::vector<double> barcode_rates{0.05, 0.1, 0.2, 0.5, 1.0};
  std::vector<std::size_t> n_values{1, 3};
  std::uint64_t seed = 0;
  std::size_t k_chroma = 9;
  std::size_t min_patients = 4;
  std::size_t min_diagnoses = 2;
  PatientAggregation aggregation = PatientAggregation::kVote;
  bool normalize_vectors = false;
  bool normalize_hamming = false;
  std::string baseline;  // t-test reference; first model when empty
  double alpha = 0.05;
  std::size_t gmm_n_init = 10;
  bool resume = false;

  bool operator==(const RunConfig&) const = default;
};

// Throws ConfigError on unknown keys, bad values, or failed invariants.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);
void validate(const RunConfig& config);

// Display/model name of a barcode variant, e.g. "bob@0.2".
std::string barcode_model_name(double rate);

struct RunSummary {
  std::filesystem::path report_json;
  std::size_t queries = 0;
  std::size_t excluded = 0;
  // LOPO / organ violations counted over every emitted neighbour.
  std::size_t same_patient_neighbors = 0;
  std::size_t cross_organ_neighbors = 0;
  std::size_t total_neighbors = 0;
};

// cohort -> mosaics -> barcode index -> search, plus vector search, then
// evaluation, t-tests and GMM thresholds. Stage outputs land under
// out_dir; with `resume`, existing mosaic and index files are reused.
// Errors carry the failing stage and slide.
RunSummary run_benchmark(const RunConfig& config);

}  // namespace slidesearch
