#include "slidesearch/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "slidesearch/barcode.hpp"
#include "slidesearch/cohort.hpp"
#include "slidesearch/csv.hpp"
#include "slidesearch/error.hpp"
#include "slidesearch/mosaic.hpp"
#include "slidesearch/report.hpp"
#include "slidesearch/seed.hpp"
#include "slidesearch/vector_search.hpp"

#ifndef SLIDESEARCH_VERSION
#define SLIDESEARCH_VERSION "0.0.0"
#endif

namespace slidesearch {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string_view rest = value;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string item = trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' must be true or false");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    if constexpr (std::is_floating_point_v<T>) {
      return static_cast<T>(csv::parse_double(v));
    } else {
      const long long x = csv::parse_int(v);
      if (x < 0) throw DataError("negative");
      return static_cast<T>(x);
    }
  } catch (const DataError&) {
    throw ConfigError("config: bad value for '" + key + "': '" + v + "'");
  }
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += f(xs[i]);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key == "manifest") {
      c.manifest = value;
    } else if (key == "out") {
      c.out_dir = value;
    } else if (key == "vector_models") {
      c.vector_models = split_list(value);
    } else if (key == "barcode_rates") {
      c.barcode_rates.clear();
      for (const auto& r : split_list(value)) c.barcode_rates.push_back(parse_number<double>(key, r));
    } else if (key == "n") {
      c.n_values.clear();
      for (const auto& r : split_list(value)) c.n_values.push_back(parse_number<std::size_t>(key, r));
    } else if (key == "seed") {
      c.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "k_chroma") {
      c.k_chroma = parse_number<std::size_t>(key, value);
    } else if (key == "min_patients") {
      c.min_patients = parse_number<std::size_t>(key, value);
    } else if (key == "min_diagnoses") {
      c.min_diagnoses = parse_number<std::size_t>(key, value);
    } else if (key == "patient_agg") {
      c.aggregation = parse_patient_aggregation(value);
    } else if (key == "normalize_vectors") {
      c.normalize_vectors = parse_bool(key, value);
    } else if (key == "normalize_hamming") {
      c.normalize_hamming = parse_bool(key, value);
    } else if (key == "baseline") {
      c.baseline = value;
    } else if (key == "alpha") {
      c.alpha = parse_number<double>(key, value);
    } else if (key == "gmm_n_init") {
      c.gmm_n_init = parse_number<std::size_t>(key, value);
    } else if (key == "resume") {
      c.resume = parse_bool(key, value);
    } else {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "manifest = " << c.manifest.string() << '\n'
      << "out = " << c.out_dir.string() << '\n'
      << "vector_models = " << join(c.vector_models, [](const auto& s) { return s; })
      << '\n'
      << "barcode_rates = "
      << join(c.barcode_rates, [](double r) { return csv::format_double(r); }) << '\n'
      << "n = " << join(c.n_values, [](std::size_t n) { return std::to_string(n); })
      << '\n'
      << "seed = " << c.seed << '\n'
      << "k_chroma = " << c.k_chroma << '\n'
      << "min_patients = " << c.min_patients << '\n'
      << "min_diagnoses = " << c.min_diagnoses << '\n'
      << "patient_agg = " << to_string(c.aggregation) << '\n'
      << "normalize_vectors = " << (c.normalize_vectors ? "true" : "false") << '\n'
      << "normalize_hamming = " << (c.normalize_hamming ? "true" : "false") << '\n'
      << "baseline = " << c.baseline << '\n'
      << "alpha = " << csv::format_double(c.alpha) << '\n'
      << "gmm_n_init = " << c.gmm_n_init << '\n'
      << "resume = " << (c.resume ? "true" : "false") << '\n';
  return out.str();
}

void validate(const RunConfig& c) {
  if (c.manifest.empty()) throw ConfigError("config: manifest is required");
  if (c.vector_models.empty() && c.barcode_rates.empty()) {
    throw ConfigError("config: at least one model (vector model or barcode rate)");
  }
  for (double r : c.barcode_rates) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("config: rates must be in (0, 1]");
  }
  if (c.n_values.empty()) throw ConfigError("config: at least one n value");
  for (auto n : c.n_values) {
    if (n == 0) throw ConfigError("config: n values must be >= 1");
  }
  if (c.k_chroma == 0) throw ConfigError("config: k_chroma must be >= 1");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("config: alpha must be in (0, 1)");
  if (c.gmm_n_init == 0) throw ConfigError("config: gmm_n_init must be >= 1");
}

std::string barcode_model_name(double rate) {
  return "bob@" + csv::format_double(rate);
}

namespace {

BarcodeIndex build_index(const std::vector<SlideRecord>& slides,
                         const std::vector<Mosaic>& mosaics) {
  std::vector<IndexEntry> entries(slides.size());
  std::string error;
  const auto m = static_cast<std::ptrdiff_t>(slides.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const auto& s = slides[i];
    try {
      const FeatureBlock block = read_feature_file(s.patch_features);
      entries[i] = {s.slide_id, s.patient_id, s.label(),
                    make_bob(s.slide_id, block, mosaics[i].selected_indices)};
    } catch (const std::exception& e) {
#pragma omp critical(index_error)
      if (error.empty()) error = "index stage, slide '" + s.slide_id + "': " + e.what();
    }
  }
  if (!error.empty()) throw DataError(error);
  return BarcodeIndex(std::move(entries));
}

std::vector<Mosaic> mosaics_for_rate(const RunConfig& c, const Cohort& cohort,
                                     double rate, const fs::path& dir) {
  const auto file_of = [&](const SlideRecord& s) { return dir / (s.slide_id + ".csv"); };
  if (c.resume) {
    bool all = true;
    for (const auto& s : cohort.slides) all = all && fs::exists(file_of(s));
    if (all) {
      std::vector<Mosaic> out;
      for (const auto& s : cohort.slides) {
        Mosaic m = read_mosaic(file_of(s));
        m.slide_id = s.slide_id;
        m.rate = rate;
        out.push_back(std::move(m));
      }
      return out;
    }
  }
  auto mosaics = build_mosaics(cohort.slides, rate, c.k_chroma, c.seed);
  fs::create_directories(dir);
  for (std::size_t i = 0; i < mosaics.size(); ++i) {
    write_mosaic(file_of(cohort.slides[i]), mosaics[i]);
  }
  return mosaics;
}

}  // namespace

RunSummary run_benchmark(const RunConfig& config) {
  validate(config);
  const auto slides = load_manifest(config.manifest);
  const Cohort cohort =
      apply_exclusions(slides, config.min_patients, config.min_diagnoses);
  if (cohort.slides.empty()) throw DataError("cohort stage: no slides survive exclusions");
  fs::create_directories(config.out_dir);
  write_text(config.out_dir / "run.conf", serialize_config(config));

  const std::size_t depth =
      *std::max_element(config.n_values.begin(), config.n_values.end());
  ModelResults results;

  for (double rate : config.barcode_rates) {
    const std::string model = barcode_model_name(rate);
    const auto mosaics =
        mosaics_for_rate(config, cohort, rate, config.out_dir / "mosaics" / model);
    const fs::path index_path = config.out_dir / "index" / (model + ".bob");
    BarcodeIndex index;
    if (config.resume && fs::exists(index_path)) {
      index = read_index(index_path);
    } else {
      index = build_index(cohort.slides, mosaics);
      fs::create_directories(index_path.parent_path());
      write_index(index_path, index);
    }
    auto rs = bob_search_all(index, depth, {config.normalize_hamming});
    for (auto& r : rs) r.model_name = model;
    results.emplace_back(model, std::move(rs));
  }
  for (const auto& model : config.vector_models) {
    VectorPool pool = load_vector_pool(cohort.slides, model);
    if (config.normalize_vectors) pool.normalize();
    results.emplace_back(model, knn_search_all(pool, depth));
  }

  fs::create_directories(config.out_dir / "results");
  RunSummary summary;
  const SlideMetaMap meta = make_meta(cohort.slides);
  for (const auto& [model, rs] : results) {
    write_results((config.out_dir / "results" / (model + ".csv")).string(), rs, true);
    for (const auto& r : rs) {
      const auto& q = meta.at(r.query_slide_id);
      for (const auto& nb : r.neighbors) {
        const auto& m = meta.at(nb.slide_id);
        ++summary.total_neighbors;
        if (m.patient_id == q.patient_id) ++summary.same_patient_neighbors;
        if (m.label.organ != q.label.organ) ++summary.cross_organ_neighbors;
      }
    }
  }

  EvalOptions eval;
  eval.n_values = config.n_values;
  eval.aggregation = config.aggregation;
  MetricsReport report;
  try {
    report = evaluate_results(cohort, results, eval);
  } catch (const DataError& e) {
    throw DataError(std::string("evaluate stage: ") + e.what());
  }

  json j;
  j["generated_at"] = static_cast<long long>(std::time(nullptr));
  j["version"] = SLIDESEARCH_VERSION;
  j["config"] = serialize_config(config);
  j["seeds"] = {{"master", config.seed},
                {"mosaic", "derive_seed(master, \"mosaic\", slide_id)"},
                {"gmm", derive_seed(config.seed, "gmm")}};
  j["cohort"] = {{"input_slides", slides.size()},
                 {"slides", cohort.slides.size()},
                 {"labels", cohort.labels.size()},
                 {"organs", cohort.labels_per_organ.size()}};
  j["tables"] = write_report_tables(config.out_dir, report, cohort);
  j["lopo"] = {{"neighbors", summary.total_neighbors},
               {"same_patient", summary.same_patient_neighbors},
               {"cross_organ", summary.cross_organ_neighbors}};

  if (report.models.size() >= 2) {
    const std::string baseline =
        config.baseline.empty() ? report.models.front() : config.baseline;
    const auto tt = ttests_from_report(report, baseline, config.alpha);
    write_ttests(config.out_dir / "ttests.csv", tt);
    j["ttests"] = ttests_json(tt);
  }
  GmmAxisOptions gmm;
  gmm.gmm.n_init = config.gmm_n_init;
  gmm.gmm.seed = derive_seed(config.seed, "gmm");
  const auto th = thresholds_from_report(report, gmm);
  write_thresholds(config.out_dir / "thresholds.csv", th);
  j["thresholds"] = thresholds_json(th);

  summary.report_json = config.out_dir / "report.json";
  write_text(summary.report_json, j.dump(2) + "\n");
  summary.queries = cohort.slides.size();
  summary.excluded = cohort.excluded.size() + report.unscored.size();
  return summary;
}

}  // namespace slidesearch
