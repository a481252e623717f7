// slidesearch: whole-slide retrieval benchmark driver.
//
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "slidesearch/barcode.hpp"
#include "slidesearch/cohort.hpp"
#include "slidesearch/csv.hpp"
#include "slidesearch/error.hpp"
#include "slidesearch/eval.hpp"
#include "slidesearch/mosaic.hpp"
#include "slidesearch/pipeline.hpp"
#include "slidesearch/report.hpp"
#include "slidesearch/synth.hpp"
#include "slidesearch/vector_search.hpp"

namespace fs = std::filesystem;
using namespace slidesearch;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

void apply_thread_env() {
  if (const char* env = std::getenv("SLIDESEARCH_THREADS")) {
    const int n = std::atoi(env);
    if (n <= 0) throw ConfigError("SLIDESEARCH_THREADS must be a positive integer");
    omp_set_num_threads(n);
  }
}

void write_cohort_outputs(const fs::path& dir, const Cohort& cohort,
                          const FoldAssignment* folds) {
  fs::create_directories(dir);
  write_manifest(dir / "cohort.csv", cohort.slides);
  {
    std::ofstream out(dir / "labels.csv", std::ios::binary);
    out << "organ,diagnosis,patients\n";
    for (const auto& [label, n] : cohort.patients_per_label) {
      csv::write_record(out, {label.organ, label.diagnosis, std::to_string(n)});
    }
  }
  {
    std::ofstream out(dir / "excluded.csv", std::ios::binary);
    out << "slide_id,patient_id,organ,diagnosis,reason\n";
    for (const auto& e : cohort.excluded) {
      csv::write_record(out, {e.slide.slide_id, e.slide.patient_id, e.slide.organ,
                              e.slide.diagnosis, e.reason});
    }
  }
  if (folds) {
    std::ofstream out(dir / "folds.csv", std::ios::binary);
    out << "patient_id,fold,organ,diagnosis\n";
    for (const auto& [patient, fold] : folds->fold_of_patient) {
      const auto& s = folds->stratum_of_patient.at(patient);
      csv::write_record(out, {patient, std::to_string(fold), s.organ, s.diagnosis});
    }
  }
}

void print_results(std::ostream& out, const std::vector<RetrievalResult>& rs) {
  out << "query_slide,rank,neighbor_slide,distance\n";
  for (const auto& r : rs) {
    for (std::size_t i = 0; i < r.neighbors.size(); ++i) {
      csv::write_record(out, {r.query_slide_id, std::to_string(i + 1),
                              r.neighbors[i].slide_id,
                              csv::format_double(r.neighbors[i].distance)});
    }
  }
}

void warn_shortfall(const std::vector<RetrievalResult>& rs, std::size_t n) {
  std::size_t short_count = 0;
  for (const auto& r : rs) short_count += r.shortfall;
  if (short_count) {
    std::cerr << "warning: " << short_count << " queries had fewer than " << n
              << " candidates\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-slide image retrieval and benchmarking"};
  app.require_subcommand(1);

  // synth
  SynthSpec spec;
  fs::path synth_out = "data";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth->add_option("--organs", spec.organs);
  synth->add_option("--diagnoses", spec.diagnoses, "Diagnoses per organ");
  synth->add_option("--patients", spec.patients, "Patients per diagnosis");
  synth->add_option("--slides", spec.slides, "Slides per patient");
  synth->add_option("--patches", spec.patches, "Patches per slide");
  synth->add_option("--dim", spec.dim, "Embedding dimension");
  synth->add_option("--sep", spec.separation, "Class separation in noise sds");
  synth->add_option("--seed", spec.seed);
  synth->add_option("--out", synth_out);

  // cohort
  fs::path manifest;
  fs::path out_dir = "report";
  std::size_t min_patients = 4, min_diagnoses = 2, folds_k = 0;
  std::uint64_t seed = 0;
  auto* cohort_cmd = app.add_subcommand("cohort", "Apply exclusion criteria");
  cohort_cmd->add_option("--manifest", manifest)->required();
  cohort_cmd->add_option("--min-patients", min_patients);
  cohort_cmd->add_option("--min-diagnoses", min_diagnoses);
  cohort_cmd->add_option("--folds", folds_k, "Also write patient-grouped folds");
  cohort_cmd->add_option("--seed", seed);
  cohort_cmd->add_option("--out", out_dir);

  // mosaic
  double rate = 0.2;
  std::size_t k_chroma = kDefaultChromaticClusters;
  auto* mosaic_cmd = app.add_subcommand("mosaic", "Select mosaic patches per slide");
  mosaic_cmd->add_option("--manifest", manifest)->required();
  mosaic_cmd->add_option("--rate", rate);
  mosaic_cmd->add_option("--k-chroma", k_chroma);
  mosaic_cmd->add_option("--seed", seed);
  mosaic_cmd->add_option("--out", out_dir)->required();

  // index build | search
  fs::path mosaic_dir, index_path = "index.bob", results_out;
  std::string query;
  bool search_all = false, normalize = false;
  std::size_t n = 3;
  auto* index_cmd = app.add_subcommand("index", "Barcode index");
  index_cmd->require_subcommand(1);
  auto* build = index_cmd->add_subcommand("build", "Barcode mosaics into a BoB index");
  build->add_option("--manifest", manifest)->required();
  build->add_option("--mosaic", mosaic_dir)->required();
  build->add_option("--out", index_path);
  auto* search = index_cmd->add_subcommand("search", "Median-of-minimum Hamming search");
  search->add_option("--index", index_path);
  auto* qopt = search->add_option("--query", query, "Query slide id");
  search->add_flag("--all", search_all, "Search every indexed slide")->excludes(qopt);
  search->add_option("--n", n);
  search->add_flag("--normalize", normalize, "Divide distances by barcode length");
  search->add_option("--out", results_out, "CSV output (stdout when omitted)");

  // vsearch
  std::string model;
  auto* vsearch = app.add_subcommand("vsearch", "Slide-vector Euclidean search");
  vsearch->add_option("--manifest", manifest)->required();
  vsearch->add_option("--model", model)->required();
  vsearch->add_option("--n", n);
  vsearch->add_flag("--normalize", normalize, "L2-normalize vectors first");
  vsearch->add_option("--out", results_out)->required();

  // evaluate
  std::vector<std::string> result_files;
  std::vector<std::size_t> n_values{1, 3};
  std::string agg = "vote", default_model;
  auto* evaluate = app.add_subcommand("evaluate", "Score retrieval results");
  evaluate->add_option("--results", result_files)->required();
  evaluate->add_option("--manifest", manifest)->required();
  evaluate->add_option("--n", n_values)->delimiter(',');
  evaluate->add_option("--patient-agg", agg)
      ->check(CLI::IsMember({"vote", "best-slide", "per-slide"}));
  evaluate->add_option("--model-name", default_model,
                       "Model name for result files without a model column "
                       "(default: the file stem)");
  evaluate->add_option("--min-patients", min_patients);
  evaluate->add_option("--min-diagnoses", min_diagnoses);
  evaluate->add_option("--out", out_dir);

  // stats ttest | gmm
  fs::path scores_path, scatter_path, stats_out;
  std::string baseline;
  double alpha = 0.05;
  GmmAxisOptions gmm;
  auto* stats_cmd = app.add_subcommand("stats", "Significance tests and GMM cut-offs");
  stats_cmd->require_subcommand(1);
  auto* ttest = stats_cmd->add_subcommand("ttest", "Paired t-tests with Holm correction");
  ttest->add_option("--scores", scores_path, "per_organ.csv")->required();
  ttest->add_option("--baseline", baseline)->required();
  ttest->add_option("--alpha", alpha);
  ttest->add_option("--out", stats_out, "Defaults to ttests.csv next to --scores");
  auto* gmm_cmd = stats_cmd->add_subcommand("gmm", "Two-component GMM thresholds");
  gmm_cmd->add_option("--scatter", scatter_path, "per_diagnosis.csv")->required();
  gmm_cmd->add_option("--n-init", gmm.gmm.n_init);
  gmm_cmd->add_option("--seed", gmm.gmm.seed);
  gmm_cmd->add_flag("--log-x", gmm.log_x, "Fit log(1 + support) on the count axis");
  gmm_cmd->add_option("--out", stats_out, "Defaults to thresholds.csv next to --scatter");

  // run
  fs::path config_path;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "End-to-end benchmark");
  run->add_option("--config", config_path, "key = value config file");
  run->add_option("--set", overrides, "Override a config key (key=value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    apply_thread_env();

    if (*synth) {
      const fs::path m = generate(spec, synth_out);
      std::cout << m.string() << '\n';
    } else if (*cohort_cmd) {
      const Cohort cohort =
          apply_exclusions(load_manifest(manifest), min_patients, min_diagnoses);
      FoldAssignment folds;
      if (folds_k) {
        folds = grouped_stratified_folds(cohort, folds_k, seed);
        for (const auto& w : folds.warnings) std::cerr << "warning: " << w << '\n';
      }
      write_cohort_outputs(out_dir, cohort, folds_k ? &folds : nullptr);
      std::cout << "organ,slides,labels,patients\n";
      for (const auto& [organ, t] : organ_tally(cohort.slides)) {
        csv::write_record(std::cout, {organ, std::to_string(t.slides),
                                      std::to_string(t.labels),
                                      std::to_string(t.patients)});
      }
    } else if (*mosaic_cmd) {
      const auto slides = load_manifest(manifest);
      const auto mosaics = build_mosaics(slides, rate, k_chroma, seed);
      fs::create_directories(out_dir);
      for (const auto& m : mosaics) write_mosaic(out_dir / (m.slide_id + ".csv"), m);
    } else if (*build) {
      const auto slides = load_manifest(manifest);
      std::vector<IndexEntry> entries;
      for (const auto& s : slides) {
        const Mosaic m = read_mosaic(mosaic_dir / (s.slide_id + ".csv"));
        entries.push_back({s.slide_id, s.patient_id, s.label(),
                           make_bob(s.slide_id, read_feature_file(s.patch_features),
                                    m.selected_indices)});
      }
      write_index(index_path, BarcodeIndex(std::move(entries)));
    } else if (*search) {
      if (query.empty() && !search_all) throw ConfigError("give --query or --all");
      const BarcodeIndex index = read_index(index_path);
      std::vector<RetrievalResult> rs;
      if (search_all) {
        rs = bob_search_all(index, n, {normalize});
      } else {
        const std::size_t at = index.find(query);
        if (at == BarcodeIndex::npos) throw DataError("query slide '" + query + "' not in index");
        const auto& e = index.at(at);
        rs.push_back(bob_search({&e.bob, e.patient_id, e.label.organ}, index, n,
                                {normalize}));
      }
      warn_shortfall(rs, n);
      if (results_out.empty()) {
        print_results(std::cout, rs);
      } else {
        write_results(results_out.string(), rs, false);
      }
    } else if (*vsearch) {
      VectorPool pool = load_vector_pool(load_manifest(manifest), model);
      if (normalize) pool.normalize();
      const auto rs = knn_search_all(pool, n);
      warn_shortfall(rs, n);
      write_results(results_out.string(), rs, true);
    } else if (*evaluate) {
      const Cohort cohort =
          apply_exclusions(load_manifest(manifest), min_patients, min_diagnoses);
      ModelResults results;
      for (const auto& file : result_files) {
        const std::string fallback =
            default_model.empty() ? fs::path(file).stem().string() : default_model;
        for (auto& r : read_results(file, fallback)) {
          auto it = std::find_if(results.begin(), results.end(),
                                 [&](const auto& p) { return p.first == r.model_name; });
          if (it == results.end()) {
            results.emplace_back(r.model_name, std::vector<RetrievalResult>{});
            it = std::prev(results.end());
          }
          it->second.push_back(std::move(r));
        }
      }
      EvalOptions options;
      options.n_values = n_values;
      options.aggregation = parse_patient_aggregation(agg);
      const MetricsReport report = evaluate_results(cohort, results, options);
      nlohmann::json j;
      j["config"] = {{"manifest", manifest.string()}, {"results", result_files},
                     {"n", n_values}, {"patient_agg", agg},
                     {"min_patients", min_patients}, {"min_diagnoses", min_diagnoses}};
      j["seeds"] = nlohmann::json::object();
      j["tables"] = write_report_tables(out_dir, report, cohort);
      std::ofstream(out_dir / "report.json", std::ios::binary) << j.dump(2) << '\n';
    } else if (*ttest) {
      const auto rows = ttests_from_per_organ(scores_path, baseline, alpha);
      if (stats_out.empty()) stats_out = scores_path.parent_path() / "ttests.csv";
      write_ttests(stats_out, rows);
    } else if (*gmm_cmd) {
      const auto rows = thresholds_from_per_diagnosis(scatter_path, gmm);
      if (stats_out.empty()) stats_out = scatter_path.parent_path() / "thresholds.csv";
      write_thresholds(stats_out, rows);
    } else if (*run) {
      RunConfig config;
      if (!config_path.empty()) config = load_config(config_path);
      if (!overrides.empty()) {
        std::string text = serialize_config(config);
        for (const auto& o : overrides) text += o + "\n";
        config = parse_config(text);
      }
      const RunSummary s = run_benchmark(config);
      std::cout << "report: " << s.report_json.string() << '\n'
                << "queries: " << s.queries << ", excluded: " << s.excluded << '\n'
                << "neighbours: " << s.total_neighbors
                << ", same-patient: " << s.same_patient_neighbors
                << ", cross-organ: " << s.cross_organ_neighbors << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
