#include "slidesearch/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_set>

#include "slidesearch/csv.hpp"
#include "slidesearch/error.hpp"

namespace slidesearch {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string fmt(double v) { return csv::format_double(v); }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

MetricsReport evaluate_results(const Cohort& cohort, const ModelResults& results,
                               const EvalOptions& options) {
  if (options.n_values.empty()) throw ConfigError("evaluate: no n values");
  const SlideMetaMap meta = make_meta(cohort.slides);
  std::map<std::string, const SlideRecord*> by_id;
  for (const auto& s : cohort.slides) by_id[s.slide_id] = &s;

  MetricsReport report;
  for (const auto& [model, rs] : results) {
    report.models.push_back(model);
    // Restrict to cohort queries and cohort neighbours once per model.
    std::vector<RetrievalResult> usable;
    for (const auto& r : rs) {
      auto q = by_id.find(r.query_slide_id);
      if (q == by_id.end()) continue;
      RetrievalResult kept = r;
      kept.neighbors.clear();
      for (const auto& nb : r.neighbors) {
        if (meta.contains(nb.slide_id)) kept.neighbors.push_back(nb);
      }
      if (kept.neighbors.empty()) {
        report.unscored.push_back(
            {*q->second, "model " + model + ": no candidates after organ and "
                                            "patient filters"});
        continue;
      }
      usable.push_back(std::move(kept));
    }
    std::sort(usable.begin(), usable.end(), [](const auto& a, const auto& b) {
      return a.query_slide_id < b.query_slide_id;
    });

    for (std::size_t n : options.n_values) {
      std::vector<Prediction> slide_preds;
      slide_preds.reserve(usable.size());
      for (const auto& r : usable) slide_preds.push_back(majority_vote(r, meta, n));
      ModelRun run;
      run.model = model;
      run.n = n;
      run.predictions = aggregate_patients(slide_preds, options.aggregation);
      run.scores = score_by_organ(run.predictions);
      std::vector<double> macro;
      for (const auto& [organ, v] : run.scores.macro_f1) macro.push_back(v);
      if (!macro.empty()) run.summary = organ_summary(macro);
      report.misclassification[{model, n}] = misclassification_profile(
          run.predictions, options.misclass_lo, options.misclass_hi);
      report.runs.push_back(std::move(run));
    }
  }

  for (std::size_t n : options.n_values) {
    for (WinLevel level : {WinLevel::kOrgan, WinLevel::kDiagnosis}) {
      const ScoreMatrix m = level == WinLevel::kOrgan ? organ_matrix(report, n)
                                                      : diagnosis_matrix(report, n);
      report.wins.push_back({n, level == WinLevel::kOrgan ? "organ" : "diagnosis",
                             m.models, win_counts(m, level)});
    }
  }
  return report;
}

ScoreMatrix organ_matrix(const MetricsReport& report, std::size_t n) {
  ScoreMatrix m;
  m.models = report.models;
  std::set<std::string> organs;
  for (const auto& run : report.runs) {
    if (run.n != n) continue;
    for (const auto& [organ, v] : run.scores.macro_f1) organs.insert(organ);
  }
  m.rows.assign(organs.begin(), organs.end());
  m.values.assign(m.rows.size() * m.models.size(), kNaN);
  for (std::size_t mi = 0; mi < m.models.size(); ++mi) {
    for (const auto& run : report.runs) {
      if (run.n != n || run.model != m.models[mi]) continue;
      for (std::size_t r = 0; r < m.rows.size(); ++r) {
        auto it = run.scores.macro_f1.find(m.rows[r]);
        if (it != run.scores.macro_f1.end()) {
          m.values[r * m.models.size() + mi] = it->second;
        }
      }
    }
  }
  return m;
}

ScoreMatrix diagnosis_matrix(const MetricsReport& report, std::size_t n) {
  ScoreMatrix m;
  m.models = report.models;
  std::map<DiagnosisLabel, std::size_t> row_of;
  for (const auto& run : report.runs) {
    if (run.n != n) continue;
    for (const auto& [organ, labels] : run.scores.per_label) {
      for (const auto& s : labels) {
        if (s.support > 0) row_of.emplace(s.label, 0);
      }
    }
  }
  std::size_t r = 0;
  for (auto& [label, idx] : row_of) {
    idx = r++;
    m.rows.push_back(label.organ + "/" + label.diagnosis);
  }
  m.values.assign(m.rows.size() * m.models.size(), kNaN);
  for (std::size_t mi = 0; mi < m.models.size(); ++mi) {
    for (const auto& run : report.runs) {
      if (run.n != n || run.model != m.models[mi]) continue;
      for (const auto& [organ, labels] : run.scores.per_label) {
        for (const auto& s : labels) {
          auto it = row_of.find(s.label);
          if (s.support > 0 && it != row_of.end()) {
            m.values[it->second * m.models.size() + mi] = s.f1;
          }
        }
      }
    }
  }
  return m;
}

json write_report_tables(const fs::path& dir, const MetricsReport& report,
                         const Cohort& cohort) {
  fs::create_directories(dir);
  json j;

  {
    auto out = open_out(dir / "per_diagnosis.csv");
    out << "model,n,organ,diagnosis,support,tp,fp,fn,precision,recall,f1\n";
    json rows = json::array();
    for (const auto& run : report.runs) {
      for (const auto& [organ, labels] : run.scores.per_label) {
        for (const auto& s : labels) {
          csv::write_record(out, {run.model, std::to_string(run.n), s.label.organ,
                                  s.label.diagnosis, std::to_string(s.support),
                                  std::to_string(s.tp), std::to_string(s.fp),
                                  std::to_string(s.fn), fmt(s.precision),
                                  fmt(s.recall), fmt(s.f1)});
          rows.push_back({{"model", run.model}, {"n", run.n},
                          {"organ", s.label.organ}, {"diagnosis", s.label.diagnosis},
                          {"support", s.support}, {"tp", s.tp}, {"fp", s.fp},
                          {"fn", s.fn}, {"precision", s.precision},
                          {"recall", s.recall}, {"f1", s.f1}});
        }
      }
    }
    j["per_diagnosis"] = std::move(rows);
  }

  {
    auto out = open_out(dir / "per_organ.csv");
    out << "model,n,organ,macro_f1,labels,support\n";
    json rows = json::array();
    for (const auto& run : report.runs) {
      for (const auto& [organ, macro] : run.scores.macro_f1) {
        std::size_t labels = 0, support = 0;
        for (const auto& s : run.scores.per_label.at(organ)) {
          if (s.support == 0) continue;
          ++labels;
          support += s.support;
        }
        csv::write_record(out, {run.model, std::to_string(run.n), organ, fmt(macro),
                                std::to_string(labels), std::to_string(support)});
        rows.push_back({{"model", run.model}, {"n", run.n}, {"organ", organ},
                        {"macro_f1", macro}, {"labels", labels},
                        {"support", support}});
      }
    }
    j["per_organ"] = std::move(rows);
  }

  {
    auto out = open_out(dir / "summary.csv");
    out << "model,n,organs,mean,sd,ci_low,ci_high,display\n";
    json rows = json::array();
    for (const auto& run : report.runs) {
      const auto& s = run.summary;
      const std::string display =
          csv::format_fixed(s.mean, 3) + " +/- " + csv::format_fixed(s.sd, 2) +
          " [" + csv::format_fixed(std::clamp(s.ci_low, 0.0, 1.0), 3) + ", " +
          csv::format_fixed(std::clamp(s.ci_high, 0.0, 1.0), 3) + "]";
      csv::write_record(out, {run.model, std::to_string(run.n), std::to_string(s.n),
                              fmt(s.mean), fmt(s.sd), fmt(s.ci_low), fmt(s.ci_high),
                              display});
      rows.push_back({{"model", run.model}, {"n", run.n}, {"organs", s.n},
                      {"mean", s.mean}, {"sd", s.sd}, {"ci_low", s.ci_low},
                      {"ci_high", s.ci_high}});
    }
    j["summary"] = std::move(rows);
  }

  {
    auto out = open_out(dir / "wins.csv");
    out << "n,level,model,wins\n";
    json rows = json::array();
    for (const auto& w : report.wins) {
      for (std::size_t m = 0; m < w.models.size(); ++m) {
        csv::write_record(out, {std::to_string(w.n), w.level, w.models[m],
                                std::to_string(w.wins[m])});
        rows.push_back({{"n", w.n}, {"level", w.level}, {"model", w.models[m]},
                        {"wins", w.wins[m]}});
      }
    }
    j["wins"] = std::move(rows);
  }

  {
    auto out = open_out(dir / "misclassification.csv");
    out << "model,n,organ,true_diagnosis,support,predicted_diagnosis,count\n";
    json rows = json::array();
    for (const auto& model : report.models) {
      for (const auto& run : report.runs) {
        if (run.model != model) continue;
        const auto& profiles = report.misclassification.at({model, run.n});
        for (const auto& [label, prof] : profiles) {
          if (prof.errors.empty()) {
            csv::write_record(out, {model, std::to_string(run.n), label.organ,
                                    label.diagnosis, std::to_string(prof.support),
                                    "", "0"});
          }
          json errs = json::object();
          for (const auto& [pred, count] : prof.errors) {
            csv::write_record(out, {model, std::to_string(run.n), label.organ,
                                    label.diagnosis, std::to_string(prof.support),
                                    pred.diagnosis, std::to_string(count)});
            errs[pred.organ + "/" + pred.diagnosis] = count;
          }
          rows.push_back({{"model", model}, {"n", run.n}, {"organ", label.organ},
                          {"diagnosis", label.diagnosis}, {"support", prof.support},
                          {"errors", std::move(errs)}});
        }
      }
    }
    j["misclassification"] = std::move(rows);
  }

  {
    auto out = open_out(dir / "predictions.csv");
    out << "model,n,case_id,patient_id,organ,true_diagnosis,predicted_diagnosis,"
           "n_used\n";
    for (const auto& run : report.runs) {
      for (const auto& p : run.predictions) {
        csv::write_record(out, {run.model, std::to_string(run.n), p.query_id,
                                p.patient_id, p.true_label.organ,
                                p.true_label.diagnosis, p.predicted_label.diagnosis,
                                std::to_string(p.n_used)});
      }
    }
  }

  {
    auto out = open_out(dir / "excluded.csv");
    out << "slide_id,patient_id,organ,diagnosis,reason\n";
    json rows = json::array();
    const auto emit = [&](const ExcludedSlide& e) {
      csv::write_record(out, {e.slide.slide_id, e.slide.patient_id, e.slide.organ,
                              e.slide.diagnosis, e.reason});
      rows.push_back({{"slide_id", e.slide.slide_id}, {"reason", e.reason}});
    };
    for (const auto& e : cohort.excluded) emit(e);
    for (const auto& e : report.unscored) emit(e);
    j["excluded"] = std::move(rows);
  }
  return j;
}

namespace {

using OrganScoresByRun =
    std::map<std::pair<std::string, std::size_t>, std::map<std::string, double>>;

std::vector<TTestRow> ttests(const OrganScoresByRun& scores,
                             const std::vector<std::string>& models,
                             const std::string& baseline, double alpha) {
  std::set<std::size_t> ns;
  for (const auto& [key, v] : scores) ns.insert(key.second);
  std::vector<TTestRow> out;
  for (std::size_t n : ns) {
    auto base = scores.find({baseline, n});
    if (base == scores.end()) {
      throw ConfigError("baseline model '" + baseline + "' has no scores for n=" +
                        std::to_string(n));
    }
    std::vector<TTestRow> rows;
    for (const auto& model : models) {
      if (model == baseline) continue;
      auto other = scores.find({model, n});
      if (other == scores.end()) continue;
      std::vector<double> a, b;
      for (const auto& [organ, v] : base->second) {
        auto it = other->second.find(organ);
        if (it == other->second.end()) continue;
        a.push_back(v);
        b.push_back(it->second);
      }
      TTestRow row;
      row.n = n;
      row.baseline = baseline;
      row.model = model;
      row.test.model_a = baseline;
      row.test.model_b = model;
      row.test.n_pairs = a.size();
      try {
        row.test = stats::paired_t_test(a, b);
        row.test.model_a = baseline;
        row.test.model_b = model;
        row.status = "ok";
      } catch (const stats::DegenerateError&) {
        row.status = "degenerate";
        row.test.p_value = kNaN;
        row.test.t_stat = kNaN;
      } catch (const std::invalid_argument&) {
        row.status = "too-few-organs";
        row.test.p_value = kNaN;
        row.test.t_stat = kNaN;
      }
      rows.push_back(std::move(row));
    }
    std::vector<double> ps;
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].status != "ok") continue;
      ps.push_back(rows[i].test.p_value);
      which.push_back(i);
    }
    for (const auto& step : stats::holm_bonferroni(ps, alpha)) {
      auto& row = rows[which[step.input_index]];
      row.rank = step.rank;
      row.threshold = step.threshold;
      row.rejected = step.rejected;
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
      const std::size_t rx = x.rank ? x.rank : std::numeric_limits<std::size_t>::max();
      const std::size_t ry = y.rank ? y.rank : std::numeric_limits<std::size_t>::max();
      return rx < ry;
    });
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

}  // namespace

std::vector<TTestRow> ttests_from_report(const MetricsReport& report,
                                         const std::string& baseline,
                                         double alpha) {
  OrganScoresByRun scores;
  for (const auto& run : report.runs) {
    scores[{run.model, run.n}] = run.scores.macro_f1;
  }
  return ttests(scores, report.models, baseline, alpha);
}

std::vector<TTestRow> ttests_from_per_organ(const fs::path& path,
                                            const std::string& baseline,
                                            double alpha) {
  const csv::Table t = csv::read_table(path.string());
  const auto mc = t.column("model"), nc = t.column("n"), oc = t.column("organ"),
             fc = t.column("macro_f1");
  OrganScoresByRun scores;
  std::vector<std::string> models;
  for (const auto& row : t.rows) {
    if (std::find(models.begin(), models.end(), row[mc]) == models.end()) {
      models.push_back(row[mc]);
    }
    scores[{row[mc], static_cast<std::size_t>(csv::parse_int(row[nc]))}][row[oc]] =
        csv::parse_double(row[fc]);
  }
  return ttests(scores, models, baseline, alpha);
}

void write_ttests(const fs::path& path, const std::vector<TTestRow>& rows) {
  auto out = open_out(path);
  out << "n,baseline,model,status,n_pairs,mean_difference,t,df,p_raw,rank,"
         "threshold,rejected\n";
  for (const auto& r : rows) {
    csv::write_record(out, {std::to_string(r.n), r.baseline, r.model, r.status,
                            std::to_string(r.test.n_pairs),
                            fmt(r.test.mean_difference), fmt(r.test.t_stat),
                            std::to_string(r.test.df), fmt(r.test.p_value),
                            std::to_string(r.rank), fmt(r.threshold),
                            r.rejected ? "true" : "false"});
  }
}

json ttests_json(const std::vector<TTestRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"n", r.n}, {"baseline", r.baseline}, {"model", r.model},
                   {"status", r.status}, {"n_pairs", r.test.n_pairs},
                   {"t", num(r.test.t_stat)}, {"df", r.test.df},
                   {"p_raw", num(r.test.p_value)}, {"rank", r.rank},
                   {"threshold", r.threshold}, {"rejected", r.rejected}});
  }
  return out;
}

namespace {

struct AxisFit {
  std::string status;
  stats::GmmThreshold threshold;
};

AxisFit fit_axis(const std::vector<double>& data, const stats::GmmOptions& gmm) {
  AxisFit out;
  try {
    const auto fit = stats::fit_gmm_1d(data, gmm);
    out.threshold = stats::gmm_intersection(fit.components);
    out.status = out.threshold.has_root
                     ? (out.threshold.between_means ? "ok" : "outside-means")
                     : "no-crossing";
  } catch (const stats::DegenerateError&) {
    out.status = "degenerate";
    out.threshold.threshold = kNaN;
  } catch (const std::invalid_argument&) {
    out.status = data.size() < 4 ? "too-few-points" : "identical-means";
    out.threshold.threshold = kNaN;
  }
  return out;
}

using Scatter = std::map<std::pair<std::string, std::size_t>,
                         std::vector<std::pair<double, double>>>;

std::vector<ThresholdRow> thresholds(const Scatter& scatter,
                                     const std::vector<std::string>& models,
                                     const GmmAxisOptions& options) {
  std::vector<ThresholdRow> out;
  for (const auto& model : models) {
    for (const auto& [key, points] : scatter) {
      if (key.first != model) continue;
      std::vector<double> xs, ys;
      for (const auto& [x, y] : points) {
        xs.push_back(options.log_x ? std::log1p(x) : x);
        ys.push_back(y);
      }
      ThresholdRow row;
      row.model = model;
      row.n = key.second;
      const AxisFit fx = fit_axis(xs, options.gmm);
      const AxisFit fy = fit_axis(ys, options.gmm);
      row.x_status = fx.status;
      row.y_status = fy.status;
      row.x = fx.threshold;
      row.y = fy.threshold;
      if (options.log_x && std::isfinite(row.x.threshold)) {
        row.x.threshold = std::expm1(row.x.threshold);
      }
      out.push_back(row);
    }
  }
  return out;
}

}  // namespace

std::vector<ThresholdRow> thresholds_from_report(const MetricsReport& report,
                                                 const GmmAxisOptions& options) {
  Scatter scatter;
  for (const auto& run : report.runs) {
    auto& pts = scatter[{run.model, run.n}];
    for (const auto& [organ, labels] : run.scores.per_label) {
      for (const auto& s : labels) {
        if (s.support > 0) pts.emplace_back(static_cast<double>(s.support), s.f1);
      }
    }
  }
  return thresholds(scatter, report.models, options);
}

std::vector<ThresholdRow> thresholds_from_per_diagnosis(
    const fs::path& path, const GmmAxisOptions& options) {
  const csv::Table t = csv::read_table(path.string());
  const auto mc = t.column("model"), nc = t.column("n"), sc = t.column("support"),
             fc = t.column("f1");
  Scatter scatter;
  std::vector<std::string> models;
  for (const auto& row : t.rows) {
    if (std::find(models.begin(), models.end(), row[mc]) == models.end()) {
      models.push_back(row[mc]);
    }
    const double support = csv::parse_double(row[sc]);
    if (support <= 0.0) continue;
    scatter[{row[mc], static_cast<std::size_t>(csv::parse_int(row[nc]))}]
        .emplace_back(support, csv::parse_double(row[fc]));
  }
  return thresholds(scatter, models, options);
}

void write_thresholds(const fs::path& path, const std::vector<ThresholdRow>& rows) {
  auto out = open_out(path);
  out << "model,n,x_threshold,y_threshold,x_status,y_status,"
         "x_w1,x_mu1,x_sd1,x_w2,x_mu2,x_sd2,y_w1,y_mu1,y_sd1,y_w2,y_mu2,y_sd2\n";
  for (const auto& r : rows) {
    std::vector<std::string> rec = {r.model, std::to_string(r.n), fmt(r.x.threshold),
                                    fmt(r.y.threshold), r.x_status, r.y_status};
    for (const auto* t : {&r.x, &r.y}) {
      for (const auto& c : t->components) {
        rec.push_back(fmt(c.weight));
        rec.push_back(fmt(c.mean));
        rec.push_back(fmt(c.sd));
      }
    }
    csv::write_record(out, rec);
  }
}

json thresholds_json(const std::vector<ThresholdRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"model", r.model}, {"n", r.n},
                   {"x_threshold", num(r.x.threshold)},
                   {"y_threshold", num(r.y.threshold)},
                   {"x_status", r.x_status}, {"y_status", r.y_status}});
  }
  return out;
}

}  // namespace slidesearch
