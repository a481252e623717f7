#include "slidesearch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "slidesearch/error.hpp"
#include "slidesearch/seed.hpp"
#include "slidesearch/stats.hpp"

namespace slidesearch {

SlideMetaMap make_meta(const std::vector<SlideRecord>& slides) {
  SlideMetaMap meta;
  for (const auto& s : slides) meta[s.slide_id] = {s.patient_id, s.label()};
  return meta;
}

namespace {

const SlideMeta& lookup(const SlideMetaMap& meta, const std::string& id) {
  auto it = meta.find(id);
  if (it == meta.end()) throw DataError("unknown slide '" + id + "'");
  return it->second;
}

// Label with the highest count; ties to the label seen first in `order`.
template <typename Key>
Key plurality(const std::vector<Key>& order) {
  std::map<Key, std::size_t> count;
  for (const auto& k : order) ++count[k];
  std::size_t best = 0;
  for (const auto& [k, c] : count) best = std::max(best, c);
  for (const auto& k : order) {
    if (count[k] == best) return k;
  }
  return order.front();
}

}  // namespace

Prediction majority_vote(const RetrievalResult& result, const SlideMetaMap& meta,
                         std::size_t n) {
  if (result.neighbors.empty()) {
    throw DataError("majority_vote: query '" + result.query_slide_id +
                    "' has no neighbours");
  }
  if (n == 0) throw ConfigError("majority_vote: n must be at least 1");
  const auto& q = lookup(meta, result.query_slide_id);
  const std::size_t used = std::min(n, result.neighbors.size());
  std::vector<DiagnosisLabel> ranked;
  ranked.reserve(used);
  for (std::size_t i = 0; i < used; ++i) {
    ranked.push_back(lookup(meta, result.neighbors[i].slide_id).label);
  }
  Prediction p;
  p.query_id = result.query_slide_id;
  p.patient_id = q.patient_id;
  p.true_label = q.label;
  p.predicted_label = plurality(ranked);
  p.n_used = used;
  p.rank1_distance = result.neighbors.front().distance;
  return p;
}

PatientAggregation parse_patient_aggregation(const std::string& text) {
  if (text == "vote") return PatientAggregation::kVote;
  if (text == "best-slide") return PatientAggregation::kBestSlide;
  if (text == "per-slide") return PatientAggregation::kPerSlide;
  throw ConfigError("patient aggregation must be vote, best-slide or per-slide");
}

std::string to_string(PatientAggregation mode) {
  switch (mode) {
    case PatientAggregation::kVote: return "vote";
    case PatientAggregation::kBestSlide: return "best-slide";
    case PatientAggregation::kPerSlide: return "per-slide";
  }
  return "vote";
}

std::vector<Prediction> aggregate_patients(std::span<const Prediction> preds,
                                           PatientAggregation mode) {
  std::vector<Prediction> out;
  if (mode == PatientAggregation::kPerSlide) {
    out.assign(preds.begin(), preds.end());
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.query_id < b.query_id; });
    return out;
  }
  std::map<std::pair<std::string, DiagnosisLabel>, std::vector<const Prediction*>>
      groups;
  for (const auto& p : preds) groups[{p.patient_id, p.true_label}].push_back(&p);
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [](const auto* a, const auto* b) {
      if (a->rank1_distance != b->rank1_distance) {
        return a->rank1_distance < b->rank1_distance;
      }
      return a->query_id < b->query_id;
    });
    Prediction agg = *members.front();
    agg.query_id = key.first;
    if (mode == PatientAggregation::kVote) {
      std::vector<DiagnosisLabel> ordered;
      for (const auto* m : members) ordered.push_back(m->predicted_label);
      agg.predicted_label = plurality(ordered);
    }
    out.push_back(std::move(agg));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.query_id != b.query_id) return a.query_id < b.query_id;
    return a.true_label < b.true_label;
  });
  // A patient with slides under two labels keeps one case per label; make
  // the ids distinct.
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    if (out[i].query_id == out[i + 1].query_id) {
      for (std::size_t j = i; j < out.size() && out[j].patient_id == out[i].patient_id;
           ++j) {
        out[j].query_id = out[j].patient_id + "|" + out[j].true_label.diagnosis;
      }
    }
  }
  return out;
}

std::vector<LabelScore> per_diagnosis_f1(std::span<const Prediction> preds,
                                         const std::string& organ) {
  std::map<DiagnosisLabel, LabelScore> table;
  for (const auto& p : preds) {
    if (p.true_label.organ != organ) continue;
    auto& t = table[p.true_label];
    t.label = p.true_label;
    auto& pr = table[p.predicted_label];
    pr.label = p.predicted_label;
    if (p.predicted_label == p.true_label) {
      ++t.tp;
    } else {
      ++t.fn;
      ++pr.fp;
    }
  }
  std::vector<LabelScore> out;
  out.reserve(table.size());
  for (auto& [label, s] : table) {
    s.support = s.tp + s.fn;
    const double tp = static_cast<double>(s.tp);
    s.precision = s.tp + s.fp ? tp / static_cast<double>(s.tp + s.fp) : 0.0;
    s.recall = s.support ? tp / static_cast<double>(s.support) : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    out.push_back(s);
  }
  return out;
}

double organ_macro_f1(std::span<const LabelScore> scores) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : scores) {
    if (s.support == 0) continue;
    sum += s.f1;
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

OrganScores score_by_organ(std::span<const Prediction> preds) {
  std::set<std::string> organs;
  for (const auto& p : preds) organs.insert(p.true_label.organ);
  OrganScores out;
  for (const auto& organ : organs) {
    auto scores = per_diagnosis_f1(preds, organ);
    out.macro_f1[organ] = organ_macro_f1(scores);
    out.per_label[organ] = std::move(scores);
  }
  return out;
}

OrganSummary organ_summary(std::span<const double> values, double confidence) {
  if (values.empty()) throw DataError("organ_summary: no organs");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ConfigError("organ_summary: confidence must be in (0, 1)");
  }
  OrganSummary s;
  s.n = values.size();
  s.mean = stats::mean(values);
  s.sd = stats::sample_sd(values);
  if (s.n < 2) {
    s.ci_low = s.ci_high = s.mean;
    return s;
  }
  const double t = stats::student_t_quantile(1.0 - (1.0 - confidence) / 2.0,
                                             static_cast<double>(s.n - 1));
  const double half = t * s.sd / std::sqrt(static_cast<double>(s.n));
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

std::vector<std::size_t> win_counts(const ScoreMatrix& scores, WinLevel level) {
  const std::size_t models = scores.models.size();
  std::vector<std::size_t> wins(models, 0);
  for (std::size_t r = 0; r < scores.rows.size(); ++r) {
    std::vector<double> rounded(models);
    double best = -std::numeric_limits<double>::infinity();
    bool any = false, all_zero = true, all_one = true;
    for (std::size_t m = 0; m < models; ++m) {
      const double v = scores.at(r, m);
      rounded[m] = std::isnan(v) ? v : std::round(v * 100.0) / 100.0;
      if (std::isnan(rounded[m])) continue;
      any = true;
      best = std::max(best, rounded[m]);
      all_zero = all_zero && rounded[m] == 0.0;
      all_one = all_one && rounded[m] == 1.0;
    }
    if (!any) continue;
    if (level == WinLevel::kDiagnosis && (all_zero || all_one)) continue;
    for (std::size_t m = 0; m < models; ++m) {
      if (!std::isnan(rounded[m]) && rounded[m] == best) ++wins[m];
    }
  }
  return wins;
}

std::map<DiagnosisLabel, MisclassificationProfile> misclassification_profile(
    std::span<const Prediction> preds, std::size_t support_lo,
    std::size_t support_hi) {
  std::map<DiagnosisLabel, std::size_t> support;
  for (const auto& p : preds) ++support[p.true_label];
  std::map<DiagnosisLabel, MisclassificationProfile> out;
  for (const auto& [label, n] : support) {
    if (n >= support_lo && n <= support_hi) out[label].support = n;
  }
  for (const auto& p : preds) {
    if (p.predicted_label == p.true_label) continue;
    auto it = out.find(p.true_label);
    if (it != out.end()) ++it->second.errors[p.predicted_label];
  }
  return out;
}

std::size_t FoldAssignment::fold_of(const SlideRecord& slide) const {
  auto it = fold_of_patient.find(slide.patient_id);
  if (it == fold_of_patient.end()) {
    throw DataError("patient '" + slide.patient_id + "' has no fold");
  }
  return it->second;
}

FoldAssignment grouped_stratified_folds(const Cohort& cohort, std::size_t k,
                                        std::uint64_t seed) {
  if (k < 2) throw ConfigError("grouped_stratified_folds: k must be at least 2");
  // Patient -> label counts, to pick each patient's stratum.
  std::map<std::string, std::map<DiagnosisLabel, std::size_t>> per_patient;
  for (const auto& s : cohort.slides) ++per_patient[s.patient_id][s.label()];

  FoldAssignment fa;
  fa.k = k;
  std::map<DiagnosisLabel, std::vector<std::string>> strata;
  for (const auto& [patient, counts] : per_patient) {
    const DiagnosisLabel* best = nullptr;
    std::size_t best_n = 0;
    for (const auto& [label, n] : counts) {
      if (n > best_n) {
        best = &label;
        best_n = n;
      }
    }
    fa.stratum_of_patient[patient] = *best;
    strata[*best].push_back(patient);
  }

  std::vector<const std::pair<const DiagnosisLabel, std::vector<std::string>>*> order;
  for (const auto& entry : strata) order.push_back(&entry);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->second.size() > b->second.size();
  });

  std::vector<std::size_t> overall(k, 0);
  for (const auto* entry : order) {
    const auto& label = entry->first;
    std::vector<std::string> patients = entry->second;
    if (patients.size() < k) {
      fa.warnings.push_back(label.organ + "/" + label.diagnosis + " has " +
                            std::to_string(patients.size()) +
                            " patients, fewer than " + std::to_string(k) +
                            " folds");
    }
    std::mt19937_64 rng(
        derive_seed(seed, "folds", label.organ + "\x1f" + label.diagnosis));
    // Fisher-Yates with our own index draw, independent of the standard
    // library's shuffle algorithm.
    for (std::size_t i = patients.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(patients[i - 1], patients[j]);
    }
    std::vector<std::size_t> local(k, 0);
    for (const auto& p : patients) {
      std::size_t f = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (local[c] < local[f] || (local[c] == local[f] && overall[c] < overall[f])) {
          f = c;
        }
      }
      fa.fold_of_patient[p] = f;
      ++local[f];
      ++overall[f];
    }
  }
  return fa;
}

OrganScores pooled_f1(const std::vector<std::vector<Prediction>>& folds) {
  std::vector<Prediction> all;
  for (const auto& f : folds) all.insert(all.end(), f.begin(), f.end());
  return score_by_organ(all);
}

}  // namespace slidesearch
