#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "slidesearch/cohort.hpp"
#include "slidesearch/error.hpp"
#include "slidesearch/retrieval.hpp"

namespace slidesearch {

// Sum of squared differences accumulated in double, strictly left to right.
template <typename T>
double squared_euclidean(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) throw DataError("euclidean: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = static_cast<double>(u[i]) - static_cast<double>(v[i]);
    acc += d * d;
  }
  return acc;
}

template <typename T>
double euclidean(std::span<const T> u, std::span<const T> v) {
  const double r = std::sqrt(squared_euclidean(u, v));
  if (!std::isfinite(r)) throw DataError("euclidean: non-finite result");
  return r;
}

struct SlideVector {
  std::string slide_id;
  std::string patient_id;
  std::string organ;
  std::vector<float> vector;
};

// All slide-level embeddings of one model. Every vector shares `dim`.
class VectorPool {
 public:
  VectorPool() = default;
  VectorPool(std::string model_name, std::vector<SlideVector> entries);

  const std::string& model_name() const { return model_name_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<SlideVector>& entries() const { return entries_; }
  const SlideVector& at(std::size_t i) const { return entries_[i]; }

  // Scales every vector to unit L2 norm (zero vectors stay zero).
  void normalize();

 private:
  std::string model_name_;
  std::size_t dim_ = 0;
  std::vector<SlideVector> entries_;
};

// Loads `model`'s slide vector for every slide. Throws DataError when a
// slide has no vector for that model or dimensions disagree.
VectorPool load_vector_pool(const std::vector<SlideRecord>& slides,
                            const std::string& model);

// Exact same-organ, leave-one-patient-out n-nearest search. Ranks on squared
// distance; reported distances are true Euclidean. Candidate distances are
// computed OpenMP-parallel.
RetrievalResult knn_search(const SlideVector& query, const VectorPool& pool,
                           std::size_t n);
RetrievalResult knn_search_serial(const SlideVector& query,
                                  const VectorPool& pool, std::size_t n);

// Every pool entry as a query (query loop parallel).
std::vector<RetrievalResult> knn_search_all(const VectorPool& pool,
                                            std::size_t n);

}  // namespace slidesearch
