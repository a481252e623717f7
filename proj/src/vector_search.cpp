#include "slidesearch/vector_search.hpp"

#include <algorithm>

#include "slidesearch/features.hpp"

namespace slidesearch {

VectorPool::VectorPool(std::string model_name, std::vector<SlideVector> entries)
    : model_name_(std::move(model_name)), entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (i == 0) {
      dim_ = e.vector.size();
    } else if (e.vector.size() != dim_) {
      throw DataError("model '" + model_name_ + "': slide '" + e.slide_id +
                      "' has dimension " + std::to_string(e.vector.size()) +
                      ", expected " + std::to_string(dim_));
    }
    for (float v : e.vector) {
      if (!std::isfinite(v)) {
        throw DataError("model '" + model_name_ + "': slide '" + e.slide_id +
                        "' has a non-finite entry");
      }
    }
  }
}

void VectorPool::normalize() {
  for (auto& e : entries_) {
    double norm2 = 0.0;
    for (float v : e.vector) norm2 += static_cast<double>(v) * v;
    if (norm2 <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (float& v : e.vector) v = static_cast<float>(v * inv);
  }
}

VectorPool load_vector_pool(const std::vector<SlideRecord>& slides,
                            const std::string& model) {
  std::vector<SlideVector> entries;
  entries.reserve(slides.size());
  for (const auto& s : slides) {
    auto it = s.slide_vectors.find(model);
    if (it == s.slide_vectors.end()) {
      throw DataError("vector stage, slide '" + s.slide_id +
                      "': no slide vector for model '" + model + "'");
    }
    try {
      entries.push_back({s.slide_id, s.patient_id, s.organ,
                         read_slide_vector(it->second)});
    } catch (const DataError& e) {
      throw DataError("vector stage, slide '" + s.slide_id + "': " + e.what());
    }
  }
  return VectorPool(model, std::move(entries));
}

namespace {

std::vector<std::size_t> candidates_for(const SlideVector& query,
                                        const VectorPool& pool) {
  if (query.vector.size() != pool.dim() && pool.size() > 0) {
    throw DataError("knn_search: query dimension differs from pool");
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& e = pool.at(i);
    if (e.organ == query.organ && e.patient_id != query.patient_id) out.push_back(i);
  }
  return out;
}

RetrievalResult rank(const SlideVector& query, const VectorPool& pool,
                     const std::vector<std::size_t>& cand,
                     const std::vector<double>& d2, std::size_t n) {
  std::vector<std::size_t> order(cand.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t keep = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return ranks_before(d2[a], pool.at(cand[a]).slide_id, d2[b],
                                          pool.at(cand[b]).slide_id);
                    });
  RetrievalResult r;
  r.query_slide_id = query.slide_id;
  r.model_name = pool.model_name();
  r.shortfall = cand.size() < n;
  for (std::size_t i = 0; i < keep; ++i) {
    const double d = std::sqrt(d2[order[i]]);
    if (!std::isfinite(d)) throw DataError("euclidean: non-finite result");
    r.neighbors.push_back({pool.at(cand[order[i]]).slide_id, d});
  }
  return r;
}

std::span<const float> view(const SlideVector& v) { return v.vector; }

}  // namespace

RetrievalResult knn_search(const SlideVector& query, const VectorPool& pool,
                           std::size_t n) {
  if (n == 0) throw ConfigError("knn_search: n must be at least 1");
  const auto cand = candidates_for(query, pool);
  std::vector<double> d2(cand.size());
  const auto m = static_cast<std::ptrdiff_t>(cand.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    d2[i] = squared_euclidean(view(query), view(pool.at(cand[i])));
  }
  return rank(query, pool, cand, d2, n);
}

RetrievalResult knn_search_serial(const SlideVector& query,
                                  const VectorPool& pool, std::size_t n) {
  if (n == 0) throw ConfigError("knn_search: n must be at least 1");
  const auto cand = candidates_for(query, pool);
  std::vector<double> d2(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    d2[i] = squared_euclidean(view(query), view(pool.at(cand[i])));
  }
  return rank(query, pool, cand, d2, n);
}

std::vector<RetrievalResult> knn_search_all(const VectorPool& pool, std::size_t n) {
  std::vector<RetrievalResult> out(pool.size());
  const auto m = static_cast<std::ptrdiff_t>(pool.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    out[i] = knn_search_serial(pool.at(i), pool, n);
  }
  return out;
}

}  // namespace slidesearch
