#include "slidesearch/retrieval.hpp"

#include <fstream>
#include <algorithm>
#include <map>

#include "slidesearch/csv.hpp"
#include "slidesearch/error.hpp"

namespace slidesearch {

void write_results(const std::string& path,
                   const std::vector<RetrievalResult>& results,
                   bool with_model_column) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write results " + path);
  out << "query_slide,rank,neighbor_slide,distance";
  if (with_model_column) out << ",model";
  out << '\n';
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.neighbors.size(); ++i) {
      std::vector<std::string> row = {r.query_slide_id, std::to_string(i + 1),
                                      r.neighbors[i].slide_id,
                                      csv::format_double(r.neighbors[i].distance)};
      if (with_model_column) row.push_back(r.model_name);
      csv::write_record(out, row);
    }
  }
}

std::vector<RetrievalResult> read_results(const std::string& path,
                                          const std::string& default_model) {
  const csv::Table t = csv::read_table(path);
  const auto qc = t.column("query_slide");
  const auto rc = t.column("rank");
  const auto nc = t.column("neighbor_slide");
  const auto dc = t.column("distance");
  const bool has_model = t.has_column("model");
  const std::size_t mc = has_model ? t.column("model") : 0;

  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  std::vector<RetrievalResult> out;
  std::vector<std::vector<std::pair<std::size_t, Neighbor>>> ranked;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string model = has_model ? row[mc] : default_model;
    auto [it, fresh] = slot.emplace(std::make_pair(model, row[qc]), out.size());
    if (fresh) {
      RetrievalResult r;
      r.query_slide_id = row[qc];
      r.model_name = model;
      out.push_back(std::move(r));
      ranked.emplace_back();
    }
    const long long rank = csv::parse_int(row[rc]);
    if (rank < 1) {
      throw DataError(path + ":" + std::to_string(t.line_numbers[i]) +
                      ": rank must be >= 1");
    }
    ranked[it->second].push_back(
        {static_cast<std::size_t>(rank), {row[nc], csv::parse_double(row[dc])}});
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& rows = ranked[i];
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].first != j + 1) {
        throw DataError(path + ": ranks for query '" + out[i].query_slide_id +
                        "' are not 1..k");
      }
      out[i].neighbors.push_back(rows[j].second);
    }
  }
  return out;
}

}  // namespace slidesearch
