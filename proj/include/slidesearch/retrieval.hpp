#pragma once

#include <string>
#include <vector>

namespace slidesearch {

struct Neighbor {
  std::string slide_id;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// Ranked neighbours for one query: distance ascending, then slide_id
// ascending. `shortfall` is set when fewer than the requested n candidates
// were available after the organ and patient filters.
struct RetrievalResult {
  std::string query_slide_id;
  std::string model_name;
  std::vector<Neighbor> neighbors;
  bool shortfall = false;
};

// Strict ranking order shared by every search path.
inline bool ranks_before(double da, const std::string& ia, double db,
                         const std::string& ib) {
  if (da != db) return da < db;
  return ia < ib;
}

// CSV `query_slide,rank,neighbor_slide,distance[,model]`; rank is 1-based.
void write_results(const std::string& path,
                   const std::vector<RetrievalResult>& results,
                   bool with_model_column);
// Reads either shape. Without a model column every row gets
// `default_model`.
std::vector<RetrievalResult> read_results(const std::string& path,
                                          const std::string& default_model);

}  // namespace slidesearch
