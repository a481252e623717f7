#include "slidesearch/barcode.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

namespace slidesearch {

Barcode::Barcode(std::size_t bits) : bits_(bits), words_(words_for_bits(bits), 0) {}

Barcode::Barcode(std::size_t bits, std::vector<std::uint64_t> words)
    : bits_(bits), words_(std::move(words)) {
  if (words_.size() != words_for_bits(bits_)) {
    throw DataError("barcode: word count does not match bit length");
  }
}

std::size_t hamming(const Barcode& a, const Barcode& b) {
  if (a.size() != b.size()) throw DataError("hamming: barcode length mismatch");
  return hamming_words(a.words(), b.words());
}

BoB::BoB(std::string slide_id, std::size_t bits)
    : slide_id_(std::move(slide_id)), bits_(bits), wpc_(words_for_bits(bits)) {}

BoB::BoB(std::string slide_id, const std::vector<Barcode>& codes)
    : slide_id_(std::move(slide_id)) {
  if (!codes.empty()) {
    bits_ = codes.front().size();
    wpc_ = words_for_bits(bits_);
  }
  for (const auto& c : codes) add(c);
}

void BoB::add(const Barcode& code) {
  if (count_ == 0 && bits_ == 0) {
    bits_ = code.size();
    wpc_ = words_for_bits(bits_);
  }
  if (code.size() != bits_) throw DataError("BoB: barcode length mismatch");
  words_.insert(words_.end(), code.words().begin(), code.words().end());
  ++count_;
}

Barcode BoB::code(std::size_t i) const {
  auto w = code_words(i);
  return Barcode(bits_, std::vector<std::uint64_t>(w.begin(), w.end()));
}

double slide_distance(const BoB& query, const BoB& candidate,
                      const SlideDistanceOptions& options) {
  if (query.empty() || candidate.empty()) {
    throw DataError("slide_distance: empty BoB");
  }
  if (query.bits() != candidate.bits()) {
    throw DataError("slide_distance: barcode length mismatch");
  }
  std::vector<std::size_t> minima(query.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    const auto qw = query.code_words(q);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t c = 0; c < candidate.size() && best != 0; ++c) {
      best = std::min(best, hamming_words(qw, candidate.code_words(c)));
    }
    minima[q] = best;
  }
  const std::size_t mid = minima.size() / 2;
  std::nth_element(minima.begin(), minima.begin() + mid, minima.end());
  double median = static_cast<double>(minima[mid]);
  if (minima.size() % 2 == 0) {
    const auto lower = *std::max_element(minima.begin(), minima.begin() + mid);
    median = (static_cast<double>(lower) + median) / 2.0;
  }
  if (options.normalize && query.bits() > 0) {
    median /= static_cast<double>(query.bits());
  }
  return median;
}

BarcodeIndex::BarcodeIndex(std::vector<IndexEntry> entries)
    : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.bob.empty()) {
      throw DataError("index: slide '" + e.slide_id + "' has an empty BoB");
    }
    if (i == 0) {
      bits_ = e.bob.bits();
    } else if (e.bob.bits() != bits_) {
      throw DataError("index: slide '" + e.slide_id +
                      "' has a different barcode length");
    }
    if (!by_slide_.emplace(e.slide_id, i).second) {
      throw DataError("index: duplicate slide '" + e.slide_id + "'");
    }
    by_organ_[e.label.organ].push_back(i);
  }
}

std::size_t BarcodeIndex::find(const std::string& slide_id) const {
  auto it = by_slide_.find(slide_id);
  return it == by_slide_.end() ? npos : it->second;
}

const std::vector<std::size_t>& BarcodeIndex::organ_entries(
    const std::string& organ) const {
  static const std::vector<std::size_t> kNone;
  auto it = by_organ_.find(organ);
  return it == by_organ_.end() ? kNone : it->second;
}

namespace {

std::vector<std::size_t> candidates_for(const BobQuery& query,
                                        const BarcodeIndex& index) {
  if (query.bob == nullptr) throw DataError("bob_search: null query");
  if (query.bob->bits() != index.bits() && index.size() > 0) {
    throw DataError("bob_search: query barcode length differs from index");
  }
  std::vector<std::size_t> out;
  for (auto i : index.organ_entries(query.organ)) {
    if (index.at(i).patient_id != query.patient_id) out.push_back(i);
  }
  return out;
}

RetrievalResult rank(const BobQuery& query, const BarcodeIndex& index,
                     const std::vector<std::size_t>& cand,
                     const std::vector<double>& dist, std::size_t n) {
  std::vector<std::size_t> order(cand.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t keep = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return ranks_before(dist[a], index.at(cand[a]).slide_id,
                                          dist[b], index.at(cand[b]).slide_id);
                    });
  RetrievalResult r;
  r.query_slide_id = query.bob->slide_id();
  r.shortfall = cand.size() < n;
  for (std::size_t i = 0; i < keep; ++i) {
    r.neighbors.push_back({index.at(cand[order[i]]).slide_id, dist[order[i]]});
  }
  return r;
}

}  // namespace

RetrievalResult bob_search(const BobQuery& query, const BarcodeIndex& index,
                           std::size_t n, const SlideDistanceOptions& options) {
  if (n == 0) throw ConfigError("bob_search: n must be at least 1");
  const auto cand = candidates_for(query, index);
  std::vector<double> dist(cand.size());
  const auto m = static_cast<std::ptrdiff_t>(cand.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    dist[i] = slide_distance(*query.bob, index.at(cand[i]).bob, options);
  }
  return rank(query, index, cand, dist, n);
}

RetrievalResult bob_search_serial(const BobQuery& query,
                                  const BarcodeIndex& index, std::size_t n,
                                  const SlideDistanceOptions& options) {
  if (n == 0) throw ConfigError("bob_search: n must be at least 1");
  const auto cand = candidates_for(query, index);
  std::vector<double> dist(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    dist[i] = slide_distance(*query.bob, index.at(cand[i]).bob, options);
  }
  return rank(query, index, cand, dist, n);
}

std::vector<RetrievalResult> bob_search_all(const BarcodeIndex& index,
                                            std::size_t n,
                                            const SlideDistanceOptions& options) {
  std::vector<RetrievalResult> out(index.size());
  const auto m = static_cast<std::ptrdiff_t>(index.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const auto& e = index.at(i);
    out[i] = bob_search_serial({&e.bob, e.patient_id, e.label.organ}, index, n,
                               options);
  }
  return out;
}

BoB make_bob(const std::string& slide_id, const FeatureBlock& block,
             const std::vector<std::size_t>& rows) {
  if (block.dim() < 2) throw DataError("slide '" + slide_id + "': dim < 2");
  BoB bob(slide_id, block.dim() - 1);
  for (auto r : rows) {
    if (r >= block.rows()) {
      throw DataError("slide '" + slide_id + "': mosaic row " +
                      std::to_string(r) + " out of range");
    }
    bob.add(minmax_binarize(block.embedding(r)));
  }
  return bob;
}

// Index file: "BOB1", u32 bit length, u32 entry count, then per entry four
// u32-length-prefixed strings (slide, patient, organ, diagnosis), u32 barcode
// count and count * ceil(bits / 64) u64 words, all little-endian.
namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string where) : in_(in), where_(std::move(where)) {}

  std::uint64_t uint(int bytes) {
    unsigned char b[8];
    if (!in_.read(reinterpret_cast<char*>(b), bytes)) {
      throw DataError(where_ + ": truncated index file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  std::string str() {
    const auto len = static_cast<std::size_t>(uint(4));
    std::string s(len, '\0');
    if (len && !in_.read(s.data(), static_cast<std::streamsize>(len))) {
      throw DataError(where_ + ": truncated index file");
    }
    return s;
  }

 private:
  std::istream& in_;
  std::string where_;
};

}  // namespace

void write_index(const std::filesystem::path& path, const BarcodeIndex& index) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write index " + path.string());
  out.write("BOB1", 4);
  put_u32(out, static_cast<std::uint32_t>(index.bits()));
  put_u32(out, static_cast<std::uint32_t>(index.size()));
  for (const auto& e : index.entries()) {
    put_str(out, e.slide_id);
    put_str(out, e.patient_id);
    put_str(out, e.label.organ);
    put_str(out, e.label.diagnosis);
    put_u32(out, static_cast<std::uint32_t>(e.bob.size()));
    for (auto w : e.bob.all_words()) put_u64(out, w);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

BarcodeIndex read_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "BOB1", 4) != 0) {
    throw DataError(path.string() + ": bad magic (expected BOB1)");
  }
  Reader rd(in, path.string());
  const auto bits = static_cast<std::size_t>(rd.uint(4));
  const auto count = static_cast<std::size_t>(rd.uint(4));
  const std::size_t wpc = words_for_bits(bits);
  std::vector<IndexEntry> entries;
  entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    IndexEntry e;
    e.slide_id = rd.str();
    e.patient_id = rd.str();
    e.label.organ = rd.str();
    e.label.diagnosis = rd.str();
    const auto codes = static_cast<std::size_t>(rd.uint(4));
    e.bob = BoB(e.slide_id, bits);
    for (std::size_t c = 0; c < codes; ++c) {
      std::vector<std::uint64_t> words(wpc);
      for (auto& w : words) w = rd.uint(8);
      e.bob.add(Barcode(bits, std::move(words)));
    }
    entries.push_back(std::move(e));
  }
  return BarcodeIndex(std::move(entries));
}

}  // namespace slidesearch
