#pragma once

#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slidesearch/cohort.hpp"
#include "slidesearch/error.hpp"
#include "slidesearch/features.hpp"
#include "slidesearch/retrieval.hpp"

namespace slidesearch {

// MinMax barcode: d-1 bits packed little-end-first into 64-bit words. Bit i
// lives in word i / 64 at position i % 64. Unused high bits are zero.
class Barcode {
 public:
  Barcode() = default;
  explicit Barcode(std::size_t bits);
  Barcode(std::size_t bits, std::vector<std::uint64_t> words);

  std::size_t size() const { return bits_; }
  bool test(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1ULL;
  }
  void set(std::size_t i) { words_[i >> 6] |= 1ULL << (i & 63); }
  std::span<const std::uint64_t> words() const { return words_; }

  bool operator==(const Barcode&) const = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

inline std::size_t words_for_bits(std::size_t bits) { return (bits + 63) / 64; }

// bit i = 1 iff v[i+1] > v[i]; ties give 0.
template <std::floating_point T>
Barcode minmax_binarize(std::span<const T> v) {
  if (v.size() < 2) throw DataError("minmax_binarize: need at least 2 dims");
  for (T x : v) {
    if (!std::isfinite(x)) throw DataError("minmax_binarize: non-finite entry");
  }
  Barcode code(v.size() - 1);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i + 1] > v[i]) code.set(i);
  }
  return code;
}

inline std::size_t hamming_words(std::span<const std::uint64_t> a,
                                 std::span<const std::uint64_t> b) {
  std::size_t d = 0;
  for (std::size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
  return d;
}

std::size_t hamming(const Barcode& a, const Barcode& b);

// Bunch of Barcodes: one barcode per mosaic patch, stored contiguously.
class BoB {
 public:
  BoB() = default;
  BoB(std::string slide_id, std::size_t bits);
  BoB(std::string slide_id, const std::vector<Barcode>& codes);

  void add(const Barcode& code);

  const std::string& slide_id() const { return slide_id_; }
  std::size_t bits() const { return bits_; }
  std::size_t words_per_code() const { return wpc_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::span<const std::uint64_t> code_words(std::size_t i) const {
    return std::span<const std::uint64_t>(words_).subspan(i * wpc_, wpc_);
  }
  std::span<const std::uint64_t> all_words() const { return words_; }
  Barcode code(std::size_t i) const;

 private:
  friend class BarcodeIndex;
  std::string slide_id_;
  std::size_t bits_ = 0;
  std::size_t wpc_ = 0;
  std::size_t count_ = 0;
  std::vector<std::uint64_t> words_;
};

struct SlideDistanceOptions {
  // Divide by the barcode bit length. Off by default: distances stay in raw
  // Hamming units.
  bool normalize = false;
};

// Median over query barcodes of the minimum Hamming distance to any
// candidate barcode. Even counts average the two central minima. Not
// symmetric in its arguments.
double slide_distance(const BoB& query, const BoB& candidate,
                      const SlideDistanceOptions& options = {});

struct IndexEntry {
  std::string slide_id;
  std::string patient_id;
  DiagnosisLabel label;
  BoB bob;
};

// Immutable after construction. Entries keep insertion order; an organ map
// lists each organ's entry positions.
class BarcodeIndex {
 public:
  BarcodeIndex() = default;
  explicit BarcodeIndex(std::vector<IndexEntry> entries);

  std::size_t bits() const { return bits_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  const IndexEntry& at(std::size_t i) const { return entries_[i]; }
  // Position of a slide, or npos.
  std::size_t find(const std::string& slide_id) const;
  const std::vector<std::size_t>& organ_entries(const std::string& organ) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t bits_ = 0;
  std::vector<IndexEntry> entries_;
  std::map<std::string, std::size_t> by_slide_;
  std::map<std::string, std::vector<std::size_t>> by_organ_;
};

struct BobQuery {
  const BoB* bob = nullptr;
  std::string patient_id;
  std::string organ;
};

// Same-organ, leave-one-patient-out exhaustive scan returning the n nearest
// slides. The candidate scan is OpenMP-parallel; ranking is data-defined so
// the result does not depend on scheduling.
RetrievalResult bob_search(const BobQuery& query, const BarcodeIndex& index,
                           std::size_t n,
                           const SlideDistanceOptions& options = {});
// Single-threaded reference with identical semantics.
RetrievalResult bob_search_serial(const BobQuery& query,
                                  const BarcodeIndex& index, std::size_t n,
                                  const SlideDistanceOptions& options = {});

// Searches every indexed slide against the index (query loop parallel).
std::vector<RetrievalResult> bob_search_all(
    const BarcodeIndex& index, std::size_t n,
    const SlideDistanceOptions& options = {});

// Barcodes the mosaic rows of one slide's feature block.
BoB make_bob(const std::string& slide_id, const FeatureBlock& block,
             const std::vector<std::size_t>& rows);

void write_index(const std::filesystem::path& path, const BarcodeIndex& index);
BarcodeIndex read_index(const std::filesystem::path& path);

}  // namespace slidesearch
