#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace slidesearch {

// Row-major block of patch features for one slide, as stored in an SSB1
// feature file. Slide-vector files use the same layout with one row and no
// coordinates or chromatic descriptor.
class FeatureBlock {
 public:
  FeatureBlock() = default;
  FeatureBlock(std::size_t rows, std::size_t dim, bool has_coords,
               bool has_chromatic);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool has_coords() const { return has_coords_; }
  bool has_chromatic() const { return has_chromatic_; }

  std::span<const float> embedding(std::size_t row) const;
  std::span<float> embedding(std::size_t row);
  std::array<float, 2> coords(std::size_t row) const;
  void set_coords(std::size_t row, float x, float y);
  std::array<float, 3> chromatic(std::size_t row) const;
  void set_chromatic(std::size_t row, const std::array<float, 3>& c);

  // Chromatic descriptor when present, else the first three embedding
  // dimensions (zero-padded when dim < 3).
  std::array<float, 3> chromatic_or_embedding(std::size_t row) const;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  bool has_coords_ = false;
  bool has_chromatic_ = false;
  std::vector<float> embeddings_;
  std::vector<float> coords_;
  std::vector<float> chromatic_;
};

struct FeatureHeader {
  std::uint8_t flags = 0;
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
};

inline constexpr std::uint8_t kFlagCoords = 0x1;
inline constexpr std::uint8_t kFlagChromatic = 0x2;

// Reads only the 13-byte header. Throws DataError on a bad magic or short
// file.
FeatureHeader read_feature_header(const std::filesystem::path& path);

FeatureBlock read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path,
                        const FeatureBlock& block);

// Single slide-level vector (n = 1, no coordinates, no chromatic).
std::vector<float> read_slide_vector(const std::filesystem::path& path);
void write_slide_vector(const std::filesystem::path& path,
                        std::span<const float> vector);

}  // namespace slidesearch
