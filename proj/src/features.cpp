#include "slidesearch/features.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "slidesearch/error.hpp"

namespace slidesearch {
namespace {

constexpr char kMagic[4] = {'S', 'S', 'B', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const unsigned char* p) {
  return std::bit_cast<float>(get_u32(p));
}

FeatureHeader parse_header(const unsigned char* p, const std::string& where) {
  if (std::memcmp(p, kMagic, 4) != 0) {
    throw DataError(where + ": bad magic (expected SSB1)");
  }
  FeatureHeader h;
  h.flags = p[4];
  h.rows = get_u32(p + 5);
  h.dim = get_u32(p + 9);
  if (h.flags & ~(kFlagCoords | kFlagChromatic)) {
    throw DataError(where + ": unknown flag bits");
  }
  return h;
}

constexpr std::size_t kHeaderBytes = 13;

}  // namespace

FeatureBlock::FeatureBlock(std::size_t rows, std::size_t dim, bool has_coords,
                           bool has_chromatic)
    : rows_(rows),
      dim_(dim),
      has_coords_(has_coords),
      has_chromatic_(has_chromatic),
      embeddings_(rows * dim),
      coords_(has_coords ? rows * 2 : 0),
      chromatic_(has_chromatic ? rows * 3 : 0) {}

std::span<const float> FeatureBlock::embedding(std::size_t row) const {
  return std::span<const float>(embeddings_).subspan(row * dim_, dim_);
}

std::span<float> FeatureBlock::embedding(std::size_t row) {
  return std::span<float>(embeddings_).subspan(row * dim_, dim_);
}

std::array<float, 2> FeatureBlock::coords(std::size_t row) const {
  if (!has_coords_) return {0.0f, 0.0f};
  return {coords_[row * 2], coords_[row * 2 + 1]};
}

void FeatureBlock::set_coords(std::size_t row, float x, float y) {
  coords_[row * 2] = x;
  coords_[row * 2 + 1] = y;
}

std::array<float, 3> FeatureBlock::chromatic(std::size_t row) const {
  return {chromatic_[row * 3], chromatic_[row * 3 + 1], chromatic_[row * 3 + 2]};
}

void FeatureBlock::set_chromatic(std::size_t row, const std::array<float, 3>& c) {
  for (int i = 0; i < 3; ++i) chromatic_[row * 3 + i] = c[i];
}

std::array<float, 3> FeatureBlock::chromatic_or_embedding(std::size_t row) const {
  if (has_chromatic_) return chromatic(row);
  std::array<float, 3> c{0.0f, 0.0f, 0.0f};
  auto e = embedding(row);
  for (std::size_t i = 0; i < 3 && i < e.size(); ++i) c[i] = e[i];
  return c;
}

FeatureHeader read_feature_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  unsigned char buf[kHeaderBytes];
  if (!in.read(reinterpret_cast<char*>(buf), kHeaderBytes)) {
    throw DataError(path.string() + ": truncated header");
  }
  return parse_header(buf, path.string());
}

FeatureBlock read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < kHeaderBytes) throw DataError(where + ": truncated header");
  const FeatureHeader h = parse_header(bytes.data(), where);
  const bool coords = h.flags & kFlagCoords;
  const bool chroma = h.flags & kFlagChromatic;
  const std::size_t per_row =
      (static_cast<std::size_t>(coords) * 2 + static_cast<std::size_t>(chroma) * 3 +
       h.dim) * 4;
  const std::size_t expected = kHeaderBytes + per_row * h.rows;
  if (bytes.size() != expected) {
    throw DataError(where + ": size " + std::to_string(bytes.size()) +
                    " does not match header (expected " +
                    std::to_string(expected) + ")");
  }
  FeatureBlock block(h.rows, h.dim, coords, chroma);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (std::size_t r = 0; r < h.rows; ++r) {
    if (coords) {
      const float x = get_f32(p), y = get_f32(p + 4);
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw DataError(where + ": non-finite coordinates in row " +
                        std::to_string(r));
      }
      block.set_coords(r, x, y);
      p += 8;
    }
    if (chroma) {
      block.set_chromatic(r, {get_f32(p), get_f32(p + 4), get_f32(p + 8)});
      p += 12;
    }
    auto e = block.embedding(r);
    for (std::size_t j = 0; j < h.dim; ++j, p += 4) e[j] = get_f32(p);
  }
  return block;
}

void write_feature_file(const std::filesystem::path& path,
                        const FeatureBlock& block) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write feature file " + path.string());
  out.write(kMagic, 4);
  const std::uint8_t flags = (block.has_coords() ? kFlagCoords : 0) |
                             (block.has_chromatic() ? kFlagChromatic : 0);
  out.put(static_cast<char>(flags));
  put_u32(out, static_cast<std::uint32_t>(block.rows()));
  put_u32(out, static_cast<std::uint32_t>(block.dim()));
  for (std::size_t r = 0; r < block.rows(); ++r) {
    if (block.has_coords()) {
      const auto c = block.coords(r);
      put_f32(out, c[0]);
      put_f32(out, c[1]);
    }
    if (block.has_chromatic()) {
      for (float v : block.chromatic(r)) put_f32(out, v);
    }
    for (float v : block.embedding(r)) put_f32(out, v);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<float> read_slide_vector(const std::filesystem::path& path) {
  const FeatureBlock block = read_feature_file(path);
  if (block.rows() != 1 || block.has_coords() || block.has_chromatic()) {
    throw DataError(path.string() +
                    ": slide-vector file must hold exactly one plain row");
  }
  const auto e = block.embedding(0);
  return {e.begin(), e.end()};
}

void write_slide_vector(const std::filesystem::path& path,
                        std::span<const float> vector) {
  FeatureBlock block(1, vector.size(), false, false);
  std::copy(vector.begin(), vector.end(), block.embedding(0).begin());
  write_feature_file(path, block);
}

}  // namespace slidesearch
