#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "slidesearch/error.hpp"
#include "slidesearch/features.hpp"
#include "test_util.hpp"

namespace slidesearch {
namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(FeatureFile, LayoutIsBitExact) {
  testing::TempDir dir("feat");
  FeatureBlock block(1, 2, true, true);
  block.set_coords(0, 1.0f, 2.0f);
  block.set_chromatic(0, {0.5f, -1.0f, 0.0f});
  block.embedding(0)[0] = 3.0f;
  block.embedding(0)[1] = -2.5f;
  write_feature_file(dir / "a.ssb", block);

  const std::vector<unsigned char> expected = {
      'S', 'S', 'B', '1', 0x03,                  // magic, flags
      0x01, 0x00, 0x00, 0x00,                    // n = 1
      0x02, 0x00, 0x00, 0x00,                    // d = 2
      0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40,  // x = 1, y = 2
      0x00, 0x00, 0x00, 0x3f, 0x00, 0x00, 0x80, 0xbf,  // 0.5, -1
      0x00, 0x00, 0x00, 0x00,                          // 0
      0x00, 0x00, 0x40, 0x40, 0x00, 0x00, 0x20, 0xc0,  // 3, -2.5
  };
  EXPECT_EQ(slurp(dir / "a.ssb"), expected);
}

TEST(FeatureFile, RoundTripWithoutOptionalSections) {
  testing::TempDir dir("feat");
  FeatureBlock block(3, 4, false, false);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < 4; ++j) block.embedding(r)[j] = static_cast<float>(r * 10 + j);
  }
  write_feature_file(dir / "b.ssb", block);
  const FeatureBlock back = read_feature_file(dir / "b.ssb");
  EXPECT_EQ(back.rows(), 3u);
  EXPECT_EQ(back.dim(), 4u);
  EXPECT_FALSE(back.has_coords());
  EXPECT_FALSE(back.has_chromatic());
  EXPECT_EQ(back.embedding(2)[3], 23.0f);
  // Fallback chromatic descriptor: first three embedding dims.
  EXPECT_EQ(back.chromatic_or_embedding(1), (std::array<float, 3>{10.0f, 11.0f, 12.0f}));
}

TEST(FeatureFile, SlideVectorHasOneRow) {
  testing::TempDir dir("feat");
  const std::vector<float> v = {1.0f, 2.0f, 3.0f};
  write_slide_vector(dir / "v.ssb", v);
  EXPECT_EQ(read_slide_vector(dir / "v.ssb"), v);
  EXPECT_EQ(slurp(dir / "v.ssb").size(), 13u + 12u);
  EXPECT_EQ(read_feature_header(dir / "v.ssb").flags, 0);
}

TEST(FeatureFile, RejectsBadMagicAndTruncation) {
  testing::TempDir dir("feat");
  {
    const std::string bytes("XXXX\0\0\0\0\0\0\0\0\0", 13);
    std::ofstream(dir / "bad.ssb", std::ios::binary) << bytes;
  }
  EXPECT_THROW(read_feature_file(dir / "bad.ssb"), DataError);

  FeatureBlock block(2, 2, false, false);
  write_feature_file(dir / "t.ssb", block);
  std::filesystem::resize_file(dir / "t.ssb", 13 + 8);
  EXPECT_THROW(read_feature_file(dir / "t.ssb"), DataError);
  EXPECT_THROW(read_feature_file(dir / "missing.ssb"), DataError);
}

}  // namespace
}  // namespace slidesearch
