#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace slidesearch {

struct SynthSpec {
  std::size_t organs = 2;
  std::size_t diagnoses = 3;   // per organ
  std::size_t patients = 8;    // per diagnosis
  std::size_t slides = 1;      // per patient
  std::size_t patches = 64;    // per slide
  std::size_t dim = 32;
  double separation = 4.0;     // expected centroid distance / noise sd
  std::uint64_t seed = 7;
};

inline constexpr const char* kSynthModel = "mean";

void validate(const SynthSpec& spec);

// Writes `manifest.csv`, `features/<slide>.ssb`, and
// `vectors/<slide>.mean.ssb` under `out_dir`. Each diagnosis gets a centroid
// of norm separation/sqrt(2) in a uniformly random direction, so two
// centroids sit about `separation` apart. Patch embeddings add N(0, 1) noise
// per dimension; the chromatic descriptor is the first three dims; the slide
// vector is the patch mean. Returns the manifest path.
std::filesystem::path generate(const SynthSpec& spec,
                               const std::filesystem::path& out_dir);

}  // namespace slidesearch
