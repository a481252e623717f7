#include "slidesearch/synth.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <random>
#include <vector>

#include "slidesearch/cohort.hpp"
#include "slidesearch/error.hpp"
#include "slidesearch/features.hpp"
#include "slidesearch/seed.hpp"

namespace slidesearch {
namespace fs = std::filesystem;

void validate(const SynthSpec& spec) {
  if (spec.organs < 1 || spec.diagnoses < 1 || spec.patients < 1 ||
      spec.slides < 1 || spec.patches < 1) {
    throw ConfigError("synth: all counts must be at least 1");
  }
  if (spec.dim < 2) throw ConfigError("synth: dim must be at least 2");
  if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation)) {
    throw ConfigError("synth: separation must be a finite value >= 0");
  }
}

namespace {

std::string pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0,
                     '0') + s;
}

// Opaque patient id. Ids that spelled out organ and diagnosis would sort by
// label and bias every (distance, slide_id) tie towards one diagnosis.
std::string patient_id(const SynthSpec& spec, std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "P%012llx",
                static_cast<unsigned long long>(
                    derive_seed(spec.seed, "patient", index) & 0xffffffffffffULL));
  return buf;
}

std::vector<double> centroid(const SynthSpec& spec, std::size_t organ,
                             std::size_t diagnosis) {
  std::mt19937_64 rng(derive_seed(spec.seed, "centroid",
                                  organ * 1000003ULL + diagnosis));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> c(spec.dim);
  double norm2 = 0.0;
  for (auto& v : c) {
    v = normal(rng);
    norm2 += v * v;
  }
  const double scale = spec.separation / std::sqrt(2.0) / std::sqrt(norm2);
  for (auto& v : c) v *= scale;
  return c;
}

}  // namespace

fs::path generate(const SynthSpec& spec, const fs::path& out_dir) {
  validate(spec);
  std::error_code ec;
  fs::create_directories(out_dir / "features", ec);
  fs::create_directories(out_dir / "vectors", ec);
  if (ec) throw DataError("synth: cannot create " + out_dir.string() + ": " + ec.message());

  const std::size_t grid = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(spec.patches))));
  std::vector<SlideRecord> slides;
  std::set<std::string> patient_ids;
  for (std::size_t o = 0; o < spec.organs; ++o) {
    for (std::size_t g = 0; g < spec.diagnoses; ++g) {
      const auto c = centroid(spec, o, g);
      for (std::size_t p = 0; p < spec.patients; ++p) {
        const std::string patient =
            patient_id(spec, (o * spec.diagnoses + g) * spec.patients + p);
        if (!patient_ids.insert(patient).second) {
          throw DataError("synth: patient id collision, choose another seed");
        }
        for (std::size_t s = 0; s < spec.slides; ++s) {
          SlideRecord r;
          r.slide_id = patient + "-S" + pad(s, 2);
          r.patient_id = patient;
          r.organ = "Organ" + pad(o, 2);
          r.diagnosis = "Diagnosis" + pad(g, 2);

          std::mt19937_64 rng(derive_seed(spec.seed, "slide", r.slide_id));
          std::normal_distribution<double> normal(0.0, 1.0);
          FeatureBlock block(spec.patches, spec.dim, true, true);
          std::vector<double> sum(spec.dim, 0.0);
          for (std::size_t i = 0; i < spec.patches; ++i) {
            auto e = block.embedding(i);
            for (std::size_t j = 0; j < spec.dim; ++j) {
              e[j] = static_cast<float>(c[j] + normal(rng));
              sum[j] += e[j];
            }
            block.set_coords(i, static_cast<float>(i % grid),
                             static_cast<float>(i / grid));
            block.set_chromatic(i, {e[0], e[1], spec.dim > 2 ? e[2] : 0.0f});
          }
          std::vector<float> mean(spec.dim);
          for (std::size_t j = 0; j < spec.dim; ++j) {
            mean[j] = static_cast<float>(sum[j] / static_cast<double>(spec.patches));
          }
          r.patch_features = out_dir / "features" / (r.slide_id + ".ssb");
          const fs::path vec = out_dir / "vectors" / (r.slide_id + "." + kSynthModel + ".ssb");
          write_feature_file(r.patch_features, block);
          write_slide_vector(vec, mean);
          r.slide_vectors[kSynthModel] = vec;
          slides.push_back(std::move(r));
        }
      }
    }
  }
  const fs::path manifest = out_dir / "manifest.csv";
  write_manifest(manifest, slides);
  return manifest;
}

}  // namespace slidesearch
