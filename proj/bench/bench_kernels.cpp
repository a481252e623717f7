// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.
#include <filesystem>
#include <random>

#include <benchmark/benchmark.h>

#include "slidesearch/barcode.hpp"
#include "slidesearch/mosaic.hpp"
#include "slidesearch/synth.hpp"
#include "slidesearch/vector_search.hpp"

namespace {

using namespace slidesearch;

BarcodeIndex make_index(std::size_t slides, std::size_t codes, std::size_t bits) {
  std::mt19937_64 rng(1);
  std::vector<IndexEntry> entries;
  for (std::size_t s = 0; s < slides; ++s) {
    BoB bob("s" + std::to_string(s), bits);
    for (std::size_t c = 0; c < codes; ++c) {
      Barcode code(bits);
      for (std::size_t i = 0; i < bits; ++i) {
        if (rng() & 1) code.set(i);
      }
      bob.add(code);
    }
    entries.push_back({bob.slide_id(), "p" + std::to_string(s), {"O", "D"}, std::move(bob)});
  }
  return BarcodeIndex(std::move(entries));
}

template <bool Parallel>
void BM_BobSearch(benchmark::State& state) {
  const auto index = make_index(static_cast<std::size_t>(state.range(0)), 32, 767);
  const auto& q = index.at(0);
  const BobQuery query{&q.bob, q.patient_id, "O"};
  for (auto _ : state) {
    auto r = Parallel ? bob_search(query, index, 5) : bob_search_serial(query, index, 5);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BobSearch<false>)->Name("bob_search/serial")->Arg(256)->Arg(2048);
BENCHMARK(BM_BobSearch<true>)->Name("bob_search/omp")->Arg(256)->Arg(2048);

VectorPool make_pool(std::size_t n, std::size_t d) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g;
  std::vector<SlideVector> entries;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(d);
    for (auto& x : v) x = g(rng);
    entries.push_back({"s" + std::to_string(i), "p" + std::to_string(i), "O", std::move(v)});
  }
  return VectorPool("bench", std::move(entries));
}

template <bool Parallel>
void BM_KnnSearch(benchmark::State& state) {
  const auto pool = make_pool(static_cast<std::size_t>(state.range(0)), 768);
  for (auto _ : state) {
    auto r = Parallel ? knn_search(pool.at(0), pool, 5) : knn_search_serial(pool.at(0), pool, 5);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KnnSearch<false>)->Name("knn_search/serial")->Arg(1024)->Arg(16384);
BENCHMARK(BM_KnnSearch<true>)->Name("knn_search/omp")->Arg(1024)->Arg(16384);

const std::vector<SlideRecord>& synth_slides() {
  static const std::vector<SlideRecord> slides = [] {
    const auto dir = std::filesystem::temp_directory_path() / "slidesearch_bench";
    SynthSpec spec;
    spec.patches = 400;
    spec.dim = 64;
    return load_manifest(generate(spec, dir));
  }();
  return slides;
}

template <bool Parallel>
void BM_BuildMosaics(benchmark::State& state) {
  const auto& slides = synth_slides();
  for (auto _ : state) {
    auto m = Parallel ? build_mosaics(slides, 0.2, 9, 1) : build_mosaics_serial(slides, 0.2, 9, 1);
    benchmark::DoNotOptimize(m);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(slides.size()));
}
BENCHMARK(BM_BuildMosaics<false>)->Name("build_mosaics/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildMosaics<true>)->Name("build_mosaics/omp")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
