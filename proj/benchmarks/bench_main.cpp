#include <benchmark/benchmark.h>

#include "geosynth/flow.hpp"
#include "geosynth/generators.hpp"
#include "geosynth/metrics.hpp"
#include "geosynth/random.hpp"
#include "geosynth/synthetic.hpp"
#include "geosynth/vae.hpp"

using namespace geosynth;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

const synth::City& city() {
  static const synth::City c = synth::make_city(5000, 7);
  return c;
}

void BM_SlicedWasserstein(benchmark::State& state) {
  const auto n = state.range(0);
  const auto a = gaussian(n, 2, 1), b = gaussian(n, 2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::sliced_wasserstein(a, b, 100, 2.0, 3));
  state.SetComplexityN(n);
}
BENCHMARK(BM_SlicedWasserstein)->RangeMultiplier(4)->Range(1 << 10, 1 << 14)->Complexity();

void BM_SpatialAutocorr(benchmark::State& state) {
  const auto& t = city().table;
  const auto basis = metrics::pca_fit(t);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::spatial_autocorr_distance(t, t, basis, {}));
}
BENCHMARK(BM_SpatialAutocorr)->Unit(benchmark::kMillisecond);

void BM_LocalFeatureDistance(benchmark::State& state) {
  const auto& t = city().table;
  const auto basis = metrics::pca_fit(t);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::local_feature_distance(t, t, basis, {}));
}
BENCHMARK(BM_LocalFeatureDistance)->Unit(benchmark::kMillisecond);

void BM_FlowForward(benchmark::State& state) {
  const auto x = gaussian(state.range(0), 2, 4);
  const flow::FlowModel m(flow::FlowArch{}, flow::CoordScaler::fit(x), 5);
  for (auto _ : state) benchmark::DoNotOptimize(m.coords_to_latent(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FlowForward)->Arg(256)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_FlowNllBackward(benchmark::State& state) {
  const auto x = gaussian(256, 2, 6);
  flow::FlowModel m(flow::FlowArch{}, flow::CoordScaler::fit(x), 7);
  for (auto _ : state) {
    m.params().zero_grads();
    benchmark::DoNotOptimize(m.nll_backward(x));
  }
}
BENCHMARK(BM_FlowNllBackward)->Unit(benchmark::kMillisecond);

void BM_VaeLoss(benchmark::State& state) {
  const auto x = gaussian(128, 8, 8);
  vae::VaeModel m(8, {0, 1}, vae::VaeArch{}, {}, 9);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    m.params().zero_grads();
    benchmark::DoNotOptimize(m.loss(x, ++seed));
  }
}
BENCHMARK(BM_VaeLoss)->Unit(benchmark::kMicrosecond);

void BM_CopulaSample(benchmark::State& state) {
  const auto g = gen::FittedGenerator::fit(gen::GeneratorKind::kCopula, city().table, city().geometry, {}, 0);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(g.sample(static_cast<std::size_t>(state.range(0)), ++seed));
}
BENCHMARK(BM_CopulaSample)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_PrivacyNearest(benchmark::State& state) {
  const auto a = gaussian(state.range(0), 6, 10), b = gaussian(state.range(0), 6, 11);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::nearest_distances(a, b));
}
BENCHMARK(BM_PrivacyNearest)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
