// Microbenchmarks for the orbit-sampling kernels: map evaluation, frame
// stepping, deformation Jacobians, minors, quadrature, and placement
// certificates. These dominate every experiment's runtime.

#include <benchmark/benchmark.h>

#include "anosov/spectrum.hpp"

using namespace anosov;

namespace {

HyperbolicAutomorphism cat() { return HyperbolicAutomorphism::from_matrix({2, 1, 1, 1}, 2); }

PerturbedMap perturbed(int layers) {
  auto h = cat();
  PerturbedMap f(h);
  BumpProfile profile(1.0);
  for (int k = 0; k < layers; ++k) {
    auto placed = place_balls(h, 1, 0.04, 40, 11 + k);
    f = f.with_layer({placed.balls,
                      ModelDeformation(2, profile, Vec::Ones(1), Vec::Constant(1, 0.8))});
  }
  return f;
}

void BM_LinearStep(benchmark::State& state) {
  PerturbedMap f(cat());
  Vec x(2);
  x << 0.2, 0.7;
  Mat D(2, 2);
  for (auto _ : state) {
    f.step(x, D);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_LinearStep);

void BM_PerturbedStep(benchmark::State& state) {
  PerturbedMap f = perturbed(static_cast<int>(state.range(0)));
  Vec x(2);
  x << 0.2, 0.7;
  Mat D(2, 2);
  for (auto _ : state) {
    f.step(x, D);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_PerturbedStep)->Arg(1)->Arg(8)->Arg(32);

void BM_DeformationJacobian(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  BumpProfile profile(1.0);
  ModelDeformation m(d, profile, Vec::Ones(d - 1), Vec::Constant(d - 1, 0.7));
  Rng rng(3);
  Vec z = 0.8 * rng.ball_point(d);
  for (auto _ : state) benchmark::DoNotOptimize(m.jacobian(z));
}
BENCHMARK(BM_DeformationJacobian)->Arg(2)->Arg(3)->Arg(5);

void BM_PrincipalMinor(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  BumpProfile profile(1.0);
  ModelDeformation m(d, profile, Vec::Ones(d - 1), Vec::Constant(d - 1, 0.7));
  Rng rng(5);
  Vec z = 0.8 * rng.ball_point(d);
  for (auto _ : state) benchmark::DoNotOptimize(m.principal_minor(z, d - 1));
}
BENCHMARK(BM_PrincipalMinor)->Arg(3)->Arg(5);

void BM_QQuadrature(benchmark::State& state) {
  BumpProfile profile(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(q_of(0.6, profile, 3));
}
BENCHMARK(BM_QQuadrature);

void BM_SpectrumEstimate(benchmark::State& state) {
  PerturbedMap f = perturbed(1);
  EstimatorConfig cfg;
  cfg.orbits = 1;
  cfg.length = 20000;
  cfg.burn_in = 500;
  for (auto _ : state) {
    cfg.seed += 1;
    benchmark::DoNotOptimize(estimate_spectrum(f, cfg));
  }
  state.SetItemsProcessed(state.iterations() * cfg.length);
}
BENCHMARK(BM_SpectrumEstimate);

void BM_EllipsoidSeparation(benchmark::State& state) {
  Rng rng(7);
  Mat M1(2, 2), M2(2, 2);
  M1 << 0.02, 0.001, 0.0, 0.015;
  M2 << 0.03, -0.002, 0.001, 0.01;
  Vec c1(2), c2(2);
  c1 << 0.2, 0.3;
  c2 << 0.4, 0.35;
  for (auto _ : state)
    benchmark::DoNotOptimize(ellipsoid_torus_separation(c1, M1, c2, M2));
}
BENCHMARK(BM_EllipsoidSeparation);

void BM_OseledetsDirection(benchmark::State& state) {
  PerturbedMap f = perturbed(1);
  Vec x(2);
  x << 0.3, 0.6;
  for (auto _ : state) benchmark::DoNotOptimize(oseledets_direction(f, x, 1, 30));
}
BENCHMARK(BM_OseledetsDirection);

}  // namespace

BENCHMARK_MAIN();
