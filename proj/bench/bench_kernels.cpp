// Serial reference kernels against their OpenMP counterparts on a
// mushrooms-shaped dataset.

#include <benchmark/benchmark.h>

#include <memory>

#include "brvr/data_io.hpp"
#include "brvr/kernels.hpp"
#include "brvr/objective.hpp"
#include "brvr/rng.hpp"

using namespace brvr;

namespace {

const Dataset& data() {
  static const Dataset ds = make_mushrooms_like(1);
  return ds;
}

Vector point(std::uint64_t seed) {
  Rng rng(seed);
  Vector x(data().dim);
  for (double& v : x) v = uniform01(rng) - 0.5;
  return x;
}

void BM_loss_serial(benchmark::State& st) {
  const Vector x = point(1);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::mean_logistic_loss(data(), x));
}
void BM_loss_parallel(benchmark::State& st) {
  const Vector x = point(1);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::mean_logistic_loss(data(), x));
}

void BM_grad_serial(benchmark::State& st) {
  const Vector x = point(2);
  Vector out(x.size());
  for (auto _ : st) {
    kernels::serial::mean_logistic_grad(data(), x, out);
    benchmark::DoNotOptimize(out.data());
  }
}
void BM_grad_parallel(benchmark::State& st) {
  const Vector x = point(2);
  Vector out(x.size());
  for (auto _ : st) {
    kernels::mean_logistic_grad(data(), x, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_gram_serial(benchmark::State& st) {
  const Vector v = point(3);
  Vector out(v.size());
  for (auto _ : st) {
    kernels::serial::gram_matvec(data(), v, out);
    benchmark::DoNotOptimize(out.data());
  }
}
void BM_gram_parallel(benchmark::State& st) {
  const Vector v = point(3);
  Vector out(v.size());
  for (auto _ : st) {
    kernels::gram_matvec(data(), v, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_gap_serial(benchmark::State& st) {
  const Vector u = point(4), v = point(5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::mean_squared_grad_gap(data(), 1e-3, u, v));
}
void BM_gap_parallel(benchmark::State& st) {
  const Vector u = point(4), v = point(5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::mean_squared_grad_gap(data(), 1e-3, u, v));
}

}  // namespace

BENCHMARK(BM_loss_serial);
BENCHMARK(BM_loss_parallel);
BENCHMARK(BM_grad_serial);
BENCHMARK(BM_grad_parallel);
BENCHMARK(BM_gram_serial);
BENCHMARK(BM_gram_parallel);
BENCHMARK(BM_gap_serial);
BENCHMARK(BM_gap_parallel);

BENCHMARK_MAIN();
