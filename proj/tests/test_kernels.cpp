#include <doctest.h>
#include <omp.h>

#include <cmath>

#include "brvr/data_io.hpp"
#include "brvr/kernels.hpp"
#include "brvr/rng.hpp"

using namespace brvr;

namespace {

std::vector<double> random_vector(std::size_t d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(d);
  for (double& e : v) e = scale * (uniform01(rng) - 0.5);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

template <class F>
auto with_threads(int n, F&& f) {
  const int before = omp_get_max_threads();
  omp_set_num_threads(n);
  auto r = f();
  omp_set_num_threads(before);
  return r;
}

}  // namespace

TEST_CASE("stable scalar helpers") {
  CHECK(kernels::log1p_exp(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(kernels::log1p_exp(800.0) == 800.0);
  CHECK(kernels::log1p_exp(-800.0) >= 0.0);
  CHECK(std::isfinite(kernels::log1p_exp(-800.0)));
  CHECK(kernels::sigmoid(0.0) == 0.5);
  CHECK(kernels::sigmoid(-800.0) == 0.0);
  CHECK(kernels::sigmoid(800.0) == 1.0);
  CHECK(kernels::sigmoid(3.0) + kernels::sigmoid(-3.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("parallel kernels agree with the serial reference") {
  // More rows than one block so the blocked reduction is exercised.
  const Dataset ds = make_mushrooms_like(3, 2000);
  const auto x = random_vector(ds.dim, 1, 0.5);
  const auto v = random_vector(ds.dim, 2, 0.5);

  CHECK(kernels::mean_logistic_loss(ds, x) == doctest::Approx(kernels::serial::mean_logistic_loss(ds, x)).epsilon(1e-13));
  CHECK(kernels::mean_squared_grad_gap(ds, 0.01, x, v) ==
        doctest::Approx(kernels::serial::mean_squared_grad_gap(ds, 0.01, x, v)).epsilon(1e-12));

  std::vector<double> g(ds.dim), gs(ds.dim), h(ds.dim), hs(ds.dim);
  kernels::mean_logistic_grad(ds, x, g);
  kernels::serial::mean_logistic_grad(ds, x, gs);
  CHECK(max_abs_diff(g, gs) < 1e-13);
  kernels::gram_matvec(ds, v, h);
  kernels::serial::gram_matvec(ds, v, hs);
  CHECK(max_abs_diff(h, hs) < 1e-9);
}

TEST_CASE("parallel kernels are bit-identical across thread counts") {
  const Dataset ds = make_mushrooms_like(4, 3000);
  const auto x = random_vector(ds.dim, 5, 0.5);
  const auto v = random_vector(ds.dim, 6, 0.5);

  const double l1 = with_threads(1, [&] { return kernels::mean_logistic_loss(ds, x); });
  const double l4 = with_threads(4, [&] { return kernels::mean_logistic_loss(ds, x); });
  CHECK(l1 == l4);

  const double s1 = with_threads(1, [&] { return kernels::mean_squared_grad_gap(ds, 0.1, x, v); });
  const double s3 = with_threads(3, [&] { return kernels::mean_squared_grad_gap(ds, 0.1, x, v); });
  CHECK(s1 == s3);

  const auto g1 = with_threads(1, [&] {
    std::vector<double> g(ds.dim);
    kernels::mean_logistic_grad(ds, x, g);
    return g;
  });
  const auto g4 = with_threads(4, [&] {
    std::vector<double> g(ds.dim);
    kernels::mean_logistic_grad(ds, x, g);
    return g;
  });
  CHECK(g1 == g4);

  const auto h1 = with_threads(1, [&] {
    std::vector<double> h(ds.dim);
    kernels::gram_matvec(ds, v, h);
    return h;
  });
  const auto h2 = with_threads(2, [&] {
    std::vector<double> h(ds.dim);
    kernels::gram_matvec(ds, v, h);
    return h;
  });
  CHECK(h1 == h2);
}

TEST_CASE("grad gap is zero for identical points") {
  const Dataset ds = make_gaussian_dataset(40, 5, 2);
  const auto x = random_vector(ds.dim, 9);
  CHECK(kernels::mean_squared_grad_gap(ds, 0.3, x, x) == 0.0);
  CHECK(kernels::serial::mean_squared_grad_gap(ds, 0.3, x, x) == 0.0);
}
