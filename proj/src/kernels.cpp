#include "brvr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace brvr::kernels {

double log1p_exp(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {

std::size_t block_count(std::size_t m) { return (m + kBlockRows - 1) / kBlockRows; }

// Sums per-block scalar partials in block order.
template <class BlockFn>
double blocked_sum(std::size_t m, BlockFn&& fn) {
  const std::size_t nb = block_count(m);
  std::vector<double> partial(nb, 0.0);
  const auto nb_signed = static_cast<std::ptrdiff_t>(nb);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb_signed; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlockRows;
    const std::size_t hi = std::min(m, lo + kBlockRows);
    partial[static_cast<std::size_t>(b)] = fn(lo, hi);
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

// Vector-valued variant: fn(lo, hi, acc) accumulates into a zeroed buffer.
template <class BlockFn>
void blocked_vector_sum(std::size_t m, std::size_t d, std::span<double> out, BlockFn&& fn) {
  const std::size_t nb = block_count(m);
  std::vector<double> partial(nb * d, 0.0);
  const auto nb_signed = static_cast<std::ptrdiff_t>(nb);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb_signed; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlockRows;
    const std::size_t hi = std::min(m, lo + kBlockRows);
    fn(lo, hi, std::span<double>(partial.data() + static_cast<std::size_t>(b) * d, d));
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < d; ++i) out[i] += partial[b * d + i];
}

}  // namespace

void gram_matvec(const Dataset& ds, std::span<const double> v, std::span<double> out) {
  blocked_vector_sum(ds.size(), ds.dim, out, [&](std::size_t lo, std::size_t hi, std::span<double> acc) {
    for (std::size_t j = lo; j < hi; ++j) ds.rows[j].axpy(ds.rows[j].dot(v), acc);
  });
}

double mean_logistic_loss(const Dataset& ds, std::span<const double> x) {
  const double total = blocked_sum(ds.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t j = lo; j < hi; ++j) s += log1p_exp(-ds.labels[j] * ds.rows[j].dot(x));
    return s;
  });
  return total / static_cast<double>(ds.size());
}

void mean_logistic_grad(const Dataset& ds, std::span<const double> x, std::span<double> out) {
  blocked_vector_sum(ds.size(), ds.dim, out, [&](std::size_t lo, std::size_t hi, std::span<double> acc) {
    for (std::size_t j = lo; j < hi; ++j) {
      const double y = ds.labels[j];
      ds.rows[j].axpy(-y * sigmoid(-y * ds.rows[j].dot(x)), acc);
    }
  });
  const double inv_m = 1.0 / static_cast<double>(ds.size());
  for (double& o : out) o *= inv_m;
}

double mean_squared_grad_gap(const Dataset& ds, double l2, std::span<const double> u,
                             std::span<const double> v) {
  double diff2 = 0.0;
  std::vector<double> diff(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    diff[i] = u[i] - v[i];
    diff2 += diff[i] * diff[i];
  }
  const double total = blocked_sum(ds.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t j = lo; j < hi; ++j) {
      const auto& row = ds.rows[j];
      const double y = ds.labels[j];
      const double c = -y * (sigmoid(-y * row.dot(u)) - sigmoid(-y * row.dot(v)));
      // Expanded ||c a_j + l2 (u - v)||^2; clamp guards rounding below zero.
      s += std::max(0.0, c * c * row.squared_norm() + 2.0 * c * l2 * row.dot(diff) + l2 * l2 * diff2);
    }
    return s;
  });
  return total / static_cast<double>(ds.size());
}

namespace serial {

void gram_matvec(const Dataset& ds, std::span<const double> v, std::span<double> out) {
  std::vector<double> av(ds.size());
  for (std::size_t j = 0; j < ds.size(); ++j) av[j] = ds.rows[j].dot(v);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < ds.size(); ++j) ds.rows[j].axpy(av[j], out);
}

double mean_logistic_loss(const Dataset& ds, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < ds.size(); ++j) s += log1p_exp(-ds.labels[j] * ds.rows[j].dot(x));
  return s / static_cast<double>(ds.size());
}

void mean_logistic_grad(const Dataset& ds, std::span<const double> x, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < ds.size(); ++j) {
    const double y = ds.labels[j];
    ds.rows[j].axpy(-y * sigmoid(-y * ds.rows[j].dot(x)), out);
  }
  for (double& o : out) o /= static_cast<double>(ds.size());
}

double mean_squared_grad_gap(const Dataset& ds, double l2, std::span<const double> u,
                             std::span<const double> v) {
  const std::size_t d = u.size();
  std::vector<double> gu(d), gv(d);
  double total = 0.0;
  for (std::size_t j = 0; j < ds.size(); ++j) {
    const double y = ds.labels[j];
    for (std::size_t i = 0; i < d; ++i) {
      gu[i] = l2 * u[i];
      gv[i] = l2 * v[i];
    }
    ds.rows[j].axpy(-y * sigmoid(-y * ds.rows[j].dot(u)), gu);
    ds.rows[j].axpy(-y * sigmoid(-y * ds.rows[j].dot(v)), gv);
    for (std::size_t i = 0; i < d; ++i) total += (gu[i] - gv[i]) * (gu[i] - gv[i]);
  }
  return total / static_cast<double>(ds.size());
}

}  // namespace serial
}  // namespace brvr::kernels
