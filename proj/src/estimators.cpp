#include "brvr/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace brvr {

void init_lsvrg(WorkerState& worker, std::span<const double> x0) {
  worker.w.assign(x0.begin(), x0.end());
  worker.full_grad_at_w.assign(x0.size(), 0.0);
  worker.full_grad_stale = true;
}

bool refresh_reference_gradient(WorkerState& worker, const FiniteSum& obj) {
  if (!worker.full_grad_stale) return false;
  worker.full_grad_at_w.resize(obj.dim());
  obj.full_grad(worker.w, worker.full_grad_at_w);
  worker.counter.add(obj.size());
  worker.full_grad_stale = false;
  return true;
}

std::vector<std::size_t> draw_batch(WorkerState& worker, std::size_t m, std::size_t b) {
  std::vector<std::size_t> batch(b);
  for (auto& j : batch) j = uniform_index(worker.rng, m);
  return batch;
}

Vector lsvrg_estimator(WorkerState& worker, const FiniteSum& obj, std::span<const double> x,
                       std::span<const std::size_t> batch) {
  refresh_reference_gradient(worker, obj);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Vector g(obj.dim(), 0.0);
  for (std::size_t j : batch) obj.add_component_grad_diff(j, x, worker.w, inv_b, g);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += worker.full_grad_at_w[i];
  worker.counter.add(2 * batch.size());
  return g;
}

Vector lsvrg_estimator(WorkerState& worker, const FiniteSum& obj, std::span<const double> x, std::size_t b) {
  const auto batch = draw_batch(worker, obj.size(), b);
  return lsvrg_estimator(worker, obj, x, batch);
}

bool maybe_switch_reference(WorkerState& worker, std::span<const double> x, double p) {
  if (uniform01(worker.rng) >= p) return false;
  worker.w.assign(x.begin(), x.end());
  worker.full_grad_stale = true;
  return true;
}

void init_saga(WorkerState& worker, const FiniteSum& obj, std::span<const double> x0) {
  const std::size_t m = obj.size(), d = obj.dim();
  worker.saga_table.assign(m * d, 0.0);
  worker.saga_mean.assign(d, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    std::span<double> row(worker.saga_table.data() + j * d, d);
    obj.add_component_grad(j, x0, 1.0, row);
  }
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < d; ++i) worker.saga_mean[i] += worker.saga_table[j * d + i];
  for (double& v : worker.saga_mean) v /= static_cast<double>(m);
  worker.saga_updates_since_resync = 0;
  worker.counter.add(m);
}

namespace {

void resync_saga_mean(WorkerState& worker, std::size_t m, std::size_t d) {
  std::fill(worker.saga_mean.begin(), worker.saga_mean.end(), 0.0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < d; ++i) worker.saga_mean[i] += worker.saga_table[j * d + i];
  for (double& v : worker.saga_mean) v /= static_cast<double>(m);
  worker.saga_updates_since_resync = 0;
}

}  // namespace

Vector saga_estimator(WorkerState& worker, const FiniteSum& obj, std::span<const double> x,
                      std::span<const std::size_t> batch) {
  const std::size_t m = obj.size(), d = obj.dim();
  const std::size_t b = batch.size();
  const double inv_b = 1.0 / static_cast<double>(b);

  std::vector<double> fresh(b * d, 0.0);
  Vector g(d, 0.0);
  for (std::size_t t = 0; t < b; ++t) {
    std::span<double> grad(fresh.data() + t * d, d);
    obj.add_component_grad(batch[t], x, 1.0, grad);
    const double* alpha = worker.saga_table.data() + batch[t] * d;
    for (std::size_t i = 0; i < d; ++i) g[i] += inv_b * (grad[i] - alpha[i]);
  }
  for (std::size_t i = 0; i < d; ++i) g[i] += worker.saga_mean[i];
  worker.counter.add(b);

  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t t = 0; t < b; ++t) {
    double* alpha = worker.saga_table.data() + batch[t] * d;
    const double* grad = fresh.data() + t * d;
    for (std::size_t i = 0; i < d; ++i) {
      worker.saga_mean[i] += inv_m * (grad[i] - alpha[i]);
      alpha[i] = grad[i];
    }
  }
  worker.saga_updates_since_resync += b;
  if (worker.saga_updates_since_resync >= kSagaResyncInterval) resync_saga_mean(worker, m, d);
  return g;
}

Vector saga_estimator(WorkerState& worker, const FiniteSum& obj, std::span<const double> x, std::size_t b) {
  const auto batch = draw_batch(worker, obj.size(), b);
  return saga_estimator(worker, obj, x, batch);
}

double saga_mean_drift(const WorkerState& worker, std::size_t m) {
  const std::size_t d = worker.saga_mean.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double exact = 0.0;
    for (std::size_t j = 0; j < m; ++j) exact += worker.saga_table[j * d + i];
    exact /= static_cast<double>(m);
    worst = std::max(worst, std::abs(exact - worker.saga_mean[i]));
  }
  return worst;
}

}  // namespace brvr
