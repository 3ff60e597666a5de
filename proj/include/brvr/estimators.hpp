#ifndef BRVR_ESTIMATORS_HPP
#define BRVR_ESTIMATORS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "brvr/objective.hpp"
#include "brvr/rng.hpp"

namespace brvr {

/// Per-worker state owned by exactly one simulated worker.
///
/// For loopless SVRG the worker keeps a reference point `w` and the full
/// gradient there; after a reference switch the cached gradient is stale
/// and is recomputed (m oracle calls) by the next estimator call. For SAGA
/// the worker keeps a table of the last gradient seen for every component
/// plus the running mean of the table.
struct WorkerState {
  std::size_t id = 0;
  bool is_byzantine = false;
  Rng rng;
  OracleCounter counter;

  Vector w;
  Vector full_grad_at_w;
  bool full_grad_stale = true;

  std::vector<double> saga_table;  ///< m rows of length d, row-major
  Vector saga_mean;
  std::size_t saga_updates_since_resync = 0;

  WorkerState() = default;
  WorkerState(std::size_t worker_id, bool byzantine, std::uint64_t seed) : id(worker_id), is_byzantine(byzantine), rng(seed) {}
};

/// Updates between exact recomputations of the SAGA running mean.
inline constexpr std::size_t kSagaResyncInterval = 4096;

/// Sets w = x0 and marks the cached full gradient stale.
void init_lsvrg(WorkerState& worker, std::span<const double> x0);

/// Recomputes grad f(w) if stale (m oracle calls). Returns true if it did.
bool refresh_reference_gradient(WorkerState& worker, const FiniteSum& obj);

/// Draws b indices i.i.d. uniform from [m] using the worker's stream.
std::vector<std::size_t> draw_batch(WorkerState& worker, std::size_t m, std::size_t b);

/// g = (1/b) sum_t (grad f_{j_t}(x) - grad f_{j_t}(w)) + grad f(w) on the
/// given batch. Refreshes the reference gradient first if needed. Counts
/// 2b oracle calls (plus m for a refresh).
Vector lsvrg_estimator(WorkerState& worker, const FiniteSum& obj, std::span<const double> x,
                       std::span<const std::size_t> batch);
/// Same, drawing the batch from the worker's stream.
Vector lsvrg_estimator(WorkerState& worker, const FiniteSum& obj, std::span<const double> x, std::size_t b);

/// With probability p sets w = x and marks the cached gradient stale.
bool maybe_switch_reference(WorkerState& worker, std::span<const double> x, double p);

/// Fills the table with grad f_j(x0) for all j (m oracle calls).
void init_saga(WorkerState& worker, const FiniteSum& obj, std::span<const double> x0);

/// g = (1/b) sum_t (grad f_{j_t}(x) - alpha_{j_t}) + mean(alpha), evaluated on
/// the table as it was before this call; afterwards alpha_{j_t} is replaced
/// by grad f_{j_t}(x) in draw order and the running mean updated. Counts b
/// oracle calls.
Vector saga_estimator(WorkerState& worker, const FiniteSum& obj, std::span<const double> x,
                      std::span<const std::size_t> batch);
Vector saga_estimator(WorkerState& worker, const FiniteSum& obj, std::span<const double> x, std::size_t b);

/// Max absolute deviation between the running mean and the exact mean of
/// the table.
double saga_mean_drift(const WorkerState& worker, std::size_t m);

}  // namespace brvr

#endif  // BRVR_ESTIMATORS_HPP
