#ifndef BRVR_ENGINE_HPP
#define BRVR_ENGINE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "brvr/aggregation.hpp"
#include "brvr/analysis.hpp"
#include "brvr/attacks.hpp"
#include "brvr/objective.hpp"

namespace brvr {

enum class Method { BRLSVRG, ByrdSAGA };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  Method method = Method::BRLSVRG;
  double gamma = 0.0;
  std::size_t b = 1;
  /// Reference switch probability; b/m when unset.
  std::optional<double> p;
  std::size_t n = 16;
  std::vector<std::size_t> byzantine_ids;
  AggregatorSpec aggregator;
  AttackSpec attack;
  std::size_t K = 0;
  std::uint64_t master_seed = 0;
  std::size_t eval_every = 1;
  LyapunovVariant psi_variant = LyapunovVariant::Thm1;
  /// Compute sigma_k^2 and Psi at eval points (BR-LSVRG only).
  bool track_psi = true;
  /// Fill elapsed_s with wall time. Off by default so traces are
  /// reproducible byte for byte.
  bool record_time = false;
  /// Called after every round with the n messages the server received,
  /// indexed by worker id, before aggregation.
  std::function<void(std::size_t k, const std::vector<Vector>& messages)> observer;

  double resolved_p(std::size_t m) const;
  double byzantine_fraction() const;
};

/// Ids n-count .. n-1.
std::vector<std::size_t> last_workers(std::size_t n, std::size_t count);

/// Checks a configuration against a problem of m components. Throws
/// ConfigError on hard errors and returns soft warnings (e.g. a Byzantine
/// fraction of at least one half).
std::vector<std::string> validate(const RunConfig& config, std::size_t m);

/// The aggregation rule the engine actually applies: bucket size resolved
/// from the Byzantine fraction when left open, and Krum's B set to the
/// configured Byzantine count.
AggregatorSpec resolve_aggregator(const RunConfig& config);

struct TracePoint {
  std::size_t k = 0;
  double loss = 0.0;
  double subopt = 0.0;
  double dist2 = 0.0;
  double sigma_k2 = 0.0;
  double psi_k = 0.0;
  std::uint64_t oracle_calls = 0;  ///< cumulative, honest workers only
  double elapsed_s = 0.0;
};

enum class RunStatus { Completed, Diverged };

struct RunTrace {
  std::vector<TracePoint> points;
  Vector final_x;
  RunStatus status = RunStatus::Completed;
  std::string message;
  std::vector<std::string> warnings;
  std::size_t rounds_completed = 0;
  std::uint64_t honest_calls = 0;
  std::uint64_t byzantine_calls = 0;
  std::uint64_t diagnostic_calls = 0;
  AggregatorSpec aggregator;
  double p = 0.0;
  double wall_time_s = 0.0;
};

/// Runs K rounds of the configured method on `obj` from x0.
///
/// `flipped` is the label-negated objective, required for the label-flip
/// attack. Without a reference solution the trace carries losses only
/// (subopt, dist2 and psi are NaN).
RunTrace run(const RunConfig& config, const FiniteSum& obj, const FiniteSum* flipped, std::span<const double> x0,
             const ReferenceSolution* reference = nullptr);
RunTrace run(const RunConfig& config, const LogisticObjective& obj, std::span<const double> x0,
             const ReferenceSolution* reference = nullptr);

/// min{1/(12L), p/mu} for the bounded-variance rate, min{1/(144L), p/mu}
/// for the variance-free one.
double theoretical_stepsize(double L, double mu, double p, LyapunovVariant regime);

/// Columns k,subopt,dist2,sigma_k2,psi_k,oracle_calls,elapsed_s.
void write_trace_csv(const RunTrace& trace, std::ostream& out);

}  // namespace brvr

#endif  // BRVR_ENGINE_HPP
