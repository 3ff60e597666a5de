#ifndef BRVR_AGGREGATION_HPP
#define BRVR_AGGREGATION_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brvr/objective.hpp"

namespace brvr {

enum class BaseRule { Mean, GeometricMedian, CoordinateMedian, Krum };

struct WeiszfeldOptions {
  double tol = 1e-10;
  std::size_t max_iter = 1000;
};

/// Server aggregation rule: a base rule, optionally preceded by bucketing
/// with bucket size s.
struct AggregatorSpec {
  BaseRule base = BaseRule::Mean;
  std::optional<std::size_t> bucket_size;
  /// Assumed number of Byzantine inputs for Krum's neighbourhood size.
  std::size_t krum_byzantine_count = 0;
  WeiszfeldOptions weiszfeld;

  /// Short form such as "mean", "gm", "cm", "krum", "gm+bucket:2".
  std::string to_string() const;
  /// Parses the short form. "+bucket" without a size leaves bucket_size
  /// as 0, meaning "resolve from the Byzantine fraction later".
  static AggregatorSpec parse(std::string_view text);
};

std::string_view to_string(BaseRule rule);

/// Bucket size floor(delta_max / delta), floored at 1, with delta_max = 1/4
/// for Krum and 1/2 otherwise. delta = 0 gives 1.
std::size_t default_bucket_size(BaseRule rule, double delta);

Vector mean(std::span<const Vector> vectors);

struct GeometricMedianResult {
  Vector point;
  std::size_t iterations = 0;
  bool converged = false;
  /// sum_i ||x_t - x_i|| per iterate (filled only when requested).
  std::vector<double> objective_trace;
};

/// Weiszfeld iterations from the mean, with distances clamped below at
/// 1e-12. Stops when the step norm is at most tol or after max_iter steps;
/// returns the iterate with the lowest objective.
GeometricMedianResult geometric_median(std::span<const Vector> vectors, const WeiszfeldOptions& options = {},
                                       bool record_objective = false);

/// Per-coordinate median; even counts take the midpoint of the two central
/// order statistics.
Vector coordinate_median(std::span<const Vector> vectors);

/// Index of the input with the smallest Krum score (sum of squared
/// distances to its n - B - 2 nearest other inputs). Ties go to the lowest
/// index. Throws std::invalid_argument if n < B + 3.
std::size_t krum_index(std::span<const Vector> vectors, std::size_t byzantine_count);
Vector krum(std::span<const Vector> vectors, std::size_t byzantine_count);

/// Applies the base rule only (no bucketing).
Vector aggregate_base(const AggregatorSpec& spec, std::span<const Vector> vectors);

/// Shuffles with a permutation drawn from round_seed, averages consecutive
/// groups of s (the last group over its actual size), then applies the base
/// rule to the bucket means.
Vector bucketing_aggregate(const AggregatorSpec& spec, std::span<const Vector> vectors, std::uint64_t round_seed);

/// Dispatches to bucketing_aggregate when bucketing is configured, else to
/// the base rule.
Vector aggregate(const AggregatorSpec& spec, std::span<const Vector> vectors, std::uint64_t round_seed);

struct RobustnessAudit {
  double measured_sigma2 = 0.0;  ///< (1/(G(G-1))) sum_{i,l} ||x_i - x_l||^2
  double measured_err2 = 0.0;    ///< ||aggregate(all) - mean(honest)||^2
  std::optional<double> implied_c;
};

/// Measures how far the aggregate of `all` lands from the honest mean,
/// relative to delta times the honest pairwise spread.
RobustnessAudit audit_robustness(const AggregatorSpec& spec, std::span<const Vector> all,
                                 std::span<const std::size_t> honest_indices, double delta,
                                 std::uint64_t round_seed);

}  // namespace brvr

#endif  // BRVR_AGGREGATION_HPP
