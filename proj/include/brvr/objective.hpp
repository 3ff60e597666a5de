#ifndef BRVR_OBJECTIVE_HPP
#define BRVR_OBJECTIVE_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "brvr/data_io.hpp"

namespace brvr {

using Vector = std::vector<double>;

/// Counts component-gradient evaluations. A full gradient costs m calls.
struct OracleCounter {
  std::uint64_t component_calls = 0;
  void add(std::uint64_t calls) { component_calls += calls; }
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Finite-sum objective f(x) = (1/m) sum_j f_j(x) with per-component
/// gradient access. Implementations are immutable and safe to call from
/// multiple threads.
class FiniteSum {
 public:
  virtual ~FiniteSum() = default;

  virtual std::size_t size() const = 0;
  virtual std::size_t dim() const = 0;

  virtual double component_loss(std::size_t j, std::span<const double> x) const = 0;
  /// out += scale * grad f_j(x)
  virtual void add_component_grad(std::size_t j, std::span<const double> x, double scale,
                                  std::span<double> out) const = 0;

  /// out += scale * (grad f_j(x) - grad f_j(w)); exactly zero when x == w.
  virtual void add_component_grad_diff(std::size_t j, std::span<const double> x, std::span<const double> w,
                                       double scale, std::span<double> out) const;

  Vector component_grad(std::size_t j, std::span<const double> x) const;

  virtual double loss(std::span<const double> x) const;
  virtual void full_grad(std::span<const double> x, std::span<double> out) const;
  Vector full_grad(std::span<const double> x) const;

  /// (1/m) sum_j || grad f_j(u) - grad f_j(v) ||^2
  virtual double mean_squared_grad_gap(std::span<const double> u, std::span<const double> v) const;

 protected:
  void check_dim(std::span<const double> x) const;
  void check_index(std::size_t j) const;
};

struct SmoothnessConstants {
  double L = 0.0;               ///< smoothness of f
  std::vector<double> L_j;      ///< per-component smoothness
  double mu = 0.0;              ///< strong convexity of f
};

/// l2-regularised logistic regression:
///   f_j(x) = ln(1 + exp(-y_j <a_j, x>)) + (l2/2) ||x||^2.
class LogisticObjective final : public FiniteSum {
 public:
  /// Computes the smoothness constant with power iteration on A^T A.
  LogisticObjective(std::shared_ptr<const Dataset> data, double l2);

  /// Regulariser set to L0/1000 where L0 is the smoothness constant at
  /// l2 = 0; the resulting L is L0 + l2.
  static LogisticObjective with_default_l2(std::shared_ptr<const Dataset> data);

  std::size_t size() const override { return data_->size(); }
  std::size_t dim() const override { return data_->dim; }

  double component_loss(std::size_t j, std::span<const double> x) const override;
  void add_component_grad(std::size_t j, std::span<const double> x, double scale,
                          std::span<double> out) const override;
  void add_component_grad_diff(std::size_t j, std::span<const double> x, std::span<const double> w,
                               double scale, std::span<double> out) const override;
  double loss(std::span<const double> x) const override;
  void full_grad(std::span<const double> x, std::span<double> out) const override;
  using FiniteSum::full_grad;
  double mean_squared_grad_gap(std::span<const double> u, std::span<const double> v) const override;

  const Dataset& data() const { return *data_; }
  std::shared_ptr<const Dataset> data_ptr() const { return data_; }
  double l2() const { return l2_; }
  double L() const { return L_; }
  double mu() const { return l2_; }
  /// lambda_max(A^T A)
  double gram_lambda_max() const { return lambda_max_; }
  SmoothnessConstants smoothness_constants() const;

  /// Same l2 and constants over the label-negated dataset.
  LogisticObjective with_negated_labels() const;

 private:
  LogisticObjective(std::shared_ptr<const Dataset> data, double l2, double lambda_max);

  std::shared_ptr<const Dataset> data_;
  double l2_;
  double lambda_max_;
  double L_;
};

struct PowerIterationResult {
  double eigenvalue = 0.0;
  std::size_t iterations = 0;
  double relative_change = 0.0;
};

/// Largest eigenvalue of A^T A by power iteration from a fixed-seed start.
/// Stops when the Rayleigh quotient changes by at most rel_tol (relative).
/// Throws NumericalError if max_iter is reached first.
PowerIterationResult gram_lambda_max(const Dataset& ds, double rel_tol = 1e-6, std::size_t max_iter = 10000);

/// f_j(x) = (h_j / 2) ||x - c_j||^2. Small closed-form problems for tests
/// and examples; L_j = h_j, mu = mean(h).
class QuadraticFiniteSum final : public FiniteSum {
 public:
  QuadraticFiniteSum(std::vector<Vector> centers, std::vector<double> curvatures);

  std::size_t size() const override { return centers_.size(); }
  std::size_t dim() const override { return centers_.front().size(); }
  double component_loss(std::size_t j, std::span<const double> x) const override;
  void add_component_grad(std::size_t j, std::span<const double> x, double scale,
                          std::span<double> out) const override;
  SmoothnessConstants smoothness_constants() const;

 private:
  std::vector<Vector> centers_;
  std::vector<double> curvatures_;
};

struct AssumptionReport {
  bool passed = true;
  std::size_t trials = 0;
  std::size_t convexity_violations = 0;        ///< component convexity
  std::size_t smoothness_violations = 0;       ///< component Lipschitz gradient
  std::size_t strong_convexity_violations = 0; ///< strong convexity of f
  /// Minimum margin seen for each inequality; negative means violated.
  double worst_convexity_slack = 0.0;
  double worst_smoothness_slack = 0.0;
  double worst_strong_convexity_slack = 0.0;
};

/// Probes convexity and L_j-smoothness of every sampled component and
/// mu-strong convexity of f on random point pairs. Half of the smoothness
/// probes step along a row-aligned direction near the origin, where the
/// logistic bound is nearly tight.
AssumptionReport check_assumption1(const FiniteSum& obj, std::span<const double> L_j, double mu,
                                   std::size_t trials, std::uint64_t seed);
AssumptionReport check_assumption1(const LogisticObjective& obj, std::size_t trials, std::uint64_t seed);

}  // namespace brvr

#endif  // BRVR_OBJECTIVE_HPP
