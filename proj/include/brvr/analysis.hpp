#ifndef BRVR_ANALYSIS_HPP
#define BRVR_ANALYSIS_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "brvr/estimators.hpp"
#include "brvr/objective.hpp"

namespace brvr {

struct ReferenceSolution {
  Vector x_star;
  double f_star = 0.0;
  double grad_norm = 0.0;
  double solver_tol = 0.0;
  std::size_t iterations = 0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, ReferenceSolution best) : std::runtime_error(what), best_(std::move(best)) {}
  const ReferenceSolution& best() const { return best_; }

 private:
  ReferenceSolution best_;
};

/// Full-gradient descent with stepsize 1/L and constant Nesterov momentum
/// (sqrt(kappa)-1)/(sqrt(kappa)+1), restarted whenever the objective
/// increases. Starts at zero and stops once ||grad f|| <= tol. Throws
/// SolverError (carrying the best iterate) after max_iter iterations.
ReferenceSolution solve_reference(const FiniteSum& obj, double L, double mu, double tol = 1e-12,
                                  std::size_t max_iter = 1'000'000);
ReferenceSolution solve_reference(const LogisticObjective& obj, double tol = 1e-12,
                                  std::size_t max_iter = 1'000'000);

enum class LyapunovVariant { Thm1, Thm2 };

/// 8 for the bounded-variance rate, 72 for the variance-free rate.
double lyapunov_coefficient(LyapunovVariant v);

struct LyapunovValue {
  double psi = 0.0;
  double sigma_k2 = 0.0;
};

/// sigma_k^2 = (1/(G m)) sum_{i in honest} sum_j ||grad f_j(w_i) - grad f_j(x*)||^2
/// and Psi = ||x - x*||^2 + coef * gamma^2 / p * sigma_k^2. Costs G*m
/// component gradients, added to `diagnostic` when given.
LyapunovValue lyapunov(const FiniteSum& obj, std::span<const double> x, std::span<const Vector> reference_points,
                       double gamma, double p, std::span<const double> x_star, LyapunovVariant variant,
                       OracleCounter* diagnostic = nullptr);

/// Empirical variance (1/m) sum_j ||grad f_j(x) - grad f(x)||^2 at a point.
double gradient_variance(const FiniteSum& obj, std::span<const double> x);

/// Radius of the neighbourhood in the bounded-variance rate:
/// gamma * 32 c delta sigma^2 / (b mu) + 32 c delta sigma^2 / (b mu^2).
double neighborhood_size(double gamma, double b, double mu, double c, double delta, double sigma2);

enum class BoundMethod { BRLSVRG, ByrdSAGA, ByzVRMARINA };

std::string_view to_string(BoundMethod m);
BoundMethod parse_bound_method(std::string_view text);

struct ComplexityInputs {
  double L = 1.0;
  double mu = 1.0;
  double m = 1.0;
  double n = 1.0;
  double b = 1.0;
  double c = 1.0;
  double delta = 0.0;
  double eps = 0.1;
};

/// Iteration and oracle-call bounds with every hidden constant set to 1.
struct ComplexityReport {
  BoundMethod method = BoundMethod::BRLSVRG;
  double iterations_bound = 0.0;
  double oracle_bound = 0.0;
  ComplexityInputs inputs;
  /// Batch size the variance-free rate asks for:
  /// max{1, 144 c delta L / mu, sqrt(c delta m)} (BR-LSVRG only, else 0).
  double regime_batchsize = 0.0;
  std::string note = "up to absolute constants";
};

/// Throws std::domain_error for delta outside [0, 1/2) or eps outside (0, 1).
ComplexityReport complexity_bounds(BoundMethod method, const ComplexityInputs& in);

}  // namespace brvr

#endif  // BRVR_ANALYSIS_HPP
