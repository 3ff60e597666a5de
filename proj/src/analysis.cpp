#include "brvr/analysis.hpp"

#include <cmath>
#include <limits>

namespace brvr {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

}  // namespace

ReferenceSolution solve_reference(const FiniteSum& obj, double L, double mu, double tol, std::size_t max_iter) {
  if (!(L > 0.0)) throw std::invalid_argument("solve_reference needs L > 0");
  const std::size_t d = obj.dim();
  const double step = 1.0 / L;
  const double kappa = mu > 0.0 ? L / mu : std::numeric_limits<double>::infinity();
  const double beta = std::isfinite(kappa) ? (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0) : 0.0;

  Vector x(d, 0.0), prev(d, 0.0), y(d), g(d), next(d);
  double fx = obj.loss(x);
  obj.full_grad(x, g);
  double gnorm = norm(g);

  ReferenceSolution best{x, fx, gnorm, tol, 0};
  for (std::size_t it = 1; it <= max_iter && gnorm > tol; ++it) {
    for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + beta * (x[i] - prev[i]);
    obj.full_grad(y, g);
    for (std::size_t i = 0; i < d; ++i) next[i] = y[i] - step * g[i];
    const double fnext = obj.loss(next);
    if (fnext > fx) {
      // Momentum overshoot: drop it and take a plain gradient step from x.
      obj.full_grad(x, g);
      for (std::size_t i = 0; i < d; ++i) next[i] = x[i] - step * g[i];
      prev = x;
      x = next;
      fx = obj.loss(x);
    } else {
      prev.swap(x);
      x = next;
      fx = fnext;
    }
    obj.full_grad(x, g);
    gnorm = norm(g);
    if (gnorm < best.grad_norm) best = ReferenceSolution{x, fx, gnorm, tol, it};
    best.iterations = it;
  }
  if (best.grad_norm > tol)
    throw SolverError("reference solver stopped at gradient norm " + std::to_string(best.grad_norm) +
                          " above tolerance",
                      best);
  return best;
}

ReferenceSolution solve_reference(const LogisticObjective& obj, double tol, std::size_t max_iter) {
  return solve_reference(obj, obj.L(), obj.mu(), tol, max_iter);
}

double lyapunov_coefficient(LyapunovVariant v) { return v == LyapunovVariant::Thm1 ? 8.0 : 72.0; }

LyapunovValue lyapunov(const FiniteSum& obj, std::span<const double> x, std::span<const Vector> reference_points,
                       double gamma, double p, std::span<const double> x_star, LyapunovVariant variant,
                       OracleCounter* diagnostic) {
  LyapunovValue out;
  double dist2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dist2 += (x[i] - x_star[i]) * (x[i] - x_star[i]);

  if (!reference_points.empty()) {
    // Workers that share a reference point share its term.
    std::vector<std::size_t> first_equal(reference_points.size());
    std::vector<double> term(reference_points.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < reference_points.size(); ++i) {
      first_equal[i] = i;
      for (std::size_t k = 0; k < i; ++k) {
        if (first_equal[k] == k && reference_points[k] == reference_points[i]) {
          first_equal[i] = k;
          break;
        }
      }
      term[i] = first_equal[i] == i ? obj.mean_squared_grad_gap(reference_points[i], x_star) : term[first_equal[i]];
      total += term[i];
    }
    out.sigma_k2 = total / static_cast<double>(reference_points.size());
    if (diagnostic) diagnostic->add(reference_points.size() * obj.size());
  }
  out.psi = dist2 + lyapunov_coefficient(variant) * gamma * gamma / p * out.sigma_k2;
  return out;
}

double gradient_variance(const FiniteSum& obj, std::span<const double> x) {
  const Vector full = obj.full_grad(x);
  Vector g(obj.dim());
  double total = 0.0;
  for (std::size_t j = 0; j < obj.size(); ++j) {
    std::fill(g.begin(), g.end(), 0.0);
    obj.add_component_grad(j, x, 1.0, g);
    for (std::size_t i = 0; i < g.size(); ++i) total += (g[i] - full[i]) * (g[i] - full[i]);
  }
  return total / static_cast<double>(obj.size());
}

double neighborhood_size(double gamma, double b, double mu, double c, double delta, double sigma2) {
  const double base = 32.0 * c * delta * sigma2 / b;
  return gamma * base / mu + base / (mu * mu);
}

std::string_view to_string(BoundMethod m) {
  switch (m) {
    case BoundMethod::BRLSVRG: return "br-lsvrg";
    case BoundMethod::ByrdSAGA: return "byrd-saga";
    case BoundMethod::ByzVRMARINA: return "byz-vr-marina";
  }
  return "?";
}

BoundMethod parse_bound_method(std::string_view text) {
  if (text == "br-lsvrg" || text == "brlsvrg") return BoundMethod::BRLSVRG;
  if (text == "byrd-saga" || text == "byrd_saga" || text == "saga") return BoundMethod::ByrdSAGA;
  if (text == "byz-vr-marina" || text == "marina") return BoundMethod::ByzVRMARINA;
  throw std::invalid_argument("unknown method '" + std::string(text) + "'");
}

ComplexityReport complexity_bounds(BoundMethod method, const ComplexityInputs& in) {
  if (!(in.delta >= 0.0 && in.delta < 0.5)) throw std::domain_error("delta must lie in [0, 1/2)");
  if (!(in.eps > 0.0 && in.eps < 1.0)) throw std::domain_error("eps must lie in (0, 1)");
  if (!(in.L > 0 && in.mu > 0 && in.m > 0 && in.n > 0 && in.b > 0 && in.c > 0))
    throw std::domain_error("L, mu, m, n, b, c must be positive");

  ComplexityReport r;
  r.method = method;
  r.inputs = in;
  const double log_term = std::log(1.0 / in.eps);
  const double kappa = in.L / in.mu;
  const double cd = in.c * in.delta;

  switch (method) {
    case BoundMethod::BRLSVRG:
      r.iterations_bound = (kappa + in.m / in.b) * log_term;
      r.oracle_bound = (kappa + in.L * in.L * std::sqrt(cd) / (in.mu * in.mu) +
                        in.L * std::sqrt(cd * in.m) / in.mu + in.m) *
                       log_term;
      r.regime_batchsize = std::max({1.0, 144.0 * cd * in.L / in.mu, std::sqrt(cd * in.m)});
      break;
    case BoundMethod::ByrdSAGA: {
      const double core = in.m * in.m * in.L * in.L / ((1.0 - 2.0 * in.delta) * in.mu * in.mu);
      r.iterations_bound = core / (in.b * in.b) * log_term;
      r.oracle_bound = core / in.b * log_term;
      break;
    }
    case BoundMethod::ByzVRMARINA: {
      const double sqrt_m_over_n = std::sqrt(in.m) / std::sqrt(in.n);
      r.iterations_bound = (kappa + in.L * sqrt_m_over_n / (in.mu * in.b) +
                            in.L * in.m * std::sqrt(cd) / (in.mu * std::pow(in.b, 1.5)) + in.m / in.b) *
                           log_term;
      r.oracle_bound = (in.b * kappa + in.L * sqrt_m_over_n / in.mu +
                        in.L * in.m * std::sqrt(cd) / (in.mu * std::sqrt(in.b)) + in.m) *
                       log_term;
      break;
    }
  }
  return r;
}

}  // namespace brvr
