#include "brvr/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brvr/kernels.hpp"
#include "brvr/rng.hpp"

namespace brvr {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return dot(a, a); }

}  // namespace

void FiniteSum::check_dim(std::span<const double> x) const {
  if (x.size() != dim())
    throw std::invalid_argument("vector has dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(dim()));
}

void FiniteSum::check_index(std::size_t j) const {
  if (j >= size()) throw std::invalid_argument("component index " + std::to_string(j) + " out of range");
}

void FiniteSum::add_component_grad_diff(std::size_t j, std::span<const double> x, std::span<const double> w,
                                        double scale, std::span<double> out) const {
  Vector gx(dim(), 0.0), gw(dim(), 0.0);
  add_component_grad(j, x, 1.0, gx);
  add_component_grad(j, w, 1.0, gw);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * (gx[i] - gw[i]);
}

Vector FiniteSum::component_grad(std::size_t j, std::span<const double> x) const {
  Vector g(dim(), 0.0);
  add_component_grad(j, x, 1.0, g);
  return g;
}

double FiniteSum::loss(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t j = 0; j < size(); ++j) s += component_loss(j, x);
  return s / static_cast<double>(size());
}

void FiniteSum::full_grad(std::span<const double> x, std::span<double> out) const {
  check_dim(x);
  std::fill(out.begin(), out.end(), 0.0);
  const double w = 1.0 / static_cast<double>(size());
  for (std::size_t j = 0; j < size(); ++j) add_component_grad(j, x, w, out);
}

Vector FiniteSum::full_grad(std::span<const double> x) const {
  Vector g(dim());
  full_grad(x, g);
  return g;
}

double FiniteSum::mean_squared_grad_gap(std::span<const double> u, std::span<const double> v) const {
  check_dim(u);
  check_dim(v);
  Vector diff(dim());
  double total = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    std::fill(diff.begin(), diff.end(), 0.0);
    add_component_grad(j, u, 1.0, diff);
    add_component_grad(j, v, -1.0, diff);
    total += norm2(diff);
  }
  return total / static_cast<double>(size());
}

// ---------------------------------------------------------------------------

PowerIterationResult gram_lambda_max(const Dataset& ds, double rel_tol, std::size_t max_iter) {
  const std::size_t d = ds.dim;
  PowerIterationResult res;
  if (d == 0) return res;

  Rng rng(derive_seed(0x5eed, hash_tag("power-iteration")));
  Vector v(d), w(d);
  for (double& e : v) e = uniform01(rng) + 0.5;
  double nv = std::sqrt(norm2(v));
  for (double& e : v) e /= nv;

  double lambda = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    kernels::gram_matvec(ds, v, w);
    const double next = dot(v, w);  // Rayleigh quotient, ||v|| = 1
    const double nw = std::sqrt(norm2(w));
    res.iterations = it;
    if (nw == 0.0) {
      res.eigenvalue = 0.0;
      res.relative_change = 0.0;
      return res;
    }
    res.relative_change = std::abs(next - lambda) / std::max(std::abs(next), std::numeric_limits<double>::min());
    lambda = next;
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / nw;
    if (it > 1 && res.relative_change <= rel_tol) {
      res.eigenvalue = lambda;
      return res;
    }
  }
  throw NumericalError("power iteration did not converge in " + std::to_string(max_iter) +
                           " iterations (relative change " + std::to_string(res.relative_change) + ")",
                       res.relative_change);
}

LogisticObjective::LogisticObjective(std::shared_ptr<const Dataset> data, double l2)
    : LogisticObjective(data, l2, brvr::gram_lambda_max(*data).eigenvalue) {}

LogisticObjective::LogisticObjective(std::shared_ptr<const Dataset> data, double l2, double lambda_max)
    : data_(std::move(data)), l2_(l2), lambda_max_(lambda_max) {
  if (!data_) throw std::invalid_argument("null dataset");
  data_->validate();
  if (!(l2_ >= 0.0) || !std::isfinite(l2_)) throw std::invalid_argument("l2 must be finite and non-negative");
  L_ = l2_ + lambda_max_ / (4.0 * static_cast<double>(data_->size()));
}

LogisticObjective LogisticObjective::with_default_l2(std::shared_ptr<const Dataset> data) {
  const double lambda = brvr::gram_lambda_max(*data).eigenvalue;
  const double L0 = lambda / (4.0 * static_cast<double>(data->size()));
  return LogisticObjective(std::move(data), L0 / 1000.0, lambda);
}

LogisticObjective LogisticObjective::with_negated_labels() const {
  auto flipped = std::make_shared<const Dataset>(data_->with_negated_labels());
  return LogisticObjective(std::move(flipped), l2_, lambda_max_);
}

double LogisticObjective::component_loss(std::size_t j, std::span<const double> x) const {
  check_index(j);
  check_dim(x);
  const double t = -data_->labels[j] * data_->rows[j].dot(x);
  return kernels::log1p_exp(t) + 0.5 * l2_ * norm2(x);
}

void LogisticObjective::add_component_grad(std::size_t j, std::span<const double> x, double scale,
                                           std::span<double> out) const {
  check_index(j);
  check_dim(x);
  const double y = data_->labels[j];
  const auto& row = data_->rows[j];
  const double s = kernels::sigmoid(-y * row.dot(x));
  row.axpy(-scale * y * s, out);
  if (l2_ != 0.0) {
    const double c = scale * l2_;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += c * x[i];
  }
}

void LogisticObjective::add_component_grad_diff(std::size_t j, std::span<const double> x,
                                                std::span<const double> w, double scale,
                                                std::span<double> out) const {
  check_index(j);
  check_dim(x);
  check_dim(w);
  const double y = data_->labels[j];
  const auto& row = data_->rows[j];
  const double sx = kernels::sigmoid(-y * row.dot(x));
  const double sw = kernels::sigmoid(-y * row.dot(w));
  row.axpy(-scale * y * (sx - sw), out);
  if (l2_ != 0.0) {
    const double c = scale * l2_;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += c * (x[i] - w[i]);
  }
}

double LogisticObjective::loss(std::span<const double> x) const {
  check_dim(x);
  return kernels::mean_logistic_loss(*data_, x) + 0.5 * l2_ * norm2(x);
}

void LogisticObjective::full_grad(std::span<const double> x, std::span<double> out) const {
  check_dim(x);
  kernels::mean_logistic_grad(*data_, x, out);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += l2_ * x[i];
}

double LogisticObjective::mean_squared_grad_gap(std::span<const double> u, std::span<const double> v) const {
  check_dim(u);
  check_dim(v);
  return kernels::mean_squared_grad_gap(*data_, l2_, u, v);
}

SmoothnessConstants LogisticObjective::smoothness_constants() const {
  SmoothnessConstants c;
  c.L = L_;
  c.mu = l2_;
  c.L_j.reserve(size());
  for (const auto& row : data_->rows) c.L_j.push_back(l2_ + row.squared_norm() / 4.0);
  return c;
}

// ---------------------------------------------------------------------------

QuadraticFiniteSum::QuadraticFiniteSum(std::vector<Vector> centers, std::vector<double> curvatures)
    : centers_(std::move(centers)), curvatures_(std::move(curvatures)) {
  if (centers_.empty() || centers_.size() != curvatures_.size())
    throw std::invalid_argument("need one curvature per center");
  for (const auto& c : centers_)
    if (c.size() != centers_.front().size()) throw std::invalid_argument("center dimension mismatch");
  for (double h : curvatures_)
    if (!(h > 0.0)) throw std::invalid_argument("curvatures must be positive");
}

double QuadraticFiniteSum::component_loss(std::size_t j, std::span<const double> x) const {
  check_index(j);
  check_dim(x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - centers_[j][i]) * (x[i] - centers_[j][i]);
  return 0.5 * curvatures_[j] * s;
}

void QuadraticFiniteSum::add_component_grad(std::size_t j, std::span<const double> x, double scale,
                                            std::span<double> out) const {
  check_index(j);
  check_dim(x);
  const double c = scale * curvatures_[j];
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += c * (x[i] - centers_[j][i]);
}

SmoothnessConstants QuadraticFiniteSum::smoothness_constants() const {
  SmoothnessConstants c;
  c.L_j = curvatures_;
  double sum = 0.0;
  for (double h : curvatures_) sum += h;
  c.mu = sum / static_cast<double>(curvatures_.size());
  c.L = c.mu;
  return c;
}

// ---------------------------------------------------------------------------

AssumptionReport check_assumption1(const FiniteSum& obj, std::span<const double> L_j, double mu,
                                   std::size_t trials, std::uint64_t seed) {
  constexpr double kTol = 1e-9;
  const std::size_t d = obj.dim();
  AssumptionReport rep;
  rep.trials = trials;
  rep.worst_convexity_slack = std::numeric_limits<double>::infinity();
  rep.worst_smoothness_slack = std::numeric_limits<double>::infinity();
  rep.worst_strong_convexity_slack = std::numeric_limits<double>::infinity();

  Rng rng(derive_seed(seed, hash_tag("assumption1")));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(d), y(d), other(d), step(d);

  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t j = uniform_index(rng, obj.size());
    const bool tight_probe = (t % 2 == 1);
    const double scale = tight_probe ? 0.01 : 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = scale * normal(rng);
      other[i] = normal(rng);
      y[i] = normal(rng);
    }
    if (tight_probe) {
      // Step along the direction in which grad f_j changes between x and a
      // far point; for generalised linear components this is the data row.
      Vector dir = obj.component_grad(j, x);
      obj.add_component_grad(j, other, -1.0, dir);
      const double nd = std::sqrt(norm2(dir));
      for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + (nd > 0 ? 1e-3 * dir[i] / nd : 1e-3 * other[i]);
    }

    const Vector gx = obj.component_grad(j, x);
    const Vector gy = obj.component_grad(j, y);
    double inner = 0.0, dist2 = 0.0, gdiff2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      step[i] = y[i] - x[i];
      inner += gx[i] * step[i];
      dist2 += step[i] * step[i];
      gdiff2 += (gx[i] - gy[i]) * (gx[i] - gy[i]);
    }

    const double convex_slack = obj.component_loss(j, y) - obj.component_loss(j, x) - inner + kTol;
    const double smooth_slack = L_j[j] * std::sqrt(dist2) * (1.0 + kTol) - std::sqrt(gdiff2);
    rep.worst_convexity_slack = std::min(rep.worst_convexity_slack, convex_slack);
    rep.worst_smoothness_slack = std::min(rep.worst_smoothness_slack, smooth_slack);
    if (convex_slack < 0) ++rep.convexity_violations;
    if (smooth_slack < 0) ++rep.smoothness_violations;

    const Vector fx = obj.full_grad(x);
    double full_inner = 0.0;
    for (std::size_t i = 0; i < d; ++i) full_inner += fx[i] * step[i];
    const double sc_slack = obj.loss(y) - obj.loss(x) - full_inner - 0.5 * mu * dist2 + kTol;
    rep.worst_strong_convexity_slack = std::min(rep.worst_strong_convexity_slack, sc_slack);
    if (sc_slack < 0) ++rep.strong_convexity_violations;
  }
  rep.passed = rep.convexity_violations == 0 && rep.smoothness_violations == 0 &&
               rep.strong_convexity_violations == 0;
  return rep;
}

AssumptionReport check_assumption1(const LogisticObjective& obj, std::size_t trials, std::uint64_t seed) {
  const auto c = obj.smoothness_constants();
  return check_assumption1(obj, c.L_j, c.mu, trials, seed);
}

}  // namespace brvr
