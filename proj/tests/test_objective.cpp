#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "brvr/analysis.hpp"
#include "brvr/objective.hpp"
#include "brvr/rng.hpp"

using namespace brvr;

namespace {

std::shared_ptr<const Dataset> dense_dataset(const std::vector<std::vector<double>>& a, const std::vector<double>& y) {
  Dataset ds;
  ds.dim = a.front().size();
  for (std::size_t j = 0; j < a.size(); ++j) {
    SparseRow row;
    for (std::size_t i = 0; i < a[j].size(); ++i)
      if (a[j][i] != 0.0) {
        row.indices.push_back(static_cast<std::uint32_t>(i));
        row.values.push_back(a[j][i]);
      }
    ds.rows.push_back(row);
    ds.labels.push_back(y[j]);
  }
  return std::make_shared<const Dataset>(std::move(ds));
}

Vector random_point(std::size_t d, Rng& rng, double scale = 1.0) {
  Vector x(d);
  for (double& v : x) v = scale * (2.0 * uniform01(rng) - 1.0);
  return x;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

// The 5x3 dataset used to generate tests/data/logistic_reference.txt.
std::shared_ptr<const Dataset> reference_dataset() {
  return dense_dataset({{0.5, -1.25, 2.0}, {0.0, 0.75, -0.5}, {1.5, 0.0, 0.0}, {-2.0, 1.0, 0.25}, {0.125, -0.375, 1.75}},
                       {1, -1, 1, -1, 1});
}

// Gradient scaled by 1.5: a deliberately broken oracle.
class ScaledGradient final : public FiniteSum {
 public:
  explicit ScaledGradient(const LogisticObjective& inner) : inner_(inner) {}
  std::size_t size() const override { return inner_.size(); }
  std::size_t dim() const override { return inner_.dim(); }
  double component_loss(std::size_t j, std::span<const double> x) const override {
    return inner_.component_loss(j, x);
  }
  void add_component_grad(std::size_t j, std::span<const double> x, double scale,
                          std::span<double> out) const override {
    inner_.add_component_grad(j, x, 1.5 * scale, out);
  }

 private:
  const LogisticObjective& inner_;
};

}  // namespace

TEST_CASE("component loss at the origin is ln 2") {
  const LogisticObjective obj(reference_dataset(), 0.3);
  const Vector zero(3, 0.0);
  for (std::size_t j = 0; j < obj.size(); ++j) CHECK(obj.component_loss(j, zero) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("loss decreases to zero as the margin grows") {
  const LogisticObjective obj(dense_dataset({{1.0, 0.0}}, {1.0}), 0.0);
  double prev = obj.component_loss(0, Vector{0.0, 0.0});
  for (double t = 1.0; t <= 1e4; t *= 2.0) {
    const double cur = obj.component_loss(0, Vector{t, 0.0});
    CHECK(cur <= prev);
    CHECK(cur >= 0.0);
    prev = cur;
  }
  CHECK(prev < 1e-300);
}

TEST_CASE("component loss matches a 50-digit reference") {
  const LogisticObjective obj(reference_dataset(), 0.0625);
  std::ifstream in(std::string(BRVR_TEST_DATA) + "/logistic_reference.txt");
  REQUIRE(in);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::size_t j;
    Vector x(3);
    std::string ref_text;
    ss >> j >> x[0] >> x[1] >> x[2] >> ref_text;
    const long double ref = std::stold(ref_text);
    const double got = obj.component_loss(j, x);
    CHECK(std::abs(static_cast<long double>(got) - ref) <= 1e-12L * std::abs(ref));
    ++rows;
  }
  CHECK(rows == 40);
}

TEST_CASE("gradient examples") {
  const auto data = reference_dataset();
  SUBCASE("origin without regularization gives -y a / 2") {
    const LogisticObjective obj(data, 0.0);
    const Vector zero(3, 0.0);
    for (std::size_t j = 0; j < obj.size(); ++j) {
      const Vector g = obj.component_grad(j, zero);
      Vector expect(3, 0.0);
      data->rows[j].axpy(-data->labels[j] / 2.0, expect);
      CHECK(g == expect);
    }
  }
  SUBCASE("an empty row only sees the regularizer") {
    const LogisticObjective obj(dense_dataset({{0.0, 0.0}, {1.0, 2.0}}, {1, -1}), 0.25);
    const Vector x{3.0, -5.0};
    CHECK(obj.component_grad(0, x) == Vector{0.75, -1.25});
  }
  SUBCASE("dimension mismatch") {
    const LogisticObjective obj(data, 0.1);
    CHECK_THROWS_AS(obj.component_grad(0, Vector(2, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(obj.component_loss(0, Vector(4, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(obj.component_grad(5, Vector(3, 0.0)), std::invalid_argument);
  }
}

TEST_CASE("gradient agrees with central differences") {
  const auto data = std::make_shared<const Dataset>(make_gaussian_dataset(30, 6, 4));
  const LogisticObjective obj(data, 0.05);
  Rng rng(17);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t j = uniform_index(rng, obj.size());
    Vector x = random_point(obj.dim(), rng, 2.0);
    const Vector g = obj.component_grad(j, x);
    Vector fd(obj.dim());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd[i] = (obj.component_loss(j, xp) - obj.component_loss(j, xm)) / (2.0 * h);
    }
    Vector diff(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) diff[i] = g[i] - fd[i];
    worst = std::max(worst, norm(diff) / std::max(norm(g), 1e-8));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("full gradient") {
  SUBCASE("single component") {
    const LogisticObjective obj(dense_dataset({{1.0, -2.0, 0.5}}, {-1}), 0.2);
    const Vector x{0.3, 0.1, -0.7};
    const Vector full = obj.full_grad(x), comp = obj.component_grad(0, x);
    for (std::size_t i = 0; i < 3; ++i) CHECK(full[i] == doctest::Approx(comp[i]).epsilon(1e-15));
  }
  SUBCASE("equals the mean of component gradients") {
    const auto data = std::make_shared<const Dataset>(make_mushrooms_like(2, 700));
    const LogisticObjective obj(data, 0.01);
    Rng rng(3);
    const Vector x = random_point(obj.dim(), rng, 0.3);
    const Vector full = obj.full_grad(x);
    Vector naive(obj.dim(), 0.0);
    for (std::size_t j = 0; j < obj.size(); ++j) obj.add_component_grad(j, x, 1.0 / 700.0, naive);
    for (std::size_t i = 0; i < naive.size(); ++i) CHECK(std::abs(full[i] - naive[i]) < 1e-12);

    double loss = 0.0;
    for (std::size_t j = 0; j < obj.size(); ++j) loss += obj.component_loss(j, x);
    CHECK(obj.loss(x) == doctest::Approx(loss / 700.0).epsilon(1e-13));
  }
  SUBCASE("vanishes at the reference minimizer") {
    const auto data = std::make_shared<const Dataset>(make_gaussian_dataset(60, 5, 8));
    const auto obj = LogisticObjective::with_default_l2(data);
    const ReferenceSolution ref = solve_reference(obj, 1e-12);
    CHECK(norm(obj.full_grad(ref.x_star)) <= 1e-12);
  }
  SUBCASE("grad diff is exactly zero when x == w") {
    const auto data = std::make_shared<const Dataset>(make_gaussian_dataset(10, 4, 1));
    const LogisticObjective obj(data, 0.1);
    Rng rng(1);
    const Vector x = random_point(4, rng);
    Vector out(4, 0.0);
    for (std::size_t j = 0; j < obj.size(); ++j) obj.add_component_grad_diff(j, x, x, 0.7, out);
    CHECK(out == Vector(4, 0.0));
  }
}

TEST_CASE("smoothness constants") {
  SUBCASE("rank one") {
    const LogisticObjective obj(dense_dataset({{2.0, 0.0}}, {1}), 0.0);
    CHECK(obj.gram_lambda_max() == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(obj.L() == doctest::Approx(1.0).epsilon(1e-6));
    const auto c = obj.smoothness_constants();
    CHECK(c.L_j == std::vector<double>{1.0});
    CHECK(c.mu == 0.0);
  }
  SUBCASE("unit basis rows") {
    const std::size_t m = 7;
    std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) a[i][i] = 1.0;
    const LogisticObjective obj(dense_dataset(a, std::vector<double>(m, 1.0)), 0.0);
    CHECK(obj.L() == doctest::Approx(1.0 / (4.0 * m)).epsilon(1e-6));
  }
  SUBCASE("matches a dense eigensolver") {
    Rng rng(20);
    std::vector<std::vector<double>> a(20, std::vector<double>(5));
    Eigen::MatrixXd A(20, 5);
    for (std::size_t j = 0; j < 20; ++j)
      for (std::size_t i = 0; i < 5; ++i) A(j, i) = a[j][i] = 2.0 * uniform01(rng) - 1.0;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A.transpose() * A);
    const double lambda = eig.eigenvalues().maxCoeff();
    const LogisticObjective obj(dense_dataset(a, std::vector<double>(20, 1.0)), 0.01);
    CHECK(std::abs(obj.L() - (0.01 + lambda / 80.0)) <= 1e-5 * obj.L());
    const auto c = obj.smoothness_constants();
    for (std::size_t j = 0; j < 20; ++j) CHECK(c.L_j[j] == doctest::Approx(0.01 + A.row(j).squaredNorm() / 4.0));
    CHECK(c.mu == 0.01);
  }
  SUBCASE("default regularizer is one thousandth of the unregularized constant") {
    const auto data = std::make_shared<const Dataset>(make_gaussian_dataset(50, 4, 6));
    const LogisticObjective bare(data, 0.0);
    const auto obj = LogisticObjective::with_default_l2(data);
    CHECK(obj.l2() == doctest::Approx(bare.L() / 1000.0).epsilon(1e-12));
    CHECK(obj.L() == doctest::Approx(bare.L() + obj.l2()).epsilon(1e-12));
    CHECK(obj.mu() == obj.l2());
    CHECK(obj.L() >= obj.mu());
  }
  SUBCASE("power iteration reports non-convergence") {
    // Two nearly equal top eigenvalues converge slowly.
    const auto data = dense_dataset({{1.0, 0.0}, {0.0, 0.999999}}, {1, 1});
    CHECK_THROWS_AS(gram_lambda_max(*data, 1e-15, 3), NumericalError);
    try {
      gram_lambda_max(*data, 1e-15, 3);
    } catch (const NumericalError& e) {
      CHECK(e.residual() > 0.0);
    }
  }
  SUBCASE("zero matrix") {
    const auto data = dense_dataset({{0.0, 0.0}}, {1});
    CHECK(gram_lambda_max(*data).eigenvalue == 0.0);
  }
}

TEST_CASE("assumption checks") {
  SUBCASE("logistic objectives pass") {
    const auto data = std::make_shared<const Dataset>(make_gaussian_dataset(40, 6, 2));
    const LogisticObjective obj(data, 0.02);
    const AssumptionReport r = check_assumption1(obj, 400, 5);
    CHECK(r.passed);
    CHECK(r.trials == 400);
    CHECK(r.convexity_violations == 0);
    CHECK(r.smoothness_violations == 0);
    CHECK(r.strong_convexity_violations == 0);
  }
  SUBCASE("a scaled gradient violates component smoothness") {
    const auto data = std::make_shared<const Dataset>(make_gaussian_dataset(40, 6, 2));
    const LogisticObjective obj(data, 0.02);
    const ScaledGradient broken(obj);
    const auto c = obj.smoothness_constants();
    const AssumptionReport r = check_assumption1(broken, c.L_j, c.mu, 400, 5);
    CHECK_FALSE(r.passed);
    CHECK(r.smoothness_violations > 0);
    CHECK(r.worst_smoothness_slack < 0.0);
  }
  SUBCASE("mushrooms-shaped subset: slacks finite and non-negative") {
    const auto data = std::make_shared<const Dataset>(subsample(make_mushrooms_like(1), 1000, 7));
    const auto obj = LogisticObjective::with_default_l2(data);
    const AssumptionReport r = check_assumption1(obj, 200, 11);
    CHECK(r.passed);
    for (double s : {r.worst_convexity_slack, r.worst_smoothness_slack, r.worst_strong_convexity_slack}) {
      CHECK(std::isfinite(s));
      CHECK(s >= 0.0);
    }
  }
}

TEST_CASE("strong convexity of f on random pairs") {
  const auto data = std::make_shared<const Dataset>(make_gaussian_dataset(25, 4, 12));
  const LogisticObjective obj(data, 0.5);
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const Vector x = random_point(4, rng, 3.0), y = random_point(4, rng, 3.0);
    const Vector g = obj.full_grad(x);
    double inner = 0.0, dist2 = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      inner += g[i] * (y[i] - x[i]);
      dist2 += (y[i] - x[i]) * (y[i] - x[i]);
    }
    CHECK(obj.loss(y) >= obj.loss(x) + inner + 0.5 * obj.mu() * dist2 - 1e-12);
  }
}

TEST_CASE("quadratic finite sum") {
  const QuadraticFiniteSum q({{0.0}, {1.0}}, {2.0, 2.0});
  CHECK(q.component_grad(0, Vector{1.0}) == Vector{2.0});
  CHECK(q.component_grad(1, Vector{0.0}) == Vector{-2.0});
  CHECK(q.full_grad(Vector{0.5}) == Vector{0.0});
  const auto c = q.smoothness_constants();
  CHECK(c.L == 2.0);
  CHECK(c.mu == 2.0);
}

TEST_CASE("label negation keeps constants") {
  const auto data = std::make_shared<const Dataset>(make_gaussian_dataset(20, 3, 1));
  const LogisticObjective obj(data, 0.1);
  const LogisticObjective neg = obj.with_negated_labels();
  CHECK(neg.L() == obj.L());
  CHECK(neg.l2() == obj.l2());
  const Vector zero(3, 0.0);
  const Vector g = obj.component_grad(0, zero), h = neg.component_grad(0, zero);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == -h[i]);
}
