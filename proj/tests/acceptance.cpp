// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "brvr/aggregation.hpp"
#include "brvr/analysis.hpp"
#include "brvr/data_io.hpp"
#include "brvr/engine.hpp"
#include "brvr/estimators.hpp"
#include "brvr/rng.hpp"

using namespace brvr;

namespace {

// Pinned tolerances.
constexpr double kStdErrs = 4.0;
constexpr double kRateSlack = 0.2;
constexpr double kAuditBound = 10.0;
constexpr double kMeanControl = 1e6;
constexpr double kSuboptTarget = 1e-5;
constexpr double kOracleTolerance = 0.05;

struct Problem {
  std::string source;
  std::shared_ptr<const LogisticObjective> obj;
  ReferenceSolution ref;
};

Problem mushrooms_subset() {
  Problem p;
  Dataset full;
  const char* env = std::getenv("BRVR_MUSHROOMS");
  if (env && *env && std::filesystem::exists(env)) {
    full = load_libsvm(env);
    p.source = std::string("mushrooms file ") + env;
  } else {
    full = make_mushrooms_like(1);
    p.source = "synthetic mushrooms-shaped data (set BRVR_MUSHROOMS to use the real file)";
  }
  auto data = std::make_shared<const Dataset>(subsample(full, 1000, 7));
  p.obj = std::make_shared<const LogisticObjective>(LogisticObjective::with_default_l2(data));
  p.ref = solve_reference(*p.obj);
  return p;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Report {
  int failures = 0;
  void line(int id, bool pass, const std::string& detail, double seconds) {
    if (!pass) ++failures;
    std::printf("criterion %d: %s  %s  (%.1fs)\n", id, pass ? "PASS" : "FAIL", detail.c_str(), seconds);
    std::fflush(stdout);
  }
};

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunConfig experiment_config(const LogisticObjective& obj, const std::string& attack, double gamma) {
  RunConfig c;
  c.method = Method::BRLSVRG;
  c.gamma = gamma;
  c.b = static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(obj.size())));
  c.n = 16;
  c.byzantine_ids = last_workers(16, 3);
  c.aggregator = AggregatorSpec::parse("gm+bucket");
  c.attack = AttackSpec::parse(attack);
  c.K = 30000;
  c.eval_every = 1000;
  c.track_psi = false;
  return c;
}

template <class Draw>
bool within_stderrs(std::size_t d, std::size_t draws, const Vector& target, Draw&& draw, double& worst) {
  Vector sum(d, 0.0), sum2(d, 0.0);
  for (std::size_t t = 0; t < draws; ++t) {
    const Vector g = draw();
    for (std::size_t i = 0; i < d; ++i) sum[i] += g[i], sum2[i] += g[i] * g[i];
  }
  bool ok = true;
  const double n = static_cast<double>(draws);
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = sum[i] / n;
    const double se = std::sqrt(std::max(0.0, sum2[i] / n - mean * mean) / n);
    const double z = se > 0 ? std::abs(mean - target[i]) / se : (mean == target[i] ? 0.0 : INFINITY);
    worst = std::max(worst, z);
    ok = ok && z <= kStdErrs;
  }
  return ok;
}

void criterion1(Report& rep) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = std::make_shared<const Dataset>(make_gaussian_dataset(200, 10, 1));
  const auto obj = LogisticObjective::with_default_l2(data);
  Rng rng(derive_seed(1, hash_tag("acceptance-points")));
  Vector x(10), w0(10);
  for (auto* v : {&x, &w0})
    for (double& e : *v) e = 2.0 * uniform01(rng) - 1.0;
  const Vector full = obj.full_grad(x);

  double worst_lsvrg = 0.0, worst_saga = 0.0;
  WorkerState lw(0, false, derive_seed(1, 0));
  init_lsvrg(lw, w0);
  const bool ok_lsvrg = within_stderrs(10, 100000, full, [&] { return lsvrg_estimator(lw, obj, x, 1); }, worst_lsvrg);

  WorkerState table(0, false, derive_seed(1, 1));
  init_saga(table, obj, w0);
  Rng pick(derive_seed(1, 2));
  const bool ok_saga = within_stderrs(10, 100000, full, [&] {
    WorkerState probe = table;
    const std::vector<std::size_t> batch{uniform_index(pick, obj.size())};
    return saga_estimator(probe, obj, x, batch);
  }, worst_saga);

  rep.line(1, ok_lsvrg && ok_saga,
           "estimator unbiasedness: worst |z| LSVRG " + fmt(worst_lsvrg) + ", SAGA " + fmt(worst_saga) + " (bound " +
               fmt(kStdErrs) + ")",
           since(t0));
}

void criterion2(Report& rep, const Problem& pb) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& obj = *pb.obj;
  const std::size_t K = 20000, seeds = 10;
  RunConfig c;
  c.b = 10;
  c.n = 16;
  c.aggregator = AggregatorSpec::parse("mean");
  c.attack = AttackSpec::parse("none");
  c.K = K;
  c.eval_every = 1000;
  const double p = c.resolved_p(obj.size());
  c.gamma = theoretical_stepsize(obj.L(), obj.mu(), p, LyapunovVariant::Thm1);

  std::vector<double> mean_psi;
  const Vector x0(obj.dim(), 0.0);
  for (std::size_t s = 1; s <= seeds; ++s) {
    c.master_seed = s;
    const RunTrace t = run(c, obj, x0, &pb.ref);
    if (mean_psi.empty()) mean_psi.assign(t.points.size(), 0.0);
    for (std::size_t i = 0; i < t.points.size(); ++i) mean_psi[i] += t.points[i].psi_k / seeds;
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < mean_psi.size(); ++i) decreasing = decreasing && mean_psi[i] <= mean_psi[i - 1];
  const double measured = std::log(mean_psi.back() / mean_psi.front()) / static_cast<double>(K);
  const double theory = std::log(1.0 - c.gamma * obj.mu() / 2.0);
  const double allowed = (1.0 - kRateSlack) * theory;
  rep.line(2, decreasing && measured <= allowed,
           "delta = 0 rate: log(Psi_K/Psi_0)/K = " + fmt(measured) + " vs allowed " + fmt(allowed) +
               " (theory " + fmt(theory) + "), monotone " + (decreasing ? "yes" : "no"),
           since(t0));
}

void criterion3(Report& rep) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t honest = 13, byz = 3, dim = 10, seeds = 200;
  const double delta = 3.0 / 16.0;
  std::vector<std::size_t> honest_idx(honest);
  for (std::size_t i = 0; i < honest; ++i) honest_idx[i] = i;

  auto mean_c = [&](AggregatorSpec spec) {
    if (spec.base == BaseRule::Krum) spec.krum_byzantine_count = byz;
    double sum = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
      Rng rng(derive_seed(2024, hash_tag("audit"), s));
      std::normal_distribution<double> normal;
      std::vector<Vector> all(honest + byz, Vector(dim));
      for (std::size_t i = 0; i < honest; ++i)
        for (double& v : all[i]) v = normal(rng);
      for (std::size_t i = honest; i < all.size(); ++i) std::fill(all[i].begin(), all[i].end(), 1e6);
      const auto a = audit_robustness(spec, all, honest_idx, delta, derive_seed(2024, hash_tag("bucket"), s));
      sum += a.implied_c.value_or(INFINITY);
    }
    return sum / static_cast<double>(seeds);
  };
  const double gm = mean_c(AggregatorSpec::parse("gm+bucket:2"));
  const double krum = mean_c(AggregatorSpec::parse("krum+bucket:1"));
  const double mean = mean_c(AggregatorSpec::parse("mean"));
  rep.line(3, gm <= kAuditBound && krum <= kAuditBound && mean > kMeanControl,
           "robust aggregation audit: GM+bucket " + fmt(gm) + ", Krum+bucket " + fmt(krum) + " (bound " +
               fmt(kAuditBound) + "), Mean " + fmt(mean) + " (must exceed " + fmt(kMeanControl) + ")",
           since(t0));
}

std::string trace_csv(const RunTrace& t) {
  std::ostringstream out;
  write_trace_csv(t, out);
  return out.str();
}

const std::vector<std::string> kAttacks{"bf", "lf", "alie", "ipm"};

void criterion4_and_8(Report& rep, const Problem& pb) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& obj = *pb.obj;
  const Vector x0(obj.dim(), 0.0);
  bool ok = true;
  std::string detail = "median final subopt:";
  std::string first_csv;
  for (const auto& attack : kAttacks) {
    std::vector<double> finals;
    for (std::uint64_t s = 1; s <= 5; ++s) {
      RunConfig c = experiment_config(obj, attack, 1.0 / (12.0 * obj.L()));
      c.master_seed = s;
      const RunTrace t = run(c, obj, x0, &pb.ref);
      finals.push_back(t.status == RunStatus::Completed ? t.points.back().subopt : INFINITY);
      if (attack == "alie" && s == 1) first_csv = trace_csv(t);
    }
    const double med = median(finals);
    ok = ok && med <= kSuboptTarget;
    detail += " " + attack + " " + fmt(med);
  }
  rep.line(4, ok, detail + " (target " + fmt(kSuboptTarget) + ")", since(t0));

  const auto t1 = std::chrono::steady_clock::now();
  RunConfig c = experiment_config(obj, "alie", 1.0 / (12.0 * obj.L()));
  c.master_seed = 1;
  const bool same = trace_csv(run(c, obj, x0, &pb.ref)) == first_csv;
  rep.line(8, same, std::string("determinism: repeated ALIE seed-1 run ") + (same ? "is" : "is not") +
                        " byte-identical in trace.csv",
           since(t1));
}

void criterion5(Report& rep, const Problem& pb) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& obj = *pb.obj;
  const Vector x0(obj.dim(), 0.0);
  // Both methods can reach the rounding floor of f(x) - f*; below it the
  // difference is noise, so medians are compared after clamping to it.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(pb.ref.f_star));
  bool ok = true;
  std::string detail = "median final subopt BR-LSVRG vs Byrd-SAGA (floor " + fmt(floor) + "):";
  for (const auto& attack : kAttacks) {
    double med[2];
    for (int mi = 0; mi < 2; ++mi) {
      std::vector<double> finals;
      for (std::uint64_t s = 1; s <= 5; ++s) {
        RunConfig c = experiment_config(obj, attack, 5.0 / (2.0 * obj.L()));
        c.master_seed = s;
        if (mi == 1) {
          c.method = Method::ByrdSAGA;
          c.aggregator = AggregatorSpec::parse("gm");
        }
        const RunTrace t = run(c, obj, x0, &pb.ref);
        finals.push_back(t.status == RunStatus::Completed ? t.points.back().subopt : INFINITY);
      }
      med[mi] = median(finals);
    }
    ok = ok && std::max(med[0], floor) <= std::max(med[1], floor);
    detail += " " + attack + " " + fmt(med[0]) + "/" + fmt(med[1]);
  }
  rep.line(5, ok, detail, since(t0));
}

void criterion6(Report& rep, const Problem& pb) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& obj = *pb.obj;
  const Vector x0(obj.dim(), 0.0);
  RunConfig c = experiment_config(obj, "bf", 1.0 / (12.0 * obj.L()));
  c.aggregator = AggregatorSpec::parse("mean");
  c.K = 10000;
  c.master_seed = 1;
  const RunTrace t = run(c, obj, x0, &pb.ref);
  const double initial = t.points.front().subopt, final = t.points.back().subopt;
  const bool diverged = t.status == RunStatus::Diverged;
  const bool stalled = !diverged && final >= 0.5 * initial;
  rep.line(6, diverged || stalled,
           "BF vs Mean at 3/16: " + std::string(diverged ? "diverged" : "completed") + ", subopt " + fmt(initial) +
               " -> " + fmt(final) + " (needs divergence or >= half the initial value)",
           since(t0));
}

void criterion7(Report& rep) {
  const auto t0 = std::chrono::steady_clock::now();
  ComplexityInputs base{2.8, 0.0028, 1000, 16, 10, 1.0, 0.0, 1e-6};
  const double got = complexity_bounds(BoundMethod::BRLSVRG, base).iterations_bound;
  const double expect = (2.8 / 0.0028 + 1000.0 / 10.0) * std::log(1e6);
  bool ok = got == expect;

  Rng rng(derive_seed(7, hash_tag("bounds-grid")));
  std::size_t tuples = 0, violations = 0;
  while (tuples < 100) {
    ComplexityInputs in{0.1 + 100 * uniform01(rng), 1e-4 + uniform01(rng), 10 + 1e6 * uniform01(rng),
                        1 + 99 * uniform01(rng), 1 + 200 * uniform01(rng), 0.1 + 10 * uniform01(rng),
                        0.499 * uniform01(rng), 1e-12 + 0.99 * uniform01(rng)};
    if (!(in.m > in.b * std::sqrt(in.n))) continue;
    ++tuples;
    if (complexity_bounds(BoundMethod::BRLSVRG, in).iterations_bound >
        complexity_bounds(BoundMethod::ByzVRMARINA, in).iterations_bound)
      ++violations;
  }
  ok = ok && violations == 0;
  rep.line(7, ok,
           "complexity: delta = 0 value " + std::string(got == expect ? "exact" : "mismatch") + ", " +
               std::to_string(violations) + "/100 grid tuples where BR-LSVRG exceeds Byz-VR-MARINA",
           since(t0));
}

void criterion9(Report& rep, const Problem& pb) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& obj = *pb.obj;
  RunConfig c;
  c.b = 10;
  c.n = 16;
  c.aggregator = AggregatorSpec::parse("mean");
  c.attack = AttackSpec::parse("none");
  c.K = 10000;
  c.eval_every = 10000;
  c.track_psi = false;
  c.master_seed = 3;
  c.gamma = 1.0 / (12.0 * obj.L());
  const RunTrace t = run(c, obj, Vector(obj.dim(), 0.0), &pb.ref);
  const double per_round = static_cast<double>(t.honest_calls) / (16.0 * static_cast<double>(c.K));
  const double expect = 2.0 * c.b + t.p * static_cast<double>(obj.size());
  const double rel = std::abs(per_round - expect) / expect;
  rep.line(9, rel <= kOracleTolerance,
           "oracle accounting: " + fmt(per_round) + " calls per worker-round vs 2b + pm = " + fmt(expect) +
               " (relative error " + fmt(rel) + ")",
           since(t0));
}

}  // namespace

int main() {
  Report rep;
  const auto t0 = std::chrono::steady_clock::now();
  const Problem pb = mushrooms_subset();
  std::printf("dataset: %s, m = %zu, d = %zu, L = %.6g, mu = %.6g, f* = %.12g (%.1fs)\n", pb.source.c_str(),
              pb.obj->size(), pb.obj->dim(), pb.obj->L(), pb.obj->mu(), pb.ref.f_star, since(t0));

  criterion1(rep);
  criterion2(rep, pb);
  criterion3(rep);
  criterion4_and_8(rep, pb);
  criterion5(rep, pb);
  criterion6(rep, pb);
  criterion7(rep);
  criterion9(rep, pb);
  std::printf("%d criterion(s) failed\n", rep.failures);
  return rep.failures == 0 ? 0 : 1;
}
