#include "brvr/engine.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "brvr/estimators.hpp"
#include "brvr/rng.hpp"

namespace brvr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::BRLSVRG ? "br-lsvrg" : "byrd-saga"; }

Method parse_method(std::string_view text) {
  if (text == "br-lsvrg" || text == "brlsvrg") return Method::BRLSVRG;
  if (text == "byrd-saga" || text == "byrd_saga" || text == "saga") return Method::ByrdSAGA;
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

double RunConfig::resolved_p(std::size_t m) const {
  return p ? *p : static_cast<double>(b) / static_cast<double>(m);
}

double RunConfig::byzantine_fraction() const {
  return n == 0 ? 0.0 : static_cast<double>(byzantine_ids.size()) / static_cast<double>(n);
}

std::vector<std::size_t> last_workers(std::size_t n, std::size_t count) {
  if (count > n) throw ConfigError("more Byzantine workers than workers");
  std::vector<std::size_t> ids;
  for (std::size_t i = n - count; i < n; ++i) ids.push_back(i);
  return ids;
}

AggregatorSpec resolve_aggregator(const RunConfig& config) {
  AggregatorSpec spec = config.aggregator;
  if (spec.bucket_size && *spec.bucket_size == 0)
    spec.bucket_size = default_bucket_size(spec.base, config.byzantine_fraction());
  if (spec.base == BaseRule::Krum) spec.krum_byzantine_count = config.byzantine_ids.size();
  return spec;
}

std::vector<std::string> validate(const RunConfig& config, std::size_t m) {
  std::vector<std::string> warnings;
  if (!(config.gamma > 0.0) || !std::isfinite(config.gamma)) throw ConfigError("stepsize must be positive");
  if (config.b < 1 || config.b > m)
    throw ConfigError("batchsize " + std::to_string(config.b) + " outside [1, " + std::to_string(m) + "]");
  const double p = config.resolved_p(m);
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("switch probability must lie in (0, 1]");
  if (config.n < 1) throw ConfigError("need at least one worker");
  if (config.eval_every < 1) throw ConfigError("eval_every must be at least 1");

  std::set<std::size_t> seen;
  for (std::size_t id : config.byzantine_ids) {
    if (id >= config.n) throw ConfigError("Byzantine id " + std::to_string(id) + " out of range");
    if (!seen.insert(id).second) throw ConfigError("duplicate Byzantine id " + std::to_string(id));
  }
  const std::size_t honest = config.n - config.byzantine_ids.size();
  if (honest == 0) throw ConfigError("no honest workers");
  if (2 * config.byzantine_ids.size() >= config.n)
    warnings.push_back("Byzantine fraction " + format_double(config.byzantine_fraction()) +
                       " is not below 1/2; robustness guarantees do not apply");

  const AggregatorSpec spec = resolve_aggregator(config);
  if (spec.base == BaseRule::Krum) {
    const std::size_t inputs =
        spec.bucket_size ? (config.n + *spec.bucket_size - 1) / *spec.bucket_size : config.n;
    if (inputs < spec.krum_byzantine_count + 3)
      throw ConfigError("krum needs at least B + 3 inputs (" + std::to_string(inputs) + " inputs, B = " +
                        std::to_string(spec.krum_byzantine_count) + ")");
  }
  return warnings;
}

double theoretical_stepsize(double L, double mu, double p, LyapunovVariant regime) {
  const double cap = regime == LyapunovVariant::Thm1 ? 1.0 / (12.0 * L) : 1.0 / (144.0 * L);
  return std::min(cap, p / mu);
}

RunTrace run(const RunConfig& config, const FiniteSum& obj, const FiniteSum* flipped, std::span<const double> x0,
             const ReferenceSolution* reference) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t m = obj.size(), d = obj.dim();
  if (x0.size() != d) throw ConfigError("x0 has the wrong dimension");

  RunTrace trace;
  trace.warnings = validate(config, m);
  trace.aggregator = resolve_aggregator(config);
  trace.p = config.resolved_p(m);
  const AttackKind attack = config.attack.kind;
  if (attack == AttackKind::LabelFlip && !flipped && !config.byzantine_ids.empty())
    throw ConfigError("label flipping needs the label-negated objective");

  const bool lsvrg = config.method == Method::BRLSVRG;
  std::vector<bool> byzantine(config.n, false);
  for (std::size_t id : config.byzantine_ids) byzantine[id] = true;

  // Workers whose estimator is computed each round: honest ones, plus
  // Byzantine ones whose attack starts from their own protocol state.
  std::vector<WorkerState> workers;
  workers.reserve(config.n);
  std::vector<std::size_t> active, honest_ids;
  for (std::size_t i = 0; i < config.n; ++i) {
    workers.emplace_back(i, byzantine[i], derive_seed(config.master_seed, i));
    if (!byzantine[i]) honest_ids.push_back(i);
    if (!byzantine[i] || config.attack.uses_worker_state()) active.push_back(i);
  }
  auto objective_for = [&](std::size_t i) -> const FiniteSum& {
    return byzantine[i] && attack == AttackKind::LabelFlip ? *flipped : obj;
  };
  for (std::size_t i : active) {
    if (lsvrg) init_lsvrg(workers[i], x0);
    else init_saga(workers[i], objective_for(i), x0);
  }

  Vector x(x0.begin(), x0.end());
  OracleCounter diagnostic;

  auto honest_calls = [&] {
    std::uint64_t total = 0;
    for (std::size_t i : honest_ids) total += workers[i].counter.component_calls;
    return total;
  };

  auto record = [&](std::size_t k) {
    TracePoint pt;
    pt.k = k;
    pt.loss = obj.loss(x);
    pt.subopt = pt.dist2 = pt.sigma_k2 = pt.psi_k = kNaN;
    if (reference) {
      pt.subopt = pt.loss - reference->f_star;
      double dist2 = 0.0;
      for (std::size_t i = 0; i < d; ++i) dist2 += (x[i] - reference->x_star[i]) * (x[i] - reference->x_star[i]);
      pt.dist2 = dist2;
      if (lsvrg && config.track_psi) {
        std::vector<Vector> refs;
        refs.reserve(honest_ids.size());
        for (std::size_t i : honest_ids) refs.push_back(workers[i].w);
        const LyapunovValue lv = lyapunov(obj, x, refs, config.gamma, trace.p, reference->x_star,
                                          config.psi_variant, &diagnostic);
        pt.sigma_k2 = lv.sigma_k2;
        pt.psi_k = lv.psi;
      }
    }
    pt.oracle_calls = honest_calls();
    if (config.record_time)
      pt.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.points.push_back(pt);
  };

  record(0);

  std::vector<Vector> messages(config.n);
  std::vector<Vector> honest_messages(honest_ids.size());
  const long long active_count = static_cast<long long>(active.size());

  for (std::size_t k = 0; k < config.K; ++k) {
#pragma omp parallel for schedule(static)
    for (long long a = 0; a < active_count; ++a) {
      const std::size_t i = active[static_cast<std::size_t>(a)];
      WorkerState& wk = workers[i];
      const FiniteSum& f = objective_for(i);
      if (lsvrg) {
        messages[i] = lsvrg_estimator(wk, f, x, config.b);
        maybe_switch_reference(wk, x, trace.p);
      } else {
        messages[i] = saga_estimator(wk, f, x, config.b);
      }
      if (byzantine[i] && attack == AttackKind::BitFlip) messages[i] = bit_flip(messages[i]);
    }

    if (attack == AttackKind::Alie || attack == AttackKind::Ipm) {
      if (!config.byzantine_ids.empty()) {
        for (std::size_t h = 0; h < honest_ids.size(); ++h) honest_messages[h] = messages[honest_ids[h]];
        const Vector evil = attack == AttackKind::Alie ? alie(honest_messages, config.attack.z)
                                                       : ipm(honest_messages, config.attack.eps);
        for (std::size_t id : config.byzantine_ids) messages[id] = evil;
      }
    }

    if (config.observer) config.observer(k, messages);
    const Vector step =
        aggregate(trace.aggregator, messages, derive_seed(config.master_seed, hash_tag("bucket"), k));
    for (std::size_t i = 0; i < d; ++i) x[i] -= config.gamma * step[i];
    trace.rounds_completed = k + 1;

    if (!all_finite(x)) {
      trace.status = RunStatus::Diverged;
      trace.message = "non-finite iterate after round " + std::to_string(k + 1);
      break;
    }
    if ((k + 1) % config.eval_every == 0 || k + 1 == config.K) record(k + 1);
  }

  trace.final_x = x;
  trace.honest_calls = honest_calls();
  for (std::size_t id : config.byzantine_ids) trace.byzantine_calls += workers[id].counter.component_calls;
  trace.diagnostic_calls = diagnostic.component_calls;
  trace.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

RunTrace run(const RunConfig& config, const LogisticObjective& obj, std::span<const double> x0,
             const ReferenceSolution* reference) {
  if (config.attack.kind == AttackKind::LabelFlip && !config.byzantine_ids.empty()) {
    const LogisticObjective flipped = obj.with_negated_labels();
    return run(config, obj, &flipped, x0, reference);
  }
  return run(config, obj, nullptr, x0, reference);
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  out << "k,subopt,dist2,sigma_k2,psi_k,oracle_calls,elapsed_s\n";
  for (const auto& pt : trace.points) {
    out << pt.k << ',' << format_double(pt.subopt) << ',' << format_double(pt.dist2) << ','
        << format_double(pt.sigma_k2) << ',' << format_double(pt.psi_k) << ',' << pt.oracle_calls << ','
        << format_double(pt.elapsed_s) << '\n';
  }
}

}  // namespace brvr
