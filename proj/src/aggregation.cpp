#include "brvr/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "brvr/rng.hpp"

namespace brvr {

namespace {

constexpr double kAnchorClamp = 1e-12;

void check_inputs(std::span<const Vector> vectors) {
  if (vectors.empty()) throw std::invalid_argument("aggregation needs at least one vector");
  const std::size_t d = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != d) throw std::invalid_argument("aggregation inputs differ in dimension");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

std::string_view to_string(BaseRule rule) {
  switch (rule) {
    case BaseRule::Mean: return "mean";
    case BaseRule::GeometricMedian: return "gm";
    case BaseRule::CoordinateMedian: return "cm";
    case BaseRule::Krum: return "krum";
  }
  return "?";
}

std::string AggregatorSpec::to_string() const {
  std::string out(brvr::to_string(base));
  if (bucket_size) {
    out += "+bucket";
    if (*bucket_size > 0) out += ":" + std::to_string(*bucket_size);
  }
  return out;
}

AggregatorSpec AggregatorSpec::parse(std::string_view text) {
  AggregatorSpec spec;
  std::string_view head = text;
  std::string_view tail;
  if (auto plus = text.find('+'); plus != std::string_view::npos) {
    head = text.substr(0, plus);
    tail = text.substr(plus + 1);
  }
  if (head == "mean") spec.base = BaseRule::Mean;
  else if (head == "gm" || head == "geometric_median") spec.base = BaseRule::GeometricMedian;
  else if (head == "cm" || head == "coordinate_median") spec.base = BaseRule::CoordinateMedian;
  else if (head == "krum") spec.base = BaseRule::Krum;
  else throw std::invalid_argument("unknown aggregation rule '" + std::string(head) + "'");

  if (!tail.empty()) {
    if (!tail.starts_with("bucket")) throw std::invalid_argument("unknown aggregation modifier '" + std::string(tail) + "'");
    tail.remove_prefix(6);
    spec.bucket_size = 0;
    if (!tail.empty()) {
      if (tail.front() != ':') throw std::invalid_argument("expected bucket:<size>");
      const std::string num(tail.substr(1));
      std::size_t pos = 0;
      const unsigned long long s = std::stoull(num, &pos);
      if (pos != num.size() || s == 0) throw std::invalid_argument("bucket size must be a positive integer");
      spec.bucket_size = static_cast<std::size_t>(s);
    }
  }
  return spec;
}

std::size_t default_bucket_size(BaseRule rule, double delta) {
  if (!(delta > 0.0)) return 1;
  const double delta_max = rule == BaseRule::Krum ? 0.25 : 0.5;
  const double s = std::floor(delta_max / delta);
  return s < 1.0 ? 1 : static_cast<std::size_t>(s);
}

Vector mean(std::span<const Vector> vectors) {
  check_inputs(vectors);
  Vector out(vectors.front().size(), 0.0);
  for (const auto& v : vectors)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  const double inv = 1.0 / static_cast<double>(vectors.size());
  for (double& o : out) o *= inv;
  return out;
}

GeometricMedianResult geometric_median(std::span<const Vector> vectors, const WeiszfeldOptions& options,
                                       bool record_objective) {
  check_inputs(vectors);
  const std::size_t n = vectors.size(), d = vectors.front().size();
  GeometricMedianResult res;
  Vector x = mean(vectors);
  Vector next(d);
  std::vector<double> weight(n);

  Vector best = x;
  double best_obj = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    double obj = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dist = std::sqrt(squared_distance(x, vectors[i]));
      obj += dist;
      weight[i] = 1.0 / std::max(dist, kAnchorClamp);
      wsum += weight[i];
    }
    if (record_objective) res.objective_trace.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }

    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) next[k] += weight[i] * vectors[i][k];
    for (double& v : next) v /= wsum;

    const double step = std::sqrt(squared_distance(next, x));
    x.swap(next);
    res.iterations = it + 1;
    if (step <= options.tol) {
      res.converged = true;
      break;
    }
  }

  double final_obj = 0.0;
  for (const auto& v : vectors) final_obj += std::sqrt(squared_distance(x, v));
  if (record_objective) res.objective_trace.push_back(final_obj);
  res.point = final_obj <= best_obj ? std::move(x) : std::move(best);
  return res;
}

Vector coordinate_median(std::span<const Vector> vectors) {
  check_inputs(vectors);
  const std::size_t n = vectors.size(), d = vectors.front().size();
  Vector out(d);
  std::vector<double> column(n);
  const std::size_t mid = n / 2;
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = vectors[i][k];
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid), column.end());
    const double upper = column[mid];
    if (n % 2 == 1) {
      out[k] = upper;
    } else {
      const double lower = *std::max_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid));
      out[k] = 0.5 * (lower + upper);
    }
  }
  return out;
}

std::size_t krum_index(std::span<const Vector> vectors, std::size_t byzantine_count) {
  check_inputs(vectors);
  const std::size_t n = vectors.size();
  if (n < byzantine_count + 3)
    throw std::invalid_argument("krum needs n >= B + 3 (n = " + std::to_string(n) +
                                ", B = " + std::to_string(byzantine_count) + ")");
  const std::size_t neighbours = n - byzantine_count - 2;

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = dist[j * n + i] = squared_distance(vectors[i], vectors[j]);

  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> row;
  row.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(dist[i * n + j]);
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(neighbours), row.end());
    const double score = std::accumulate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(neighbours), 0.0);
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

Vector krum(std::span<const Vector> vectors, std::size_t byzantine_count) {
  return vectors[krum_index(vectors, byzantine_count)];
}

Vector aggregate_base(const AggregatorSpec& spec, std::span<const Vector> vectors) {
  switch (spec.base) {
    case BaseRule::Mean: return mean(vectors);
    case BaseRule::GeometricMedian: return geometric_median(vectors, spec.weiszfeld).point;
    case BaseRule::CoordinateMedian: return coordinate_median(vectors);
    case BaseRule::Krum: return krum(vectors, spec.krum_byzantine_count);
  }
  throw std::logic_error("unhandled aggregation rule");
}

Vector bucketing_aggregate(const AggregatorSpec& spec, std::span<const Vector> vectors, std::uint64_t round_seed) {
  check_inputs(vectors);
  if (!spec.bucket_size || *spec.bucket_size == 0) throw std::invalid_argument("bucketing requires a bucket size >= 1");
  const std::size_t n = vectors.size(), d = vectors.front().size();
  const std::size_t s = *spec.bucket_size;

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(round_seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);

  const std::size_t buckets = (n + s - 1) / s;
  std::vector<Vector> means(buckets, Vector(d, 0.0));
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t lo = b * s, hi = std::min(n, lo + s);
    for (std::size_t k = lo; k < hi; ++k)
      for (std::size_t i = 0; i < d; ++i) means[b][i] += vectors[perm[k]][i];
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (double& v : means[b]) v *= inv;
  }
  return aggregate_base(spec, means);
}

Vector aggregate(const AggregatorSpec& spec, std::span<const Vector> vectors, std::uint64_t round_seed) {
  if (spec.bucket_size) return bucketing_aggregate(spec, vectors, round_seed);
  return aggregate_base(spec, vectors);
}

RobustnessAudit audit_robustness(const AggregatorSpec& spec, std::span<const Vector> all,
                                 std::span<const std::size_t> honest_indices, double delta,
                                 std::uint64_t round_seed) {
  if (honest_indices.size() < 2) throw std::invalid_argument("audit needs at least two honest vectors");
  check_inputs(all);
  std::vector<Vector> honest;
  honest.reserve(honest_indices.size());
  for (std::size_t i : honest_indices) {
    if (i >= all.size()) throw std::invalid_argument("honest index out of range");
    honest.push_back(all[i]);
  }
  const double G = static_cast<double>(honest.size());

  RobustnessAudit audit;
  double pair_sum = 0.0;
  for (std::size_t i = 0; i < honest.size(); ++i)
    for (std::size_t l = i + 1; l < honest.size(); ++l) pair_sum += 2.0 * squared_distance(honest[i], honest[l]);
  audit.measured_sigma2 = pair_sum / (G * (G - 1.0));

  const Vector agg = aggregate(spec, all, round_seed);
  audit.measured_err2 = squared_distance(agg, mean(honest));
  if (delta > 0.0 && audit.measured_sigma2 > 0.0) audit.implied_c = audit.measured_err2 / (delta * audit.measured_sigma2);
  return audit;
}

}  // namespace brvr
