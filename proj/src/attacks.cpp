#include "brvr/attacks.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "brvr/aggregation.hpp"

namespace brvr {

namespace {

std::string format_param(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

double parse_param(std::string_view text, std::string_view what) {
  const std::string s(text);
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || !(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be a positive number");
  return v;
}

}  // namespace

std::string AttackSpec::to_string() const {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::BitFlip: return "bf";
    case AttackKind::LabelFlip: return "lf";
    case AttackKind::Alie: return "alie:" + format_param(z);
    case AttackKind::Ipm: return "ipm:" + format_param(eps);
  }
  return "?";
}

AttackSpec AttackSpec::parse(std::string_view text) {
  AttackSpec spec;
  std::string_view head = text, arg;
  if (auto colon = text.find(':'); colon != std::string_view::npos) {
    head = text.substr(0, colon);
    arg = text.substr(colon + 1);
  }
  if (head == "none") spec.kind = AttackKind::None;
  else if (head == "bf" || head == "bit_flip") spec.kind = AttackKind::BitFlip;
  else if (head == "lf" || head == "label_flip") spec.kind = AttackKind::LabelFlip;
  else if (head == "alie") spec.kind = AttackKind::Alie;
  else if (head == "ipm") spec.kind = AttackKind::Ipm;
  else throw std::invalid_argument("unknown attack '" + std::string(head) + "'");

  if (!arg.empty()) {
    if (spec.kind == AttackKind::Alie) spec.z = parse_param(arg, "ALIE z");
    else if (spec.kind == AttackKind::Ipm) spec.eps = parse_param(arg, "IPM eps");
    else throw std::invalid_argument("attack '" + std::string(head) + "' takes no parameter");
  }
  return spec;
}

bool AttackSpec::uses_worker_state() const {
  return kind == AttackKind::None || kind == AttackKind::BitFlip || kind == AttackKind::LabelFlip;
}

Vector bit_flip(std::span<const double> honest_like_gradient) {
  Vector out(honest_like_gradient.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -honest_like_gradient[i];
  return out;
}

Vector label_flip(WorkerState& worker, const FiniteSum& flipped, std::span<const double> x,
                  std::span<const std::size_t> batch) {
  return lsvrg_estimator(worker, flipped, x, batch);
}

Vector alie(std::span<const Vector> honest_gradients, double z) {
  if (honest_gradients.empty()) throw std::invalid_argument("ALIE needs at least one honest gradient");
  const Vector mu = mean(honest_gradients);
  Vector var(mu.size(), 0.0);
  for (const auto& g : honest_gradients)
    for (std::size_t i = 0; i < mu.size(); ++i) var[i] += (g[i] - mu[i]) * (g[i] - mu[i]);
  const double inv = 1.0 / static_cast<double>(honest_gradients.size());
  Vector out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) out[i] = mu[i] - z * std::sqrt(var[i] * inv);
  return out;
}

Vector ipm(std::span<const Vector> honest_gradients, double eps) {
  if (honest_gradients.empty()) throw std::invalid_argument("IPM needs at least one honest gradient");
  Vector out = mean(honest_gradients);
  for (double& v : out) v *= -eps;
  return out;
}

}  // namespace brvr
