#ifndef BRVR_ATTACKS_HPP
#define BRVR_ATTACKS_HPP

#include <span>
#include <string>
#include <string_view>

#include "brvr/estimators.hpp"
#include "brvr/objective.hpp"

namespace brvr {

enum class AttackKind { None, BitFlip, LabelFlip, Alie, Ipm };

struct AttackSpec {
  AttackKind kind = AttackKind::None;
  double z = 1.06;    ///< ALIE strength
  double eps = 0.1;   ///< IPM scale

  /// "none", "bf", "lf", "alie", "alie:1.5", "ipm", "ipm:0.2"
  std::string to_string() const;
  static AttackSpec parse(std::string_view text);

  /// BF and LF (and None) run the honest protocol on their own state.
  bool uses_worker_state() const;
};

/// Sends the negation of the worker's own protocol-following vector.
Vector bit_flip(std::span<const double> honest_like_gradient);

/// The protocol estimator evaluated on the label-negated objective, with the
/// worker's reference gradient also taken on that objective. `flipped` must
/// be the label-negated counterpart of the honest objective.
Vector label_flip(WorkerState& worker, const FiniteSum& flipped, std::span<const double> x,
                  std::span<const std::size_t> batch);

/// mu - z * sigma per coordinate, with the population standard deviation of
/// the honest vectors.
Vector alie(std::span<const Vector> honest_gradients, double z);

/// -eps times the honest mean.
Vector ipm(std::span<const Vector> honest_gradients, double eps);

}  // namespace brvr

#endif  // BRVR_ATTACKS_HPP
