#ifndef BRVR_KERNELS_HPP
#define BRVR_KERNELS_HPP

// Data-parallel inner loops over dataset rows. The default implementations
// are OpenMP-parallel; each reduction splits rows into fixed-size blocks and
// combines the per-block partial results in block order, so the output is
// bit-identical for any thread count. The `serial` namespace holds the
// straightforward reference loops the tests compare against.

#include <cstddef>
#include <span>

#include "brvr/data_io.hpp"

namespace brvr::kernels {

/// Rows per reduction block.
inline constexpr std::size_t kBlockRows = 256;

/// Numerically stable ln(1 + exp(t)).
double log1p_exp(double t);
/// 1 / (1 + exp(-t)) without overflow.
double sigmoid(double t);

/// out = A^T (A v)
void gram_matvec(const Dataset& ds, std::span<const double> v, std::span<double> out);

/// (1/m) sum_j ln(1 + exp(-y_j <a_j, x>)), regulariser excluded.
double mean_logistic_loss(const Dataset& ds, std::span<const double> x);

/// out = (1/m) sum_j grad of the logistic term, regulariser excluded.
void mean_logistic_grad(const Dataset& ds, std::span<const double> x, std::span<double> out);

/// (1/m) sum_j || grad f_j(u) - grad f_j(v) ||^2 for the l2-regularised
/// logistic components.
double mean_squared_grad_gap(const Dataset& ds, double l2, std::span<const double> u,
                             std::span<const double> v);

namespace serial {

void gram_matvec(const Dataset& ds, std::span<const double> v, std::span<double> out);
double mean_logistic_loss(const Dataset& ds, std::span<const double> x);
void mean_logistic_grad(const Dataset& ds, std::span<const double> x, std::span<double> out);
double mean_squared_grad_gap(const Dataset& ds, double l2, std::span<const double> u,
                             std::span<const double> v);

}  // namespace serial
}  // namespace brvr::kernels

#endif  // BRVR_KERNELS_HPP
