#pragma once

#include "amopt/payoffs.hpp"
#include "amopt/rng.hpp"
#include "amopt/types.hpp"

#include <cmath>
#include <functional>
#include <optional>

namespace amopt {

/// q(x, y) = c(x) H(g(x) - y); the exercise side g(x) = y is included.
struct ExactDriver {
  CashFlowSpec cashflow;
  const PayoffSpec& payoff() const { return cashflow.payoff; }
};

template <typename Derived>
double q_exact(const ExactDriver& d, const Eigen::MatrixBase<Derived>& x, double y) {
  return eval_payoff(d.payoff(), x) >= y ? eval_cashflow(d.cashflow, x) : 0.0;
}

/// Gaussian-smoothed Heaviside: q(x, y) = c(x) erfc(kappa (y - g(x))) / 2.
struct ErfcDriver {
  ExactDriver base;
  double kappa = 10.0;
};

template <typename Derived>
double q_erfc(const ErfcDriver& d, const Eigen::MatrixBase<Derived>& x, double y) {
  if (!(d.kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  const double g = eval_payoff(d.base.payoff(), x);
  return 0.5 * eval_cashflow(d.base.cashflow, x) * std::erfc(d.kappa * (y - g));
}

/// Piecewise quadratic on uniform cells of [knots(0), knots(n)].
/// coeffs.row(j) = (value, slope, curvature) of cell j in the local
/// coordinate s = y - knots(j).
struct QuadraticSpline {
  Vector knots;
  Matrix coeffs;

  Index cells() const { return coeffs.rows(); }
  double lo() const { return knots[0]; }
  double hi() const { return knots[knots.size() - 1]; }
  Index cell_of(double y) const;

  /// Piece j evaluated at y without clamping.
  double piece(Index j, double y) const {
    const double s = y - knots[j];
    return coeffs(j, 0) + s * (coeffs(j, 1) + s * coeffs(j, 2));
  }
  double piece_derivative(Index j, double y) const {
    return coeffs(j, 1) + 2.0 * coeffs(j, 2) * (y - knots[j]);
  }

  /// Spline value with y clamped into the domain.
  double operator()(double y) const;
};

/// Quadratic interpolating spline: matches f at every knot, is C1 at the
/// interior knots and has zero slope at the right end. Built by a backward
/// sweep from the right end, one quadratic per cell.
QuadraticSpline fit_quadratic_spline(const std::function<double(double)>& f, double lo, double hi,
                                     Index cells);

/// Local polynomial driver
///   qbar(x, y, y') = sum_j sum_l a_{j,l}(x) y^l phi_j(y'),
/// realised as c(x) sum_j phi_j(u') p_j(y - g(x)) with u' = y' - g(x) and
/// p_j the cell polynomials of a unit-amplitude profile. Kernels phi_j are
/// cell indicators in u' (clamped into the knot range) softened by linear
/// ramps of width `blend` around interior knots; they form a partition of
/// unity, |phi_j| <= 1, and have Lipschitz constant 1 / blend.
///
/// Without a cash-flow spec the amplitude is 1 and the shift is 0, which is
/// how the constant and zero drivers used for validation are built.
struct LocalPolyDriver {
  Vector knots;
  Matrix coeffs;  // cells x (l0 + 1), local coordinate s = u - knots(j)
  double blend = 0.0;
  std::optional<CashFlowSpec> cashflow;

  static LocalPolyDriver constant(double value);
  static LocalPolyDriver zero() { return constant(0.0); }

  Index cells() const { return coeffs.rows(); }
  Index max_degree() const { return coeffs.cols() - 1; }
  bool is_zero() const { return (coeffs.array() == 0.0).all(); }
  /// Degrees l for which some cell has a non-zero coefficient.
  std::vector<Index> active_degrees() const;

  double amplitude(const Eigen::Ref<const Vector>& x) const;
  double shift(const Eigen::Ref<const Vector>& x) const;

  /// phi_j(u') for all cells; at most two entries are non-zero.
  void kernels(double u_prime, Eigen::Ref<Vector> phi) const;

  /// a_{j,l}(x): row j holds the monomial coefficients in y.
  Matrix monomial_coeffs(const Eigen::Ref<const Vector>& x) const;

  double evaluate(const Eigen::Ref<const Vector>& x, double y, double y_prime) const;

  /// sum_j a_{j,l}(x) phi_j(y'): the degree-l weight drawn at a branching event.
  double degree_weight(const Eigen::Ref<const Vector>& x, Index l, double y_prime) const;
};

/// Spline fit of the erfc profile u -> erfc(kappa u) / 2 on [0, u_max] with
/// `cells` cells, wrapped with the driver's cash flow and payoff shift.
LocalPolyDriver fit_local_poly_driver(const ErfcDriver& d, double u_max, Index cells,
                                      double blend_fraction = 0.5);

/// q~(x, y) = c(x) 1{g(x) + eps >= y}, eps exponential with mean eps_mean.
struct RandomizedDriver {
  ExactDriver base;
  double eps_mean = 1e-100;
};

template <typename Derived>
double q_randomized_sample(const RandomizedDriver& d, const Eigen::MatrixBase<Derived>& x, double y,
                           Rng& rng) {
  if (!(d.eps_mean > 0.0)) throw std::invalid_argument("eps_mean must be positive");
  const double eps = rng.exponential(d.eps_mean);
  return eval_payoff(d.base.payoff(), x) + eps >= y ? eval_cashflow(d.base.cashflow, x) : 0.0;
}

/// E[q~(x, y)] = c(x) min(1, exp(-(y - g(x)) / eps_mean)).
template <typename Derived>
double q_randomized_mean(const RandomizedDriver& d, const Eigen::MatrixBase<Derived>& x, double y) {
  if (!(d.eps_mean > 0.0)) throw std::invalid_argument("eps_mean must be positive");
  const double gap = y - eval_payoff(d.base.payoff(), x);
  const double prob = gap <= 0.0 ? 1.0 : std::exp(-gap / d.eps_mean);
  return eval_cashflow(d.base.cashflow, x) * prob;
}

}  // namespace amopt
