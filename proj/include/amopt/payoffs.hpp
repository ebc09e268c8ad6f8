#pragma once

#include "amopt/market.hpp"
#include "amopt/types.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amopt {

class ValueSurface;

enum class PayoffKind { Put, Call, Strangle, ArithBasketPut, GeomBasketPut };

struct PayoffSpec {
  PayoffKind kind = PayoffKind::Put;
  double strike = 0.0;       // K, or K1 for the strangle
  double strike_high = 0.0;  // K2 for the strangle
  Index dim = 1;

  static PayoffSpec put(double k) { return {PayoffKind::Put, k, 0.0, 1}; }
  static PayoffSpec call(double k) { return {PayoffKind::Call, k, 0.0, 1}; }
  static PayoffSpec strangle(double k1, double k2) { return {PayoffKind::Strangle, k1, k2, 1}; }
  static PayoffSpec arith_basket_put(double k) { return {PayoffKind::ArithBasketPut, k, 0.0, 2}; }
  static PayoffSpec geom_basket_put(double k) { return {PayoffKind::GeomBasketPut, k, 0.0, 2}; }

  void validate() const;
};

std::string to_string(PayoffKind kind);

/// Exercise value g(x).
template <typename Derived>
double eval_payoff(const PayoffSpec& spec, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != spec.dim) {
    throw std::invalid_argument("payoff of dimension " + std::to_string(spec.dim) +
                                " evaluated at a point of dimension " + std::to_string(x.size()));
  }
  const double k = spec.strike;
  switch (spec.kind) {
    case PayoffKind::Put: return std::max(k - x[0], 0.0);
    case PayoffKind::Call: return std::max(x[0] - k, 0.0);
    case PayoffKind::Strangle:
      return std::max(k - x[0], 0.0) + std::max(x[0] - spec.strike_high, 0.0);
    case PayoffKind::ArithBasketPut: return std::max(k - 0.5 * (x[0] + x[1]), 0.0);
    case PayoffKind::GeomBasketPut: return std::max(k - std::sqrt(x[0] * x[1]), 0.0);
  }
  return 0.0;
}

/// Scalar convenience for the one-dimensional payoffs.
double eval_payoff(const PayoffSpec& spec, double x);

enum class CashFlowRule {
  Example,  // the closed forms that make g a subsolution on its exercise region
  Zero,     // c == 0: reduces every scheme to the European price
};

/// Reaction amplitude c(x). For the strangle, c is bridged linearly between
/// r*K1 at K1 and -r*K2 at K2.
struct CashFlowSpec {
  PayoffSpec payoff;
  MarketModel model;
  CashFlowRule rule = CashFlowRule::Example;

  CashFlowSpec(PayoffSpec p, MarketModel m, CashFlowRule r = CashFlowRule::Example);

  /// Coefficient multiplying sqrt(x1 x2) in the geometric-basket cash flow,
  /// (|s1|^2 + |s2|^2 - 2<s1, s2>) / 8.
  double geometric_correction() const { return geometric_correction_; }

 private:
  double geometric_correction_ = 0.0;
};

template <typename Derived>
double eval_cashflow(const CashFlowSpec& spec, const Eigen::MatrixBase<Derived>& x) {
  const PayoffSpec& p = spec.payoff;
  if (x.size() != p.dim) throw std::invalid_argument("cash flow evaluated at wrong dimension");
  if (spec.rule == CashFlowRule::Zero) return 0.0;
  const double r = spec.model.rate;
  switch (p.kind) {
    case PayoffKind::Put:
    case PayoffKind::ArithBasketPut: return r * p.strike;
    case PayoffKind::Call: return 0.0;
    case PayoffKind::Strangle: {
      const double k1 = p.strike, k2 = p.strike_high;
      if (x[0] <= k1) return r * k1;
      if (x[0] >= k2) return -r * k2;
      const double w = (x[0] - k1) / (k2 - k1);
      return (1.0 - w) * r * k1 - w * r * k2;
    }
    case PayoffKind::GeomBasketPut:
      return std::max(r * p.strike - spec.geometric_correction() * std::sqrt(x[0] * x[1]), 0.0);
  }
  return 0.0;
}

double eval_cashflow(const CashFlowSpec& spec, double x);

/// Gradient and Hessian of g where it is twice differentiable. `smooth` is
/// false within `kink_tol` of a kink (including the boundary of {g > 0}).
struct PayoffDerivatives {
  bool smooth = false;
  Vector gradient;
  Matrix hessian;
};

PayoffDerivatives payoff_derivatives(const PayoffSpec& spec, const Vector& x, double kink_tol);

/// r g - L g - c at a smooth point, L the (time-independent part of the)
/// Dynkin operator of the model.
double subsolution_residual(const CashFlowSpec& spec, const Vector& x, double kink_tol = 1e-6);

struct SubsolutionReport {
  std::size_t sampled = 0;
  std::size_t in_exercise_region = 0;
  std::size_t skipped_kinks = 0;
  std::size_t checked = 0;
  double max_violation = 0.0;  // max over checked points of (r g - L g - c)^+
  Vector worst_point;
  bool passed(double tol) const { return max_violation <= tol; }
};

/// Spot check of the subsolution requirement on c: among the sampled points,
/// those where the surface sits on the payoff (V <= g + exercise_tol at some
/// time before maturity) and g is smooth are checked.
SubsolutionReport check_subsolution(const CashFlowSpec& spec, std::span<const Vector> points,
                                    const ValueSurface& surface, double exercise_tol = 1e-6,
                                    double kink_tol = 1e-6);

}  // namespace amopt
