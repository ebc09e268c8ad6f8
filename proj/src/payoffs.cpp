#include "amopt/payoffs.hpp"

#include "amopt/surface.hpp"

#include <cmath>

namespace amopt {

void PayoffSpec::validate() const {
  if (!(strike > 0.0) || !std::isfinite(strike)) throw std::invalid_argument("strike must be positive");
  switch (kind) {
    case PayoffKind::Put:
    case PayoffKind::Call:
      if (dim != 1) throw std::invalid_argument("put/call payoffs are one-dimensional");
      break;
    case PayoffKind::Strangle:
      if (dim != 1) throw std::invalid_argument("strangle payoff is one-dimensional");
      if (!(strike_high > strike) || !std::isfinite(strike_high)) {
        throw std::invalid_argument("strangle needs 0 < K1 < K2");
      }
      break;
    case PayoffKind::ArithBasketPut:
    case PayoffKind::GeomBasketPut:
      if (dim != 2) throw std::invalid_argument("basket puts are two-dimensional");
      break;
  }
}

std::string to_string(PayoffKind kind) {
  switch (kind) {
    case PayoffKind::Put: return "put";
    case PayoffKind::Call: return "call";
    case PayoffKind::Strangle: return "strangle";
    case PayoffKind::ArithBasketPut: return "arith_basket_put";
    case PayoffKind::GeomBasketPut: return "geom_basket_put";
  }
  return "?";
}

double eval_payoff(const PayoffSpec& spec, double x) {
  Eigen::Matrix<double, 1, 1> v;
  v[0] = x;
  return eval_payoff(spec, v);
}

CashFlowSpec::CashFlowSpec(PayoffSpec p, MarketModel m, CashFlowRule r)
    : payoff(p), model(std::move(m)), rule(r) {
  payoff.validate();
  if (payoff.dim != model.dim) throw std::invalid_argument("payoff and model dimensions differ");
  if (payoff.kind == PayoffKind::GeomBasketPut && rule == CashFlowRule::Example) {
    if (!model.has_constant_vol()) {
      throw unsupported_error("geometric-basket cash flow needs a constant sigma_bar");
    }
    const Matrix& s = model.sigma_bar();
    geometric_correction_ =
        (s.row(0).squaredNorm() + s.row(1).squaredNorm() - 2.0 * s.row(0).dot(s.row(1))) / 8.0;
  }
}

double eval_cashflow(const CashFlowSpec& spec, double x) {
  Eigen::Matrix<double, 1, 1> v;
  v[0] = x;
  return eval_cashflow(spec, v);
}

PayoffDerivatives payoff_derivatives(const PayoffSpec& spec, const Vector& x, double kink_tol) {
  PayoffDerivatives out;
  const Index d = spec.dim;
  out.gradient = Vector::Zero(d);
  out.hessian = Matrix::Zero(d, d);
  const double k = spec.strike;
  auto near = [&](double a, double b) { return std::abs(a - b) <= kink_tol * std::max(1.0, std::abs(b)); };
  switch (spec.kind) {
    case PayoffKind::Put:
      out.smooth = !near(x[0], k);
      out.gradient[0] = x[0] < k ? -1.0 : 0.0;
      break;
    case PayoffKind::Call:
      out.smooth = !near(x[0], k);
      out.gradient[0] = x[0] > k ? 1.0 : 0.0;
      break;
    case PayoffKind::Strangle:
      out.smooth = !near(x[0], k) && !near(x[0], spec.strike_high);
      out.gradient[0] = x[0] < k ? -1.0 : (x[0] > spec.strike_high ? 1.0 : 0.0);
      break;
    case PayoffKind::ArithBasketPut: {
      const double m = 0.5 * (x[0] + x[1]);
      out.smooth = !near(m, k);
      if (m < k) out.gradient.setConstant(-0.5);
      break;
    }
    case PayoffKind::GeomBasketPut: {
      const double gm = std::sqrt(x[0] * x[1]);
      out.smooth = !near(gm, k);
      if (gm < k) {
        out.gradient << -0.5 * std::sqrt(x[1] / x[0]), -0.5 * std::sqrt(x[0] / x[1]);
        out.hessian << 0.25 * std::sqrt(x[1]) * std::pow(x[0], -1.5), -0.25 / gm,
            -0.25 / gm, 0.25 * std::sqrt(x[0]) * std::pow(x[1], -1.5);
      }
      break;
    }
  }
  return out;
}

double subsolution_residual(const CashFlowSpec& spec, const Vector& x, double kink_tol) {
  const PayoffDerivatives der = payoff_derivatives(spec.payoff, x, kink_tol);
  if (!der.smooth) throw std::domain_error("payoff is not twice differentiable at this point");
  const double r = spec.model.rate;
  const Matrix sb = spec.model.sigma_bar(0.0, x);
  const Matrix sigma = x.asDiagonal() * sb;
  const double lg = r * x.dot(der.gradient) + 0.5 * (sigma * sigma.transpose()).cwiseProduct(der.hessian).sum();
  return r * eval_payoff(spec.payoff, x) - lg - eval_cashflow(spec, x);
}

SubsolutionReport check_subsolution(const CashFlowSpec& spec, std::span<const Vector> points,
                                    const ValueSurface& surface, double exercise_tol,
                                    double kink_tol) {
  SubsolutionReport rep;
  rep.sampled = points.size();
  for (const Vector& x : points) {
    const double g = eval_payoff(spec.payoff, x);
    bool exercised = false;
    for (Index i = 0; i + 1 < surface.num_times() && !exercised; ++i) {
      const auto v = surface.interpolate(i, x);
      exercised = v && *v <= g + exercise_tol;
    }
    if (!exercised) continue;
    ++rep.in_exercise_region;
    if (!payoff_derivatives(spec.payoff, x, kink_tol).smooth) {
      ++rep.skipped_kinks;
      continue;
    }
    ++rep.checked;
    const double viol = std::max(subsolution_residual(spec, x, kink_tol), 0.0);
    if (viol > rep.max_violation || rep.worst_point.size() == 0) {
      rep.max_violation = std::max(rep.max_violation, viol);
      rep.worst_point = x;
    }
  }
  return rep;
}

}  // namespace amopt
