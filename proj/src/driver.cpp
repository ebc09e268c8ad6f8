#include "amopt/driver.hpp"

#include "amopt/surface.hpp"

#include <algorithm>
#include <stdexcept>

namespace amopt {

Index QuadraticSpline::cell_of(double y) const {
  const double h = (hi() - lo()) / static_cast<double>(cells());
  const auto j = static_cast<Index>(std::floor((y - lo()) / h));
  return std::clamp<Index>(j, 0, cells() - 1);
}

double QuadraticSpline::operator()(double y) const {
  const double yc = std::clamp(y, lo(), hi());
  return piece(cell_of(yc), yc);
}

QuadraticSpline fit_quadratic_spline(const std::function<double(double)>& f, double lo, double hi,
                                     Index cells) {
  if (cells < 1) throw std::invalid_argument("spline needs at least one cell");
  if (!(hi > lo)) throw std::invalid_argument("spline domain must be non-empty");
  QuadraticSpline s;
  s.knots = uniform_axis(lo, hi, cells + 1);
  s.coeffs.resize(cells, 3);
  const double h = (hi - lo) / static_cast<double>(cells);

  Vector fk(cells + 1);
  for (Index k = 0; k <= cells; ++k) fk[k] = f(s.knots[k]);
  if (!fk.allFinite()) throw std::domain_error("spline target is not finite on the knots");

  double right_slope = 0.0;
  for (Index j = cells - 1; j >= 0; --j) {
    const double df = fk[j + 1] - fk[j];
    const double curv = (right_slope * h - df) / (h * h);
    const double slope = 2.0 * df / h - right_slope;
    s.coeffs.row(j) << fk[j], slope, curv;
    right_slope = slope;
  }
  return s;
}

LocalPolyDriver LocalPolyDriver::constant(double value) {
  LocalPolyDriver d;
  d.knots = (Vector(2) << 0.0, 1.0).finished();
  d.coeffs = Matrix::Constant(1, 1, value);
  return d;
}

std::vector<Index> LocalPolyDriver::active_degrees() const {
  std::vector<Index> out;
  for (Index l = 0; l < coeffs.cols(); ++l) {
    if ((coeffs.col(l).array() != 0.0).any()) out.push_back(l);
  }
  return out;
}

double LocalPolyDriver::amplitude(const Eigen::Ref<const Vector>& x) const {
  return cashflow ? eval_cashflow(*cashflow, x) : 1.0;
}

double LocalPolyDriver::shift(const Eigen::Ref<const Vector>& x) const {
  return cashflow ? eval_payoff(cashflow->payoff, x) : 0.0;
}

void LocalPolyDriver::kernels(double u_prime, Eigen::Ref<Vector> phi) const {
  phi.setZero();
  const Index n = cells();
  const double lo = knots[0], hi = knots[knots.size() - 1];
  const double u = std::clamp(u_prime, lo, hi);
  const double h = (hi - lo) / static_cast<double>(n);
  Index j = std::clamp<Index>(static_cast<Index>(std::floor((u - lo) / h)), 0, n - 1);
  phi[j] = 1.0;
  if (blend <= 0.0 || n == 1) return;
  const double half = 0.5 * blend;
  if (j > 0 && u < knots[j] + half) {
    const double w = (knots[j] + half - u) / blend;
    phi[j - 1] = w;
    phi[j] = 1.0 - w;
  } else if (j + 1 < n && u > knots[j + 1] - half) {
    const double w = (u - (knots[j + 1] - half)) / blend;
    phi[j + 1] = w;
    phi[j] = 1.0 - w;
  }
}

Matrix LocalPolyDriver::monomial_coeffs(const Eigen::Ref<const Vector>& x) const {
  const double c = amplitude(x);
  const double g = shift(x);
  const Index n = cells(), deg = max_degree();
  Matrix a = Matrix::Zero(n, deg + 1);
  for (Index j = 0; j < n; ++j) {
    // c * sum_m b_m (y - m0)^m expanded in powers of y
    const double m0 = g + knots[j];
    for (Index m = 0; m <= deg; ++m) {
      double binom = 1.0;
      for (Index l = 0; l <= m; ++l) {
        if (l > 0) binom = binom * static_cast<double>(m - l + 1) / static_cast<double>(l);
        a(j, l) += c * coeffs(j, m) * binom * std::pow(-m0, static_cast<double>(m - l));
      }
    }
  }
  return a;
}

double LocalPolyDriver::evaluate(const Eigen::Ref<const Vector>& x, double y, double y_prime) const {
  Vector phi(cells());
  kernels(y_prime - shift(x), phi);
  const Matrix a = monomial_coeffs(x);
  double acc = 0.0;
  for (Index j = 0; j < cells(); ++j) {
    if (phi[j] == 0.0) continue;
    double poly = 0.0;
    for (Index l = max_degree(); l >= 0; --l) poly = poly * y + a(j, l);
    acc += phi[j] * poly;
  }
  return acc;
}

double LocalPolyDriver::degree_weight(const Eigen::Ref<const Vector>& x, Index l, double y_prime) const {
  if (l < 0 || l > max_degree()) return 0.0;
  const double g = shift(x);
  Vector phi(cells());
  kernels(y_prime - g, phi);
  const double c = amplitude(x);
  double acc = 0.0;
  for (Index j = 0; j < cells(); ++j) {
    if (phi[j] == 0.0) continue;
    const double m0 = g + knots[j];
    double a = 0.0, binom = 1.0;
    for (Index m = l; m <= max_degree(); ++m) {
      if (m > l) binom = binom * static_cast<double>(m) / static_cast<double>(m - l);
      a += coeffs(j, m) * binom * std::pow(-m0, static_cast<double>(m - l));
    }
    acc += phi[j] * c * a;
  }
  return acc;
}

LocalPolyDriver fit_local_poly_driver(const ErfcDriver& d, double u_max, Index cells,
                                      double blend_fraction) {
  const double kappa = d.kappa;
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  const QuadraticSpline profile =
      fit_quadratic_spline([kappa](double u) { return 0.5 * std::erfc(kappa * u); }, 0.0, u_max, cells);
  LocalPolyDriver out;
  out.knots = profile.knots;
  out.coeffs = profile.coeffs;
  out.blend = std::clamp(blend_fraction, 0.0, 1.0) * (u_max / static_cast<double>(cells));
  out.cashflow = d.base.cashflow;
  return out;
}

}  // namespace amopt
