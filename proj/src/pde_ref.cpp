#include "amopt/pde_ref.hpp"

#include <cmath>
#include <vector>

namespace amopt {

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double scalar_sigma(const MarketModel& model) {
  if (model.dim != 1) throw std::invalid_argument("the FD and closed-form references are one-dimensional");
  return std::abs(model.sigma_bar()(0, 0));
}

struct Tridiagonal {
  std::vector<double> lower, diag, upper;
};

// Backward Euler matrix I - dt * (L - r). Convection falls back to a forward
// difference where central differencing would lose the M-matrix property.
Tridiagonal step_matrix(const MarketModel& model, const Vector& xs, double dt) {
  const double sigma = scalar_sigma(model);
  const double r = model.rate;
  const Index n = xs.size();
  const double dx = xs[1] - xs[0];
  Tridiagonal m{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)};
  for (Index j = 1; j + 1 < n; ++j) {
    const double x = xs[j];
    const double diff = 0.5 * sigma * sigma * x * x / (dx * dx);
    const double conv = r * x / dx;
    double lo, mid, up;
    if (diff >= 0.5 * std::abs(conv)) {
      lo = diff - 0.5 * conv;
      up = diff + 0.5 * conv;
      mid = -2.0 * diff - r;
    } else if (conv >= 0.0) {
      lo = diff;
      up = diff + conv;
      mid = -2.0 * diff - conv - r;
    } else {
      lo = diff - conv;
      up = diff;
      mid = -2.0 * diff + conv - r;
    }
    m.lower[j] = -dt * lo;
    m.diag[j] = 1.0 - dt * mid;
    m.upper[j] = -dt * up;
  }
  return m;
}

// Thomas algorithm; the step matrices are strictly diagonally dominant.
void solve_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag,
                       const std::vector<double>& upper, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  std::vector<double> c(n);
  double denom = diag[0];
  c[0] = upper[0] / denom;
  rhs[0] /= denom;
  for (std::size_t j = 1; j < n; ++j) {
    denom = diag[j] - lower[j] * c[j - 1];
    c[j] = upper[j] / denom;
    rhs[j] = (rhs[j] - lower[j] * rhs[j - 1]) / denom;
  }
  for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= c[j] * rhs[j + 1];
}

enum class Exercise { European, American };

ValueSurface solve_fd(const MarketModel& model, const PayoffSpec& payoff, double maturity,
                      const FDGrid& grid, Exercise style) {
  model.validate();
  payoff.validate();
  grid.validate();
  scalar_sigma(model);
  if (payoff.dim != 1) throw std::invalid_argument("FD reference supports one-dimensional payoffs only");
  if (!(maturity > 0.0)) throw std::invalid_argument("maturity must be positive");

  const Vector xs = uniform_axis(grid.x_min, grid.x_max, grid.n_space);
  const Vector ts = uniform_axis(0.0, maturity, grid.n_time + 1);
  const double dt = maturity / static_cast<double>(grid.n_time);
  const Index n = xs.size();

  ValueSurface surf(ts, {xs});
  std::vector<double> g(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) g[j] = eval_payoff(payoff, xs[j]);

  std::vector<double> v(g);
  for (Index j = 0; j < n; ++j) surf.values()(grid.n_time, j) = v[j];

  const Tridiagonal a = step_matrix(model, xs, dt);
  const bool american = style == Exercise::American;
  const bool penalized = american && grid.scheme == FdScheme::ImplicitPenalized;
  constexpr int kMaxActiveSetIters = 100;
  constexpr double kActiveTol = 1e-12;

  std::vector<double> rhs(static_cast<std::size_t>(n)), diag(a.diag);
  std::vector<char> active(static_cast<std::size_t>(n), 0), next_active(static_cast<std::size_t>(n), 0);

  for (Index i = grid.n_time - 1; i >= 0; --i) {
    const double tau = maturity - ts[i];
    double left = european_far_field_low(model, payoff, tau, xs[0]);
    double right = european_far_field_high(model, payoff, tau, xs[n - 1]);
    if (american) {
      left = std::max(left, g.front());
      right = std::max(right, g.back());
    }

    if (!penalized) {
      rhs = v;
      rhs.front() = left;
      rhs.back() = right;
      solve_tridiagonal(a.lower, a.diag, a.upper, rhs);
      v = rhs;
      if (american) {
        for (Index j = 0; j < n; ++j) v[j] = std::max(v[j], g[j]);
      }
    } else {
      // Policy iteration on min(A v - b, v - g) = 0, the infinite-penalty
      // limit: each interior row is either the PDE row or v_j = g_j.
      for (Index j = 1; j + 1 < n; ++j) active[j] = v[j] <= g[j];
      bool converged = false;
      std::vector<double> sol, lower(a.lower), upper(a.upper);
      double res = 0.0;
      for (int it = 0; it < kMaxActiveSetIters; ++it) {
        sol = v;
        sol.front() = left;
        sol.back() = right;
        for (Index j = 1; j + 1 < n; ++j) {
          diag[j] = active[j] ? 1.0 : a.diag[j];
          lower[j] = active[j] ? 0.0 : a.lower[j];
          upper[j] = active[j] ? 0.0 : a.upper[j];
          if (active[j]) sol[j] = g[j];
        }
        solve_tridiagonal(lower, diag, upper, sol);
        bool same = true;
        res = 0.0;
        for (Index j = 1; j + 1 < n; ++j) {
          const double pde = a.lower[j] * sol[j - 1] + a.diag[j] * sol[j] + a.upper[j] * sol[j + 1] - v[j];
          const double gap = sol[j] - g[j];
          res = std::max(res, std::abs(std::min(pde, gap)));
          if (std::abs(pde - gap) <= kActiveTol * std::max(1.0, std::abs(g[j]))) {
            next_active[j] = active[j];
          } else {
            next_active[j] = gap < pde;
          }
          same = same && next_active[j] == active[j];
        }
        if (same) {
          converged = true;
          break;
        }
        std::swap(active, next_active);
      }
      if (!converged) {
        throw fd_solver_error("obstacle policy iteration did not converge at t = " + std::to_string(ts[i]), res);
      }
      v = sol;
    }
    for (Index j = 0; j < n; ++j) surf.values()(i, j) = v[j];
  }
  return surf;
}

}  // namespace

std::string to_string(FdScheme s) {
  return s == FdScheme::ImplicitProjected ? "implicit-projected" : "implicit-penalized";
}

FdScheme fd_scheme_from_string(const std::string& s) {
  if (s == "implicit-projected") return FdScheme::ImplicitProjected;
  if (s == "implicit-penalized") return FdScheme::ImplicitPenalized;
  throw std::invalid_argument("unknown FD scheme '" + s + "'");
}

void FDGrid::validate() const {
  if (!(x_min > 0.0)) throw std::invalid_argument("FD grid needs x_min > 0");
  if (!(x_max > x_min)) throw std::invalid_argument("FD grid needs x_max > x_min");
  if (n_space < 3) throw std::invalid_argument("FD grid needs at least 3 space nodes");
  if (n_time < 2) throw std::invalid_argument("FD grid needs at least 2 time steps");
}

double bs_closed_form_put(const MarketModel& model, double k, double tau, double x) {
  const double sigma = scalar_sigma(model);
  const double r = model.rate;
  const double df = std::exp(-r * tau);
  if (tau <= 0.0 || sigma == 0.0) return std::max(k * df - x, 0.0);
  const double sq = sigma * std::sqrt(tau);
  const double d1 = (std::log(x / k) + (r + 0.5 * sigma * sigma) * tau) / sq;
  const double d2 = d1 - sq;
  return k * df * norm_cdf(-d2) - x * norm_cdf(-d1);
}

double bs_closed_form_call(const MarketModel& model, double k, double tau, double x) {
  // put-call parity
  return bs_closed_form_put(model, k, tau, x) + x - k * std::exp(-model.rate * tau);
}

double european_closed_form(const MarketModel& model, const PayoffSpec& payoff, double tau, double x) {
  switch (payoff.kind) {
    case PayoffKind::Put: return bs_closed_form_put(model, payoff.strike, tau, x);
    case PayoffKind::Call: return bs_closed_form_call(model, payoff.strike, tau, x);
    case PayoffKind::Strangle:
      return bs_closed_form_put(model, payoff.strike, tau, x) +
             bs_closed_form_call(model, payoff.strike_high, tau, x);
    default: throw unsupported_error("no closed form for " + to_string(payoff.kind));
  }
}

double european_far_field_low(const MarketModel& model, const PayoffSpec& payoff, double tau, double x) {
  const double df = std::exp(-model.rate * tau);
  switch (payoff.kind) {
    case PayoffKind::Put:
    case PayoffKind::Strangle: return payoff.strike * df - x;
    case PayoffKind::Call: return 0.0;
    default: throw unsupported_error("no far field for " + to_string(payoff.kind));
  }
}

double european_far_field_high(const MarketModel& model, const PayoffSpec& payoff, double tau, double x) {
  const double df = std::exp(-model.rate * tau);
  switch (payoff.kind) {
    case PayoffKind::Put: return 0.0;
    case PayoffKind::Call: return x - payoff.strike * df;
    case PayoffKind::Strangle: return x - payoff.strike_high * df;
    default: throw unsupported_error("no far field for " + to_string(payoff.kind));
  }
}

ValueSurface solve_american_fd(const MarketModel& model, const PayoffSpec& payoff, double maturity,
                               const FDGrid& grid) {
  return solve_fd(model, payoff, maturity, grid, Exercise::American);
}

ValueSurface solve_european_fd(const MarketModel& model, const PayoffSpec& payoff, double maturity,
                               const FDGrid& grid) {
  return solve_fd(model, payoff, maturity, grid, Exercise::European);
}

double obstacle_residual(const MarketModel& model, const PayoffSpec& payoff, const FDGrid& grid,
                         const ValueSurface& am) {
  const Vector& xs = am.xs();
  const Index n = xs.size();
  if (n != grid.n_space || am.num_times() != grid.n_time + 1) {
    throw std::invalid_argument("surface does not match the FD grid");
  }
  const double dt = am.times()[1] - am.times()[0];
  const Tridiagonal a = step_matrix(model, xs, dt);
  double worst = 0.0;
  for (Index i = 0; i < grid.n_time; ++i) {
    for (Index j = 1; j + 1 < n; ++j) {
      const double av = a.lower[j] * am.values()(i, j - 1) + a.diag[j] * am.values()(i, j) +
                        a.upper[j] * am.values()(i, j + 1);
      const double res = av - am.values()(i + 1, j);
      const double gap = am.values()(i, j) - eval_payoff(payoff, xs[j]);
      worst = std::max(worst, std::abs(std::min(res, gap)));
    }
  }
  return worst;
}

ValueSurface early_exercise_premium(const ValueSurface& american, const ValueSurface& european) {
  if (!american.same_grid(european)) throw std::invalid_argument("premium needs matching grids");
  ValueSurface out(american.times(), american.axes());
  out.values() = american.values() - european.values();
  return out;
}

}  // namespace amopt
