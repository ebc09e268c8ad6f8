#pragma once

#include "amopt/market.hpp"
#include "amopt/payoffs.hpp"
#include "amopt/surface.hpp"

#include <stdexcept>
#include <string>

namespace amopt {

enum class FdScheme {
  ImplicitProjected,  // backward Euler step, then v <- max(v, g)
  ImplicitPenalized,  // backward Euler with the obstacle enforced by penalty/active-set iteration
};

std::string to_string(FdScheme s);
FdScheme fd_scheme_from_string(const std::string& s);

/// Uniform space-time grid. n_space counts nodes including both boundaries;
/// n_time counts steps, so the surface has n_time + 1 slices.
struct FDGrid {
  double x_min = 1.0;
  double x_max = 100.0;
  Index n_space = 500;
  Index n_time = 1000;
  FdScheme scheme = FdScheme::ImplicitProjected;

  void validate() const;
};

class fd_solver_error : public std::runtime_error {
 public:
  fd_solver_error(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Black-Scholes European put and call, tau = time to maturity. The sigma = 0
/// and tau = 0 limits are the discounted intrinsic values.
double bs_closed_form_put(const MarketModel& model, double strike, double tau, double x);
double bs_closed_form_call(const MarketModel& model, double strike, double tau, double x);

/// Closed-form European value of the one-dimensional payoffs (put, call, strangle).
double european_closed_form(const MarketModel& model, const PayoffSpec& payoff, double tau, double x);

/// Boundary values used by the FD solver at x -> 0 and x -> infinity.
double european_far_field_low(const MarketModel& model, const PayoffSpec& payoff, double tau, double x);
double european_far_field_high(const MarketModel& model, const PayoffSpec& payoff, double tau, double x);

ValueSurface solve_american_fd(const MarketModel& model, const PayoffSpec& payoff, double maturity,
                               const FDGrid& grid);
ValueSurface solve_european_fd(const MarketModel& model, const PayoffSpec& payoff, double maturity,
                               const FDGrid& grid);

/// Largest |min(A v_i - v_{i+1}, v_i - g)| over all steps and interior nodes,
/// A the implicit step matrix of `grid`. Zero for an exact solution of the
/// discrete obstacle problem.
double obstacle_residual(const MarketModel& model, const PayoffSpec& payoff, const FDGrid& grid,
                         const ValueSurface& american);

/// American minus European on identical grids.
ValueSurface early_exercise_premium(const ValueSurface& american, const ValueSurface& european);

}  // namespace amopt
