#pragma once

#include "amopt/market.hpp"
#include "amopt/montecarlo.hpp"
#include "amopt/payoffs.hpp"
#include "amopt/surface.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace amopt {

struct RandSchemeConfig {
  double maturity = 1.0;
  Index fine_steps = 100;   // path grid pi
  Index update_every = 10;  // fine steps between value updates
  std::vector<Vector> space_axes;
  double tau_mean = 0.6;     // years
  double eps_mean = 1e-100;  // currency
  std::size_t paths = 10000;
  std::size_t trials = 50;

  void validate() const;
  double fine_dt() const { return maturity / static_cast<double>(fine_steps); }
  /// 0 = t_0 < ... < t_M = maturity, one every update_every fine steps.
  Vector coarse_times() const;
};

/// Per-node sample statistics of one backward step.
struct RandNodeStats {
  RunningStats american;
  RunningStats european;  // e^{-r(T-t)} g(X_T) on the same paths
  RunningStats premium;   // american - european, sample by sample
};

/// One coarse step of the randomized scheme. Each sample draws tau (mean
/// tau_mean) and, when tau < T - t, reads the current estimate v at
/// s = phi(t + tau), the first fine-grid time at or after t + tau:
///   tau >= T - t : e^{-r(T-t)} g(X_T) / Fbar(T - t)
///   otherwise    : e^{-r tau} / rho(tau) * c(X_s) * 1{g(X_s) + eps >= v(s, X_s)}
/// where the indicator is restricted to {g > 0}.
/// v is piecewise constant in time (taken from the first coarse slice at or
/// after s) and linear in space. Off the grid, d = 1 uses g below x_min and
/// the European closed form above x_max; d >= 2 clamps into the box.
class RandomizedScheme {
 public:
  RandomizedScheme(const MarketModel& model, const PayoffSpec& payoff, const CashFlowSpec& cashflow,
                   const RandSchemeConfig& cfg);

  RandNodeStats estimate_node(double t, const Vector& x, const ValueSurface& v, Rng& rng,
                              std::size_t paths) const;

  /// v(s, x) as seen by the scheme, including the far-field rule.
  double lookup(const ValueSurface& v, double s, const StateVector& x) const;

 private:
  double advance_time(double t, double tau) const;
  double far_field_high(double s, double x) const;

  MarketModel model_;
  LognormalStepper stepper_;
  PayoffSpec payoff_;
  CashFlowSpec cashflow_;
  RandSchemeConfig cfg_;
};

struct RandResult {
  ValueSurface american;  // with per-node standard errors
  ValueSurface european;
  ValueSurface premium;
};

/// Seed of node (time_index, node) in the trial seeded by `seed`.
std::uint64_t randomized_node_seed(std::uint64_t seed, Index time_index, Index node);

/// Backward scheme over the coarse times starting from v(T, .) = g.
RandResult price_randomized(const MarketModel& model, const PayoffSpec& payoff, const CashFlowSpec& cashflow,
                            const RandSchemeConfig& cfg, std::uint64_t seed);

/// Early-exercise premium at valuation time: American minus the European leg
/// of the same paths, with the standard error of the difference.
struct PremiumCurve {
  Vector mean;
  Vector std_error;
};
PremiumCurve early_exercise_premium_mc(const RandResult& result);

/// Statistics of `trials` independent runs at valuation time (t = 0).
struct TrialReport {
  std::vector<Vector> nodes;
  std::vector<std::uint64_t> seeds;
  Matrix american;  // trials x nodes
  Matrix european;
  Matrix premium;
  Vector mean, std;  // American across trials
  Vector european_mean, european_std;
  Vector premium_mean, premium_std;
  Vector mean_std_error;  // average within-trial standard error
  std::vector<double> seconds;

  std::optional<Vector> reference;  // reference price at the nodes
  std::optional<Vector> reference_premium;
  Vector rel_err;  // |mean - ref| / ref, empty without a reference
  Vector premium_rel_err;

  /// min(rel_err, cap), the 10% / 40% reporting convention.
  static Vector capped(const Vector& rel, double cap) { return rel.cwiseMin(cap); }
};

/// Reference values are read from the t = 0 slice of the given surfaces.
TrialReport price_curve_with_stats(const MarketModel& model, const PayoffSpec& payoff,
                                   const CashFlowSpec& cashflow, const RandSchemeConfig& cfg,
                                   std::uint64_t root_seed, const ValueSurface* reference = nullptr,
                                   const ValueSurface* reference_premium = nullptr);

}  // namespace amopt
