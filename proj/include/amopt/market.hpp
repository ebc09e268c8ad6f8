#pragma once

#include "amopt/rng.hpp"
#include "amopt/types.hpp"

#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace amopt {

/// Constant relative volatility: the diffusion is diag[x] * sigma_bar.
struct ConstVol {
  Matrix sigma_bar;
};

/// State-dependent relative volatility sigma_bar(t, x), d x d.
struct FnVol {
  std::function<Matrix(double, const Vector&)> sigma_bar;
};

/// Risk-neutral Black-Scholes type market: d assets, constant rate,
/// diffusion diag[x] * sigma_bar(t, x).
struct MarketModel {
  double rate = 0.0;
  Index dim = 1;
  std::variant<ConstVol, FnVol> vol;

  static MarketModel black_scholes(double rate, double sigma);
  static MarketModel constant(double rate, Matrix sigma_bar);
  static MarketModel local(double rate, Index dim, FnVol vol);

  bool has_constant_vol() const { return std::holds_alternative<ConstVol>(vol); }

  /// Only valid for ConstVol; throws unsupported_error otherwise.
  const Matrix& sigma_bar() const;

  Matrix sigma_bar(double t, const Vector& x) const;

  /// Throws std::invalid_argument on a malformed model.
  void validate() const;
};

/// States are stored column-wise: states.col(k) is the state at times[k].
struct PathSample {
  std::vector<double> times;
  Matrix states;
  std::uint64_t seed = 0;
};

/// Exact lognormal sampling of X^{t,x} at the given horizons (constant vol).
PathSample sample_exact(const MarketModel& model, double t, const Vector& x,
                        std::span<const double> horizons, Rng& rng);

/// Euler-Maruyama in log coordinates on the given time grid (first entry
/// must be t). Works for both volatility kinds.
PathSample sample_euler(const MarketModel& model, double t, const Vector& x,
                        std::span<const double> grid, Rng& rng);

/// Precomputed exact one-step transition for a constant-vol model; the
/// allocation-free kernel used inside the pricers' sample loops.
class LognormalStepper {
 public:
  explicit LognormalStepper(const MarketModel& model);

  Index dim() const { return dim_; }
  double rate() const { return rate_; }

  /// x <- X_{s+dt} given X_s = x. dt == 0 leaves x untouched.
  void advance(StateVector& x, double dt, Rng& rng) const;

  /// Scalar fast path for d == 1.
  double advance(double x, double dt, Rng& rng) const {
    if (dt <= 0.0) return x;
    return x * std::exp(drift_[0] * dt + sigma_[0] * std::sqrt(dt) * rng.normal());
  }

 private:
  Index dim_;
  double rate_;
  Vector drift_;   // r - |sigma_bar row i|^2 / 2
  Matrix sigma_bar_;
  Vector sigma_;   // row norms, used by the d == 1 path
};

}  // namespace amopt
