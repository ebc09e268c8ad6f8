#pragma once

#include "amopt/market.hpp"
#include "amopt/payoffs.hpp"
#include "amopt/rng.hpp"

#include <cmath>
#include <cstddef>
#include <functional>

namespace amopt {

/// Welford accumulator.
class RunningStats {
 public:
  void add(double v) {
    ++n_;
    const double delta = v - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (v - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance (0 for fewer than two samples).
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double stderr_of_mean() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double stddev = 0.0;
  std::size_t samples = 0;
};

/// e^{-r tau} E[g(X_tau)] by exact sampling, one Gaussian step per path.
McEstimate european_mc(const LognormalStepper& stepper, const PayoffSpec& payoff, double tau,
                       const Vector& x, std::size_t paths, Rng& rng);

/// Runs fn(0..n-1) over hardware threads. Results must not depend on
/// scheduling: every index owns its RNG stream. The first exception thrown
/// by any index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace amopt
