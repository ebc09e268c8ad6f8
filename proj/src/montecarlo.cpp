#include "amopt/montecarlo.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace amopt {

McEstimate european_mc(const LognormalStepper& stepper, const PayoffSpec& payoff, double tau,
                       const Vector& x, std::size_t paths, Rng& rng) {
  const double df = std::exp(-stepper.rate() * tau);
  RunningStats stats;
  StateVector state(stepper.dim());
  for (std::size_t p = 0; p < paths; ++p) {
    state = x;
    stepper.advance(state, tau, rng);
    stats.add(df * eval_payoff(payoff, state));
  }
  return {stats.mean(), stats.stderr_of_mean(), stats.stddev(), stats.count()};
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace amopt
