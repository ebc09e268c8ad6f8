#pragma once

#include "amopt/driver.hpp"
#include "amopt/market.hpp"
#include "amopt/montecarlo.hpp"
#include "amopt/surface.hpp"

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amopt {

struct BranchingConfig {
  double maturity = 1.0;
  double tau_mean = 0.6;                // exponential particle lifetime (years)
  std::vector<double> offspring_probs;  // p_l, l = 0..l0; empty: uniform over 0..l0
  int picard_iters = 3;
  std::size_t paths = 1000;
  Vector time_grid;                 // coarse grid, strictly increasing, last entry = maturity
  std::vector<Vector> space_axes;   // iterate grid
  std::size_t particle_cap = 1'000'000;  // per node estimate

  /// p_l after defaulting; validated against the driver's active degrees.
  std::vector<double> resolved_probs(const LocalPolyDriver& driver) const;
  void validate(const LocalPolyDriver& driver) const;
};

/// Population or weight blow-up inside a node estimate.
class instability_error : public std::runtime_error {
 public:
  enum class Kind { ParticleCap, WeightOverflow };
  instability_error(Kind kind, int iteration, Index time_index, Index node, std::size_t particles);

  Kind kind() const { return kind_; }
  int iteration() const { return iteration_; }
  Index time_index() const { return time_index_; }
  Index node() const { return node_; }
  std::size_t particles() const { return particles_; }

 private:
  Kind kind_;
  int iteration_;
  Index time_index_;
  Index node_;
  std::size_t particles_;
};

/// One branching event, reported to an optional trace hook.
struct DeathEvent {
  double tau = 0.0;
  Index degree = 0;
  double factor = 0.0;  // e^{-r tau} sum_j a_{j,l} phi_j / (p_l rho(tau))
  double bound = 0.0;   // e^{-r tau} max_j |a_{j,l}| / (p_l rho(tau))
  int generation = 0;
  double family_log_weight = 0.0;  // log|product of factors| along the ancestry
  double family_log_bound = 0.0;   // sum of log(bound) along the ancestry
};

using DeathTrace = std::function<void(const DeathEvent&)>;

struct NodeEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::size_t particles = 0;
  std::size_t max_family = 0;  // largest particle count of a single sample
};

/// Branching estimator of the BSDE with local polynomial driver, for a given
/// Picard prior. Particles live an exponential time; a particle reaching
/// maturity contributes e^{-r(T-t)} g(X_T) / Fbar(T-t); one dying at t + tau
/// picks degree l with probability p_l, multiplies the family weight by
/// e^{-r tau} sum_j a_{j,l}(X) phi_j(y') / (p_l rho(tau)) with y' read from
/// the prior, and spawns l independent offspring at its death position.
/// A driver that is identically zero makes particles immortal, which turns
/// the estimator into plain discounted-payoff Monte Carlo.
class BranchingEstimator {
 public:
  BranchingEstimator(const MarketModel& model, const PayoffSpec& payoff, const LocalPolyDriver& driver,
                     const BranchingConfig& cfg);

  /// prior == nullptr means the initial prior y' = g.
  NodeEstimate estimate(double t, const Vector& x, const ValueSurface* prior, Rng& rng,
                        std::size_t paths, const DeathTrace& trace = {}) const;

 private:
  double sample(double t, const StateVector& x, const ValueSurface* prior, Rng& rng, std::size_t& count,
                int generation, double log_weight, double log_bound, const DeathTrace& trace) const;

  LognormalStepper stepper_;
  PayoffSpec payoff_;
  LocalPolyDriver driver_;
  double maturity_;
  double tau_mean_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
  std::size_t cap_;
  bool immortal_;
};

struct ParticleStats {
  std::size_t samples = 0;
  std::size_t particles = 0;
  std::size_t max_family = 0;
  double mean_per_sample() const {
    return samples ? static_cast<double>(particles) / static_cast<double>(samples) : 0.0;
  }
};

struct BranchingResult {
  ValueSurface surface;                // final Picard iterate, with stderrs
  std::vector<ValueSurface> iterates;  // one per Picard sweep, oldest first
  ParticleStats stats;
};

/// Seed of node (time_index, node) in Picard sweep `iteration` (1-based).
std::uint64_t branching_node_seed(std::uint64_t seed, int iteration, Index time_index, Index node);

/// Picard-iterated branching pricer. Throws instability_error on a capped
/// or overflowing node estimate.
BranchingResult price_branching(const MarketModel& model, const PayoffSpec& payoff,
                                const LocalPolyDriver& driver, const BranchingConfig& cfg,
                                std::uint64_t seed);

struct BranchingTrial {
  std::uint64_t seed = 0;
  std::optional<BranchingResult> result;
  std::optional<instability_error::Kind> failure;
  std::string failure_message;
  double seconds = 0.0;
};

/// Independent trials with seeds derive_seed(root_seed, trial).
std::vector<BranchingTrial> run_branching_trials(const MarketModel& model, const PayoffSpec& payoff,
                                                 const LocalPolyDriver& driver, const BranchingConfig& cfg,
                                                 std::uint64_t root_seed, std::size_t trials);

struct InstabilityMetrics {
  std::size_t trials = 0;
  std::size_t completed = 0;
  std::size_t capped = 0;
  std::size_t overflowed = 0;
  double capped_fraction = 0.0;  // trials that hit the cap or overflowed
  std::vector<Vector> nodes;     // valuation-time nodes
  Vector node_mean;              // across completed trials, t = first grid time
  Vector node_std;
  Vector node_mean_std_error;    // average within-trial standard error
  double mean_particles_per_sample = 0.0;
  std::size_t max_family = 0;
};

InstabilityMetrics instability_report(std::span<const BranchingTrial> runs);

}  // namespace amopt
