#include "amopt/branch_poly.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace amopt {

namespace {

std::string instability_message(instability_error::Kind kind, int iteration, Index time_index, Index node,
                                std::size_t particles) {
  const char* what = kind == instability_error::Kind::ParticleCap ? "particle cap exceeded"
                                                                  : "family weight overflow";
  return std::string(what) + " (Picard sweep " + std::to_string(iteration) + ", time index " +
         std::to_string(time_index) + ", node " + std::to_string(node) + ", " + std::to_string(particles) +
         " particles)";
}

// Carries the failure out of the recursion; rethrown with node coordinates.
struct Blowup {
  instability_error::Kind kind;
  std::size_t particles;
};

}  // namespace

instability_error::instability_error(Kind kind, int iteration, Index time_index, Index node,
                                     std::size_t particles)
    : std::runtime_error(instability_message(kind, iteration, time_index, node, particles)),
      kind_(kind),
      iteration_(iteration),
      time_index_(time_index),
      node_(node),
      particles_(particles) {}

std::vector<double> BranchingConfig::resolved_probs(const LocalPolyDriver& driver) const {
  const std::size_t degrees = static_cast<std::size_t>(driver.max_degree() + 1);
  if (offspring_probs.empty()) return std::vector<double>(degrees, 1.0 / static_cast<double>(degrees));
  return offspring_probs;
}

void BranchingConfig::validate(const LocalPolyDriver& driver) const {
  if (!(maturity > 0.0)) throw std::invalid_argument("maturity must be positive");
  if (!(tau_mean > 0.0)) throw std::invalid_argument("tau_mean must be positive");
  if (picard_iters < 1) throw std::invalid_argument("picard_iters must be >= 1");
  if (paths < 1) throw std::invalid_argument("paths must be >= 1");
  if (particle_cap < 1) throw std::invalid_argument("particle_cap must be >= 1");
  if (time_grid.size() < 2) throw std::invalid_argument("time grid needs at least two times");
  for (Index i = 1; i < time_grid.size(); ++i) {
    if (!(time_grid[i] > time_grid[i - 1])) throw std::invalid_argument("time grid must increase");
  }
  if (time_grid[0] < 0.0 || std::abs(time_grid[time_grid.size() - 1] - maturity) > 1e-12) {
    throw std::invalid_argument("time grid must lie in [0, T] and end at T");
  }
  if (space_axes.empty()) throw std::invalid_argument("space grid is empty");
  const auto probs = resolved_probs(driver);
  if (probs.size() != static_cast<std::size_t>(driver.max_degree() + 1)) {
    throw std::invalid_argument("offspring_probs must have one entry per degree 0..l0");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("offspring probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("offspring probabilities must sum to 1");
  for (Index l : driver.active_degrees()) {
    if (!(probs[static_cast<std::size_t>(l)] > 0.0)) {
      throw std::invalid_argument("p_l must be positive for every degree with a non-zero coefficient");
    }
  }
}

BranchingEstimator::BranchingEstimator(const MarketModel& model, const PayoffSpec& payoff,
                                       const LocalPolyDriver& driver, const BranchingConfig& cfg)
    : stepper_(model),
      payoff_(payoff),
      driver_(driver),
      maturity_(cfg.maturity),
      tau_mean_(cfg.tau_mean),
      probs_(cfg.resolved_probs(driver)),
      cap_(cfg.particle_cap),
      immortal_(driver.is_zero()) {
  cfg.validate(driver);
  cumulative_.resize(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), cumulative_.begin());
}

double BranchingEstimator::sample(double t, const StateVector& x0, const ValueSurface* prior, Rng& rng,
                                  std::size_t& count, int generation, double log_weight, double log_bound,
                                  const DeathTrace& trace) const {
  if (++count > cap_) throw Blowup{instability_error::Kind::ParticleCap, count};
  const double r = stepper_.rate();
  const double remaining = maturity_ - t;
  StateVector x = x0;
  if (immortal_) {
    stepper_.advance(x, remaining, rng);
    return std::exp(-r * remaining) * eval_payoff(payoff_, x);
  }
  const double tau = rng.exponential(tau_mean_);
  if (tau >= remaining) {
    stepper_.advance(x, remaining, rng);
    const double survival = std::exp(-remaining / tau_mean_);
    return std::exp(-r * remaining) * eval_payoff(payoff_, x) / survival;
  }
  stepper_.advance(x, tau, rng);
  const double s = t + tau;

  const double u = rng.uniform();
  Index degree = static_cast<Index>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
                                    cumulative_.begin());
  degree = std::min<Index>(degree, static_cast<Index>(probs_.size()) - 1);
  const double p = probs_[static_cast<std::size_t>(degree)];

  const Eigen::Ref<const Vector> xr(x);
  const double y_prime = prior ? prior->interpolate_clamped(prior->slice_at_or_after(s), x)
                               : eval_payoff(payoff_, x);
  const double density = std::exp(-tau / tau_mean_) / tau_mean_;
  const double scale = std::exp(-r * tau) / (p * density);
  const double factor = scale * driver_.degree_weight(xr, degree, y_prime);

  double family_log_weight = log_weight + std::log(std::abs(factor));
  double family_log_bound = log_bound;
  if (trace) {
    const Matrix a = driver_.monomial_coeffs(xr);
    const double bound = scale * a.col(degree).cwiseAbs().maxCoeff();
    family_log_bound += std::log(bound);
    trace(DeathEvent{tau, degree, factor, bound, generation, family_log_weight, family_log_bound});
  }
  if (factor == 0.0) return 0.0;

  double w = factor;
  for (Index c = 0; c < degree; ++c) {
    w *= sample(s, x, prior, rng, count, generation + 1, family_log_weight, family_log_bound, trace);
    if (w == 0.0) break;
  }
  if (!std::isfinite(w)) throw Blowup{instability_error::Kind::WeightOverflow, count};
  return w;
}

NodeEstimate BranchingEstimator::estimate(double t, const Vector& x, const ValueSurface* prior, Rng& rng,
                                          std::size_t paths, const DeathTrace& trace) const {
  if (x.size() != stepper_.dim() || !(x.array() > 0.0).all()) {
    throw std::domain_error("branching node must lie in (0, inf)^d");
  }
  RunningStats stats;
  NodeEstimate out;
  const StateVector x0 = x;
  try {
    for (std::size_t p = 0; p < paths; ++p) {
      std::size_t family = 0;
      const double v = sample(t, x0, prior, rng, family, 0, 0.0, 0.0, trace);
      out.particles += family;
      out.max_family = std::max(out.max_family, family);
      if (out.particles > cap_) throw Blowup{instability_error::Kind::ParticleCap, out.particles};
      if (!std::isfinite(v)) throw Blowup{instability_error::Kind::WeightOverflow, out.particles};
      stats.add(v);
    }
    if (!std::isfinite(stats.mean()) || !std::isfinite(stats.variance())) {
      throw Blowup{instability_error::Kind::WeightOverflow, out.particles};
    }
  } catch (const Blowup& b) {
    // node coordinates are unknown here; price_branching fills them in
    throw instability_error(b.kind, 0, -1, -1, b.particles);
  }
  out.mean = stats.mean();
  out.std_error = stats.stderr_of_mean();
  out.samples = stats.count();
  return out;
}

std::uint64_t branching_node_seed(std::uint64_t seed, int iteration, Index time_index, Index node) {
  return derive_seed(seed, static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(time_index),
                     static_cast<std::uint64_t>(node));
}

BranchingResult price_branching(const MarketModel& model, const PayoffSpec& payoff,
                                const LocalPolyDriver& driver, const BranchingConfig& cfg,
                                std::uint64_t seed) {
  payoff.validate();
  if (payoff.dim != model.dim) throw std::invalid_argument("payoff and model dimensions differ");
  const BranchingEstimator estimator(model, payoff, driver, cfg);

  BranchingResult result;
  const Index nt = cfg.time_grid.size();
  for (int k = 1; k <= cfg.picard_iters; ++k) {
    ValueSurface next(cfg.time_grid, cfg.space_axes);
    next.stderrs() = Matrix::Zero(nt, next.num_nodes());
    for (Index j = 0; j < next.num_nodes(); ++j) next.values()(nt - 1, j) = eval_payoff(payoff, next.node(j));

    const ValueSurface* prior = result.iterates.empty() ? nullptr : &result.iterates.back();
    const Index nodes = next.num_nodes();
    std::vector<NodeEstimate> est(static_cast<std::size_t>((nt - 1) * nodes));
    parallel_for(est.size(), [&](std::size_t idx) {
      const Index i = static_cast<Index>(idx) / nodes;
      const Index j = static_cast<Index>(idx) % nodes;
      Rng rng(branching_node_seed(seed, k, i, j));
      try {
        est[idx] = estimator.estimate(cfg.time_grid[i], next.node(j), prior, rng, cfg.paths);
      } catch (const instability_error& e) {
        throw instability_error(e.kind(), k, i, j, e.particles());
      }
    });
    for (std::size_t idx = 0; idx < est.size(); ++idx) {
      const Index i = static_cast<Index>(idx) / nodes;
      const Index j = static_cast<Index>(idx) % nodes;
      next.values()(i, j) = est[idx].mean;
      next.stderrs()(i, j) = est[idx].std_error;
      result.stats.samples += est[idx].samples;
      result.stats.particles += est[idx].particles;
      result.stats.max_family = std::max(result.stats.max_family, est[idx].max_family);
    }
    result.iterates.push_back(std::move(next));
  }
  result.surface = result.iterates.back();
  return result;
}

std::vector<BranchingTrial> run_branching_trials(const MarketModel& model, const PayoffSpec& payoff,
                                                 const LocalPolyDriver& driver, const BranchingConfig& cfg,
                                                 std::uint64_t root_seed, std::size_t trials) {
  std::vector<BranchingTrial> out(trials);
  for (std::size_t n = 0; n < trials; ++n) {
    BranchingTrial& trial = out[n];
    trial.seed = derive_seed(root_seed, n);
    const auto start = std::chrono::steady_clock::now();
    try {
      trial.result = price_branching(model, payoff, driver, cfg, trial.seed);
    } catch (const instability_error& e) {
      trial.failure = e.kind();
      trial.failure_message = e.what();
    }
    trial.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return out;
}

InstabilityMetrics instability_report(std::span<const BranchingTrial> runs) {
  if (runs.size() < 10) throw std::invalid_argument("instability report needs at least 10 trials");
  InstabilityMetrics m;
  m.trials = runs.size();
  std::vector<const BranchingResult*> done;
  for (const auto& r : runs) {
    if (r.result) {
      done.push_back(&*r.result);
    } else if (r.failure == instability_error::Kind::ParticleCap) {
      ++m.capped;
    } else {
      ++m.overflowed;
    }
  }
  m.completed = done.size();
  m.capped_fraction = static_cast<double>(m.capped + m.overflowed) / static_cast<double>(m.trials);
  if (done.empty()) return m;

  const ValueSurface& first = done.front()->surface;
  const Index nodes = first.num_nodes();
  for (Index j = 0; j < nodes; ++j) m.nodes.push_back(first.node(j));
  m.node_mean = Vector::Zero(nodes);
  m.node_std = Vector::Zero(nodes);
  m.node_mean_std_error = Vector::Zero(nodes);
  std::size_t samples = 0, particles = 0;
  for (Index j = 0; j < nodes; ++j) {
    RunningStats s, se;
    for (const auto* r : done) {
      s.add(r->surface.values()(0, j));
      se.add(r->surface.stderrs()(0, j));
    }
    m.node_mean[j] = s.mean();
    m.node_std[j] = s.stddev();
    m.node_mean_std_error[j] = se.mean();
  }
  for (const auto* r : done) {
    samples += r->stats.samples;
    particles += r->stats.particles;
    m.max_family = std::max(m.max_family, r->stats.max_family);
  }
  m.mean_particles_per_sample = samples ? static_cast<double>(particles) / static_cast<double>(samples) : 0.0;
  return m;
}

}  // namespace amopt
