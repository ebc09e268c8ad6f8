#include "amopt/rand_driver.hpp"

#include "amopt/pde_ref.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace amopt {

void RandSchemeConfig::validate() const {
  if (!(maturity > 0.0)) throw std::invalid_argument("maturity must be positive");
  if (fine_steps < 1 || update_every < 1) throw std::invalid_argument("fine_steps and update_every must be >= 1");
  if (fine_steps % update_every != 0) throw std::invalid_argument("fine_steps must be divisible by update_every");
  if (!(tau_mean > 0.0)) throw std::invalid_argument("tau_mean must be positive");
  if (!(eps_mean > 0.0)) throw std::invalid_argument("eps_mean must be positive");
  if (paths < 1) throw std::invalid_argument("paths must be >= 1");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (space_axes.empty()) throw std::invalid_argument("space grid is empty");
  for (const Vector& axis : space_axes) {
    if (axis.size() < 1) throw std::invalid_argument("space axis is empty");
    if (!(axis[0] > 0.0)) throw std::invalid_argument("space grid must be positive");
    for (Index k = 1; k < axis.size(); ++k) {
      if (!(axis[k] > axis[k - 1])) throw std::invalid_argument("space grid must be strictly increasing");
    }
  }
}

Vector RandSchemeConfig::coarse_times() const {
  const Index m = fine_steps / update_every;
  Vector t(m + 1);
  for (Index i = 0; i <= m; ++i) t[i] = maturity * static_cast<double>(i) / static_cast<double>(m);
  return t;
}

RandomizedScheme::RandomizedScheme(const MarketModel& model, const PayoffSpec& payoff,
                                   const CashFlowSpec& cashflow, const RandSchemeConfig& cfg)
    : model_(model), stepper_(model), payoff_(payoff), cashflow_(cashflow), cfg_(cfg) {
  cfg_.validate();
  payoff_.validate();
  if (payoff_.dim != model.dim || static_cast<Index>(cfg_.space_axes.size()) != model.dim) {
    throw std::invalid_argument("payoff, model and space grid dimensions differ");
  }
}

double RandomizedScheme::advance_time(double t, double tau) const {
  // phi(t + tau) on the fine grid
  const double dt = cfg_.fine_dt();
  const double k = std::ceil((t + tau) / dt - 1e-9);
  return std::min(k * dt, cfg_.maturity);
}

double RandomizedScheme::far_field_high(double s, double x) const {
  return european_closed_form(model_, payoff_, cfg_.maturity - s, x);
}

double RandomizedScheme::lookup(const ValueSurface& v, double s, const StateVector& x) const {
  if (s >= cfg_.maturity - 1e-12) return eval_payoff(payoff_, x);
  const Index i = v.slice_at_or_after(s);
  if (i == v.num_times() - 1) {
    const double g = eval_payoff(payoff_, x);
    if (stepper_.dim() != 1) return g;
    return std::max(g, european_closed_form(model_, payoff_, cfg_.maturity - s, x[0]));
  }
  if (stepper_.dim() == 1) {
    const Vector& xs = v.axes()[0];
    if (x[0] < xs[0]) return eval_payoff(payoff_, x);
    if (x[0] > xs[xs.size() - 1]) return far_field_high(v.times()[i], x[0]);
    return v.interpolate(i, x[0]);
  }
  return v.interpolate_clamped(i, x);
}

RandNodeStats RandomizedScheme::estimate_node(double t, const Vector& x, const ValueSurface& v, Rng& rng,
                                              std::size_t paths) const {
  RandNodeStats out;
  const double r = stepper_.rate();
  const double m = cfg_.tau_mean;
  const double remaining = cfg_.maturity - t;
  const double df_T = std::exp(-r * remaining);
  const double survival = std::exp(-remaining / m);
  StateVector state(stepper_.dim());
  for (std::size_t p = 0; p < paths; ++p) {
    state = x;
    const double tau = rng.exponential(m);
    double am = 0.0;
    if (tau >= remaining) {
      stepper_.advance(state, remaining, rng);
      am = df_T * eval_payoff(payoff_, state) / survival;
    } else {
      const double s = advance_time(t, tau);
      stepper_.advance(state, s - t, rng);
      const double eps = rng.exponential(cfg_.eps_mean);
      const double g = eval_payoff(payoff_, state);
      // V > 0 before maturity, so exercise only happens where g > 0
      if (g > 0.0 && g + eps >= lookup(v, s, state)) {
        const double density = std::exp(-tau / m) / m;
        am = std::exp(-r * tau) / density * eval_cashflow(cashflow_, state);
      }
      stepper_.advance(state, cfg_.maturity - s, rng);
    }
    const double eu = df_T * eval_payoff(payoff_, state);
    out.american.add(am);
    out.european.add(eu);
    out.premium.add(am - eu);
  }
  return out;
}

std::uint64_t randomized_node_seed(std::uint64_t seed, Index time_index, Index node) {
  return derive_seed(seed, static_cast<std::uint64_t>(time_index), static_cast<std::uint64_t>(node));
}

RandResult price_randomized(const MarketModel& model, const PayoffSpec& payoff, const CashFlowSpec& cashflow,
                            const RandSchemeConfig& cfg, std::uint64_t seed) {
  const RandomizedScheme scheme(model, payoff, cashflow, cfg);
  const Vector times = cfg.coarse_times();
  const Index nt = times.size();

  RandResult res{ValueSurface(times, cfg.space_axes), ValueSurface(times, cfg.space_axes),
                 ValueSurface(times, cfg.space_axes)};
  const Index nodes = res.american.num_nodes();
  for (ValueSurface* s : {&res.american, &res.european, &res.premium}) {
    s->values().setZero();
    s->stderrs() = Matrix::Zero(nt, nodes);
  }
  for (Index j = 0; j < nodes; ++j) {
    const double g = eval_payoff(payoff, res.american.node(j));
    res.american.values()(nt - 1, j) = g;
    res.european.values()(nt - 1, j) = g;
  }

  std::vector<RandNodeStats> stats(static_cast<std::size_t>(nodes));
  for (Index i = nt - 2; i >= 0; --i) {
    parallel_for(stats.size(), [&](std::size_t j) {
      Rng rng(randomized_node_seed(seed, i, static_cast<Index>(j)));
      stats[j] = scheme.estimate_node(times[i], res.american.node(static_cast<Index>(j)), res.american, rng,
                                      cfg.paths);
    });
    for (Index j = 0; j < nodes; ++j) {
      const RandNodeStats& st = stats[static_cast<std::size_t>(j)];
      res.american.values()(i, j) = st.american.mean();
      res.american.stderrs()(i, j) = st.american.stderr_of_mean();
      res.european.values()(i, j) = st.european.mean();
      res.european.stderrs()(i, j) = st.european.stderr_of_mean();
      res.premium.values()(i, j) = st.premium.mean();
      res.premium.stderrs()(i, j) = st.premium.stderr_of_mean();
    }
  }
  return res;
}

PremiumCurve early_exercise_premium_mc(const RandResult& result) {
  return {result.premium.values().row(0).transpose(), result.premium.stderrs().row(0).transpose()};
}

namespace {

void column_stats(const Matrix& m, Vector& mean, Vector& std) {
  mean = m.colwise().mean().transpose();
  std = Vector::Zero(m.cols());
  if (m.rows() < 2) return;
  for (Index j = 0; j < m.cols(); ++j) {
    std[j] = std::sqrt((m.col(j).array() - mean[j]).square().sum() / static_cast<double>(m.rows() - 1));
  }
}

Vector reference_at(const ValueSurface& ref, const std::vector<Vector>& nodes) {
  Vector out(static_cast<Index>(nodes.size()));
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const auto v = ref.interpolate(0, nodes[j]);
    if (!v) throw std::invalid_argument("reference surface does not cover the price grid");
    out[static_cast<Index>(j)] = *v;
  }
  return out;
}

Vector relative_error(const Vector& est, const Vector& ref) {
  return ((est - ref).array().abs() / ref.array().abs()).matrix();
}

}  // namespace

TrialReport price_curve_with_stats(const MarketModel& model, const PayoffSpec& payoff,
                                   const CashFlowSpec& cashflow, const RandSchemeConfig& cfg,
                                   std::uint64_t root_seed, const ValueSurface* reference,
                                   const ValueSurface* reference_premium) {
  cfg.validate();
  if (cfg.trials < 2) throw std::invalid_argument("price curve statistics need at least two trials");
  const ValueSurface grid(Vector::Zero(1), cfg.space_axes);
  const Index nodes = grid.num_nodes();
  const auto trials = static_cast<Index>(cfg.trials);

  TrialReport rep;
  for (Index j = 0; j < nodes; ++j) rep.nodes.push_back(grid.node(j));
  rep.american.resize(trials, nodes);
  rep.european.resize(trials, nodes);
  rep.premium.resize(trials, nodes);
  Matrix stderrs(trials, nodes);
  rep.seconds.assign(cfg.trials, 0.0);
  for (Index n = 0; n < trials; ++n) rep.seeds.push_back(derive_seed(root_seed, static_cast<std::uint64_t>(n)));

  for (Index n = 0; n < trials; ++n) {
    const auto start = std::chrono::steady_clock::now();
    const RandResult res = price_randomized(model, payoff, cashflow, cfg, rep.seeds[static_cast<std::size_t>(n)]);
    rep.seconds[static_cast<std::size_t>(n)] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rep.american.row(n) = res.american.values().row(0);
    rep.european.row(n) = res.european.values().row(0);
    rep.premium.row(n) = res.premium.values().row(0);
    stderrs.row(n) = res.american.stderrs().row(0);
  }
  column_stats(rep.american, rep.mean, rep.std);
  column_stats(rep.european, rep.european_mean, rep.european_std);
  column_stats(rep.premium, rep.premium_mean, rep.premium_std);
  rep.mean_std_error = stderrs.colwise().mean().transpose();

  if (reference) {
    rep.reference = reference_at(*reference, rep.nodes);
    rep.rel_err = relative_error(rep.mean, *rep.reference);
  }
  if (reference_premium) {
    rep.reference_premium = reference_at(*reference_premium, rep.nodes);
    rep.premium_rel_err = relative_error(rep.premium_mean, *rep.reference_premium);
  }
  return rep;
}

}  // namespace amopt
