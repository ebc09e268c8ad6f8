#include "doctest.h"

#include "amopt/branch_poly.hpp"
#include "amopt/pde_ref.hpp"

#include <cmath>

using namespace amopt;

namespace {

const MarketModel kModel = MarketModel::black_scholes(0.06, 0.4);
const PayoffSpec kPut = PayoffSpec::put(40);

BranchingConfig config(const LocalPolyDriver& d, int iters = 1, std::size_t paths = 1000) {
  BranchingConfig c;
  c.picard_iters = iters;
  c.paths = paths;
  c.time_grid = uniform_axis(0.0, 1.0, 5);
  c.space_axes = {(Vector(3) << 30.0, 40.0, 50.0).finished()};
  c.validate(d);
  return c;
}

LocalPolyDriver spline_driver() {
  const ErfcDriver e{ExactDriver{CashFlowSpec(kPut, kModel)}, 10.0};
  return fit_local_poly_driver(e, 40.0 * (1.0 - std::exp(-0.06)), 20, 0.5);
}

Vector v1(double x) { return Vector::Constant(1, x); }

}  // namespace

TEST_SUITE("branch_poly") {

TEST_CASE("zero driver is plain Monte Carlo") {
  const LocalPolyDriver zero = LocalPolyDriver::zero();
  const BranchingEstimator est(kModel, kPut, zero, config(zero));
  const LognormalStepper stepper(kModel);
  for (const std::uint64_t seed : {1u, 2u, 77u}) {
    Rng a(seed), b(seed);
    const NodeEstimate n = est.estimate(0.0, v1(40), nullptr, a, 5000);
    const McEstimate m = european_mc(stepper, kPut, 1.0, v1(40), 5000, b);
    CHECK(n.mean == m.mean);
    CHECK(n.std_error == m.std_error);
    CHECK(n.particles == 5000);
  }
}

TEST_CASE("zero driver surface matches the European price") {
  const LocalPolyDriver zero = LocalPolyDriver::zero();
  const BranchingResult r = price_branching(kModel, kPut, zero, config(zero, 2, 20000), 9);
  CHECK(r.iterates.size() == 2);
  for (Index i = 0; i + 1 < r.surface.num_times(); ++i) {
    for (Index j = 0; j < r.surface.num_nodes(); ++j) {
      const double cf = european_closed_form(kModel, kPut, 1.0 - r.surface.times()[i], r.surface.node(j)[0]);
      CHECK(std::abs(r.surface.values()(i, j) - cf) < 4.5 * r.surface.stderrs()(i, j));
    }
  }
  for (Index j = 0; j < r.surface.num_nodes(); ++j) {
    CHECK(r.surface.values()(r.surface.num_times() - 1, j) == std::max(40.0 - r.surface.node(j)[0], 0.0));
  }
}

TEST_CASE("constant driver adds the running cash flow") {
  const LocalPolyDriver c = LocalPolyDriver::constant(2.4);
  const BranchingEstimator est(kModel, kPut, c, config(c));
  Rng rng(3);
  const NodeEstimate n = est.estimate(0.0, v1(40), nullptr, rng, 100000);
  const double eu = bs_closed_form_put(kModel, 40, 1.0, 40);
  const double oracle = eu + 2.4 * (1.0 - std::exp(-0.06)) / 0.06;
  CHECK(std::abs(n.mean - oracle) < 4.0 * n.std_error);
  // the premium over the European price is the integrated cash flow
  CHECK(std::abs((n.mean - eu) / (oracle - eu) - 1.0) < 4.0 * n.std_error / (oracle - eu));
  CHECK(n.particles >= n.samples);
}

TEST_CASE("family weights stay within their bound") {
  const LocalPolyDriver d = spline_driver();
  const BranchingEstimator est(kModel, kPut, d, config(d));
  std::size_t events = 0;
  bool ok = true;
  const DeathTrace trace = [&](const DeathEvent& e) {
    ++events;
    if (e.factor != 0.0) ok = ok && e.family_log_weight <= e.family_log_bound + 1e-9;
    ok = ok && std::abs(e.factor) <= e.bound * (1.0 + 1e-12);
  };
  Rng rng(4);
  est.estimate(0.2, v1(38), nullptr, rng, 2000, trace);
  CHECK(events > 0);
  CHECK(ok);
}

TEST_CASE("particle cap raises an instability error") {
  const LocalPolyDriver d = spline_driver();
  BranchingConfig cfg = config(d, 1, 2000);
  cfg.particle_cap = 50;
  const BranchingEstimator est(kModel, kPut, d, cfg);
  Rng rng(5);
  CHECK_THROWS_AS(est.estimate(0.0, v1(40), nullptr, rng, 2000), instability_error);
  try {
    price_branching(kModel, kPut, d, cfg, 5);
    FAIL("expected an instability error");
  } catch (const instability_error& e) {
    CHECK(e.kind() == instability_error::Kind::ParticleCap);
    CHECK(e.iteration() == 1);
    CHECK(e.time_index() >= 0);
    CHECK(e.node() >= 0);
    CHECK(e.particles() > 50);
  }
  const auto trials = run_branching_trials(kModel, kPut, d, cfg, 5, 10);
  for (const auto& t : trials) CHECK(t.failure.has_value());
  const InstabilityMetrics m = instability_report(trials);
  CHECK(m.capped == 10);
  CHECK(m.capped_fraction == 1.0);
}

TEST_CASE("trials and instability report") {
  const LocalPolyDriver c = LocalPolyDriver::constant(2.4);
  const auto trials = run_branching_trials(kModel, kPut, c, config(c, 1, 500), 11, 10);
  CHECK(trials.size() == 10);
  for (std::size_t n = 0; n < trials.size(); ++n) {
    CHECK(trials[n].seed == derive_seed(11, n));
    CHECK(trials[n].result.has_value());
  }
  const InstabilityMetrics m = instability_report(trials);
  CHECK(m.completed == 10);
  CHECK(m.capped_fraction == 0.0);
  CHECK(m.node_mean.size() == 3);
  CHECK(m.node_std.minCoeff() > 0.0);
  CHECK(m.mean_particles_per_sample >= 1.0);
  CHECK_THROWS_AS(instability_report(std::span<const BranchingTrial>(trials.data(), 5)), std::invalid_argument);

  // same seed, same surface
  const auto again = run_branching_trials(kModel, kPut, c, config(c, 1, 500), 11, 2);
  CHECK(again[1].result->surface.values() == trials[1].result->surface.values());
}

TEST_CASE("configuration checks") {
  const LocalPolyDriver d = spline_driver();
  BranchingConfig c = config(d);
  c.offspring_probs = {0.5, 0.5};
  CHECK_THROWS_AS(c.validate(d), std::invalid_argument);
  c.offspring_probs = {0.5, 0.3, 0.3};
  CHECK_THROWS_AS(c.validate(d), std::invalid_argument);
  c.offspring_probs = {0.5, 0.5, 0.0};
  CHECK_THROWS_AS(c.validate(d), std::invalid_argument);
  c.offspring_probs = {0.2, 0.3, 0.5};
  CHECK_NOTHROW(c.validate(d));
  c.time_grid = uniform_axis(0.0, 0.9, 4);
  CHECK_THROWS_AS(c.validate(d), std::invalid_argument);
  c = config(d);
  c.tau_mean = 0.0;
  CHECK_THROWS_AS(c.validate(d), std::invalid_argument);
  c = config(d);
  c.picard_iters = 0;
  CHECK_THROWS_AS(BranchingEstimator(kModel, kPut, d, c), std::invalid_argument);
}

}
