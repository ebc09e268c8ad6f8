#include "doctest.h"

#include "amopt/pde_ref.hpp"
#include "amopt/rand_driver.hpp"

#include <cmath>
#include <numbers>

using namespace amopt;

namespace {

const MarketModel kModel = MarketModel::black_scholes(0.06, 0.2);
const PayoffSpec kPut = PayoffSpec::put(25);

RandSchemeConfig config(Vector axis, std::size_t paths, Index fine = 10, Index every = 5) {
  RandSchemeConfig c;
  c.fine_steps = fine;
  c.update_every = every;
  c.space_axes = {std::move(axis)};
  c.paths = paths;
  c.trials = 2;
  return c;
}

// E[h(X_s)] for X_0 = x under the lognormal law, composite Simpson in z
template <typename F>
double expect_at(double x, double s, F h) {
  const int n = 4000;
  const double lo = -9.0, hi = 9.0, step = (hi - lo) / n, sig = 0.2;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + step * i;
    const double xs = x * std::exp((0.06 - 0.5 * sig * sig) * s + sig * std::sqrt(s) * z);
    const double w = i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * h(xs) * std::exp(-0.5 * z * z);
  }
  return acc * step / 3.0 / std::sqrt(2.0 * std::numbers::pi);
}

// Mean of one backward step from time t when every interior slice of v is
// g + lift: the survival leg gives the European price, and each fine window
// (s_k - dt, s_k] of tau contributes int e^{-r tau} d tau times the expected
// exercise reward at s_k.
double one_step_oracle(double t, double x, double lift, double theta, double t_last) {
  const double r = 0.06, k = 25.0, dt = 0.1, big_t = 1.0;
  double total = bs_closed_form_put(kModel, k, big_t - t, x);
  for (int m = 1;; ++m) {
    const double sk = std::round((t + m * dt) * 10.0) / 10.0;
    if (sk > big_t + 1e-12) break;
    const double a = sk - dt - t, b = sk - t;  // tau window
    const double w = (std::exp(-r * a) - std::exp(-r * b)) / r;
    const auto reward = [&](double y) {
      const double g = std::max(k - y, 0.0);
      if (g <= 0.0) return 0.0;
      double v;
      if (sk >= big_t - 1e-12) v = g;
      else if (sk > t_last + 1e-12) v = std::max(g, bs_closed_form_put(kModel, k, big_t - sk, y));
      else v = g + lift;
      const double gap = v - g;
      return r * k * (gap <= 0.0 ? 1.0 : std::exp(-gap / theta));
    };
    total += w * expect_at(x, sk - t, reward);
  }
  return total;
}

}  // namespace

TEST_SUITE("rand_driver") {

TEST_CASE("zero cash flow gives the European price") {
  const CashFlowSpec zero(kPut, kModel, CashFlowRule::Zero);
  const RandSchemeConfig cfg = config((Vector(3) << 20.0, 25.0, 30.0).finished(), 100000);
  const RandResult r = price_randomized(kModel, kPut, zero, cfg, 21);
  for (Index j = 0; j < 3; ++j) {
    const double cf = bs_closed_form_put(kModel, 25, 1.0, r.american.node(j)[0]);
    CHECK(std::abs(r.american.values()(0, j) - cf) < 4.0 * r.american.stderrs()(0, j));
    CHECK(std::abs(r.european.values()(0, j) - cf) < 4.0 * r.european.stderrs()(0, j));
  }
}

TEST_CASE("one backward step against quadrature") {
  const CashFlowSpec cash(kPut, kModel);
  const Vector axis = uniform_axis(1.0, 400.0, 400);
  const Vector times = (Vector(3) << 0.0, 0.5, 1.0).finished();
  ValueSurface v(times, {axis});
  const double lift = 0.3;
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < v.num_nodes(); ++j) v.values()(i, j) = std::max(25.0 - axis[j], 0.0) + lift;
  }
  for (const double theta : {0.5, 1e-100}) {
    RandSchemeConfig cfg = config(axis, 1);
    cfg.eps_mean = theta;
    const RandomizedScheme scheme(kModel, kPut, cash, cfg);
    for (const double t : {0.0, 0.5}) {
      for (const double x : {18.0, 24.0, 27.0}) {
        Rng rng(derive_seed(99, static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(t * 10)));
        const RandNodeStats st = scheme.estimate_node(t, Vector::Constant(1, x), v, rng, 200000);
        const double want = one_step_oracle(t, x, lift, theta, 0.5);
        CHECK(std::abs(st.american.mean() - want) < 4.0 * st.american.stderr_of_mean());
        const double eu = bs_closed_form_put(kModel, 25, 1.0 - t, x);
        CHECK(std::abs(st.european.mean() - eu) < 4.0 * st.european.stderr_of_mean());
        CHECK(std::abs(st.premium.mean() - (want - eu)) < 4.0 * st.premium.stderr_of_mean());
      }
    }
  }
}

TEST_CASE("lookup rules") {
  const CashFlowSpec cash(kPut, kModel);
  const RandSchemeConfig cfg = config(uniform_axis(10, 40, 31), 1);
  const RandomizedScheme scheme(kModel, kPut, cash, cfg);
  ValueSurface v(cfg.coarse_times(), cfg.space_axes);
  v.values().setConstant(7.0);
  const auto at = [](double x) { StateVector s(1); s[0] = x; return s; };
  CHECK(scheme.lookup(v, 0.3, at(20)) == 7.0);
  CHECK(scheme.lookup(v, 0.3, at(5)) == 20.0);
  CHECK(scheme.lookup(v, 0.3, at(60)) == doctest::Approx(bs_closed_form_put(kModel, 25, 0.5, 60)));
  CHECK(scheme.lookup(v, 1.0, at(20)) == 5.0);
  CHECK(scheme.lookup(v, 0.7, at(20)) == doctest::Approx(std::max(5.0, bs_closed_form_put(kModel, 25, 0.3, 20))));
  CHECK(scheme.lookup(v, 0.7, at(30)) == doctest::Approx(bs_closed_form_put(kModel, 25, 0.3, 30)));
}

TEST_CASE("zero volatility") {
  const MarketModel flat = MarketModel::black_scholes(0.06, 0.0);
  const CashFlowSpec cash(kPut, flat);
  RandSchemeConfig cfg = config(uniform_axis(5, 24, 20), 20000, 100, 10);
  cfg.trials = 4;
  const TrialReport rep = price_curve_with_stats(flat, kPut, cash, cfg, 3);
  for (std::size_t j = 0; j < rep.nodes.size(); ++j) {
    const double x = rep.nodes[j][0];
    const auto jj = static_cast<Index>(j);
    CHECK(rep.european_std[jj] < 1e-12);
    CHECK(rep.european_mean[jj] == doctest::Approx(std::max(25.0 * std::exp(-0.06) - x, 0.0)).epsilon(1e-12));
    // V = K - x. Noise in the stored iterate against a near-zero eps pulls the
    // estimate slightly below the payoff, never above it.
    const double band = 4.0 * rep.std[jj] / 2.0;
    CHECK(rep.mean[jj] <= 25.0 - x + band);
    CHECK(rep.mean[jj] >= 0.95 * (25.0 - x) - band);
    const double prem = (25.0 - x) - std::max(25.0 * std::exp(-0.06) - x, 0.0);
    CHECK(rep.premium_mean[jj] <= prem + 4.0 * rep.premium_std[jj] / 2.0);
  }
}

TEST_CASE("estimates dominate payoff and European price") {
  const CashFlowSpec cash(kPut, kModel);
  RandSchemeConfig cfg = config(uniform_axis(10, 40, 13), 4000, 100, 10);
  cfg.trials = 4;
  const TrialReport rep = price_curve_with_stats(kModel, kPut, cash, cfg, 8);
  for (std::size_t j = 0; j < rep.nodes.size(); ++j) {
    const auto jj = static_cast<Index>(j);
    const double g = std::max(25.0 - rep.nodes[j][0], 0.0);
    const double band = 3.0 * std::max(rep.std[jj], rep.mean_std_error[jj]);
    CHECK(rep.mean[jj] >= g - band);
    CHECK(rep.premium_mean[jj] >= -3.0 * std::max(rep.premium_std[jj], 1e-3));
    CHECK(rep.mean_std_error[jj] > 0.0);
  }
  CHECK(rep.seeds.size() == 4);
  CHECK(rep.seeds[2] == derive_seed(8, 2));
  CHECK(rep.rel_err.size() == 0);
}

TEST_CASE("same seed, same surface") {
  const CashFlowSpec cash(kPut, kModel);
  const RandSchemeConfig cfg = config(uniform_axis(10, 40, 7), 500);
  const RandResult a = price_randomized(kModel, kPut, cash, cfg, 5);
  const RandResult b = price_randomized(kModel, kPut, cash, cfg, 5);
  const RandResult c = price_randomized(kModel, kPut, cash, cfg, 6);
  CHECK(a.american.values() == b.american.values());
  CHECK(a.premium.stderrs() == b.premium.stderrs());
  CHECK(a.american.values() != c.american.values());
  const PremiumCurve p = early_exercise_premium_mc(a);
  CHECK(p.mean == a.premium.values().row(0).transpose());
}

TEST_CASE("reference comparison") {
  const CashFlowSpec cash(kPut, kModel);
  RandSchemeConfig cfg = config(uniform_axis(15, 35, 5), 2000);
  FDGrid g;
  g.x_min = 0.25;
  g.x_max = 125;
  g.n_space = 200;
  g.n_time = 200;
  const ValueSurface am = solve_american_fd(kModel, kPut, 1.0, g);
  const ValueSurface prem = early_exercise_premium(am, solve_european_fd(kModel, kPut, 1.0, g));
  const TrialReport rep = price_curve_with_stats(kModel, kPut, cash, cfg, 1, &am, &prem);
  REQUIRE(rep.reference.has_value());
  CHECK(rep.rel_err.size() == 5);
  CHECK(rep.premium_rel_err.size() == 5);
  CHECK(TrialReport::capped(rep.rel_err, 0.1).maxCoeff() <= 0.1);
  cfg.trials = 1;
  CHECK_THROWS_AS(price_curve_with_stats(kModel, kPut, cash, cfg, 1), std::invalid_argument);
}

TEST_CASE("finer value updates barely move the ATM price") {
  const CashFlowSpec cash(kPut, kModel);
  RandSchemeConfig cfg = config(uniform_axis(5, 50, 40), 10000, 100, 10);
  cfg.trials = 4;
  const TrialReport a = price_curve_with_stats(kModel, kPut, cash, cfg, 17);
  cfg.update_every = 5;
  const TrialReport b = price_curve_with_stats(kModel, kPut, cash, cfg, 17);
  // nodes 17 and 18 bracket the strike
  for (const Index j : {Index{17}, Index{18}}) {
    CHECK(std::abs(a.mean[j] - b.mean[j]) < 2.0 * std::max(a.std[j], b.std[j]));
  }
}

TEST_CASE("configuration checks") {
  RandSchemeConfig c = config(uniform_axis(10, 40, 7), 10);
  CHECK_NOTHROW(c.validate());
  CHECK(c.coarse_times().size() == 3);
  c.update_every = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = config(uniform_axis(10, 40, 7), 10);
  c.eps_mean = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = config(uniform_axis(10, 40, 7), 0);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = config((Vector(2) << -1.0, 3.0).finished(), 10);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = config(uniform_axis(10, 40, 7), 10);
  c.space_axes.push_back(c.space_axes[0]);
  CHECK_THROWS_AS(RandomizedScheme(kModel, kPut, CashFlowSpec(kPut, kModel), c), std::invalid_argument);
}

}
