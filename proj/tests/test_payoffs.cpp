#include "doctest.h"

#include "amopt/payoffs.hpp"
#include "amopt/rng.hpp"
#include "amopt/surface.hpp"

#include <cmath>
#include <vector>

using namespace amopt;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

MarketModel bs() { return MarketModel::black_scholes(0.06, 0.2); }

}  // namespace

TEST_SUITE("payoffs") {

TEST_CASE("payoff examples") {
  CHECK(eval_payoff(PayoffSpec::put(40), 40.0) == 0.0);
  CHECK(eval_payoff(PayoffSpec::strangle(25, 27), 26.0) == 0.0);
  CHECK(eval_payoff(PayoffSpec::geom_basket_put(30), v2(30, 30)) == 0.0);
  CHECK(eval_payoff(PayoffSpec::put(40), 30.0) == 10.0);
  CHECK(eval_payoff(PayoffSpec::strangle(25, 27), 20.0) == 5.0);
  CHECK(eval_payoff(PayoffSpec::strangle(25, 27), 30.0) == 3.0);
  CHECK(eval_payoff(PayoffSpec::arith_basket_put(30), v2(20, 30)) == 5.0);
  CHECK(eval_payoff(PayoffSpec::call(10), 12.5) == 2.5);
}

TEST_CASE("payoffs are non-negative") {
  Rng rng(11);
  const std::vector<PayoffSpec> specs{PayoffSpec::put(25), PayoffSpec::call(25), PayoffSpec::strangle(25, 27),
                                      PayoffSpec::arith_basket_put(25), PayoffSpec::geom_basket_put(25)};
  for (const auto& p : specs) {
    for (int i = 0; i < 2000; ++i) {
      Vector x(p.dim);
      for (Index k = 0; k < p.dim; ++k) x[k] = 60.0 * rng.uniform();
      CHECK(eval_payoff(p, x) >= 0.0);
    }
  }
}

TEST_CASE("dimension mismatch and invalid strikes") {
  CHECK_THROWS_AS(eval_payoff(PayoffSpec::arith_basket_put(25), Vector::Constant(1, 3.0)), std::invalid_argument);
  CHECK_THROWS_AS(PayoffSpec::strangle(27, 25).validate(), std::invalid_argument);
  CHECK_THROWS_AS(PayoffSpec::put(-1).validate(), std::invalid_argument);
}

TEST_CASE("cash flow examples") {
  const CashFlowSpec put(PayoffSpec::put(40), bs());
  for (double x : {1.0, 20.0, 40.0, 80.0}) CHECK(eval_cashflow(put, x) == doctest::Approx(2.4).epsilon(1e-15));

  const CashFlowSpec str(PayoffSpec::strangle(25, 27), bs());
  CHECK(eval_cashflow(str, 24.0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(eval_cashflow(str, 28.0) == doctest::Approx(-1.62).epsilon(1e-15));
  CHECK(eval_cashflow(str, 26.0) == doctest::Approx(-0.06).epsilon(1e-13));

  const CashFlowSpec arith(PayoffSpec::arith_basket_put(25), MarketModel::constant(0.06, Matrix::Identity(2, 2) * 0.3));
  CHECK(eval_cashflow(arith, v2(3, 70)) == doctest::Approx(1.5).epsilon(1e-15));

  Matrix same(2, 2);
  same << 0.2, 0.1, 0.2, 0.1;
  const CashFlowSpec geo(PayoffSpec::geom_basket_put(25), MarketModel::constant(0.06, same));
  CHECK(geo.geometric_correction() == 0.0);
  CHECK(eval_cashflow(geo, v2(3, 70)) == 1.5);
}

TEST_CASE("geometric cash flow correction") {
  Matrix sb(2, 2);
  sb << 0.3, 0.0, 0.1, 0.2;
  const CashFlowSpec geo(PayoffSpec::geom_basket_put(25), MarketModel::constant(0.06, sb));
  // (|s1|^2 + |s2|^2 - 2 <s1, s2>) / 8 = (0.09 + 0.05 - 0.06) / 8
  CHECK(geo.geometric_correction() == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(eval_cashflow(geo, v2(16, 25)) == doctest::Approx(1.5 - 0.01 * 20.0).epsilon(1e-14));
  CHECK(eval_cashflow(geo, v2(1e4, 1e4)) == 0.0);
}

TEST_CASE("geometric cash flow needs constant volatility") {
  const MarketModel fn = MarketModel::local(0.06, 2, FnVol{[](double, const Vector&) { return Matrix::Identity(2, 2); }});
  CHECK_THROWS_AS(CashFlowSpec(PayoffSpec::geom_basket_put(25), fn), unsupported_error);
}

TEST_CASE("cash flows are Lipschitz on compacts") {
  const CashFlowSpec str(PayoffSpec::strangle(25, 27), bs());
  double lip = 0.0;
  for (int k = 0; k < 20000; ++k) {
    const double a = 1.0 + 59.0 * k / 20000.0, b = a + 59.0 / 20000.0;
    lip = std::max(lip, std::abs(eval_cashflow(str, b) - eval_cashflow(str, a)) / (b - a));
  }
  // slope of the bridge: (r K1 + r K2) / (K2 - K1)
  CHECK(lip <= 0.06 * 52.0 / 2.0 + 1e-9);
}

TEST_CASE("subsolution residual") {
  const CashFlowSpec put(PayoffSpec::put(40), bs());
  CHECK(std::abs(subsolution_residual(put, Vector::Constant(1, 20.0))) < 1e-13);
  const CashFlowSpec str(PayoffSpec::strangle(25, 27), bs());
  CHECK(std::abs(subsolution_residual(str, Vector::Constant(1, 10.0))) < 1e-13);
  CHECK(std::abs(subsolution_residual(str, Vector::Constant(1, 40.0))) < 1e-13);
  const CashFlowSpec arith(PayoffSpec::arith_basket_put(25), MarketModel::constant(0.06, Matrix::Identity(2, 2) * 0.3));
  CHECK(std::abs(subsolution_residual(arith, v2(10, 12))) < 1e-13);
  Matrix sb(2, 2);
  sb << 0.3, 0.0, 0.1, 0.2;
  const CashFlowSpec geo(PayoffSpec::geom_basket_put(25), MarketModel::constant(0.06, sb));
  CHECK(std::abs(subsolution_residual(geo, v2(10, 12))) < 1e-12);
}

TEST_CASE("subsolution spot check on a surface") {
  const CashFlowSpec put(PayoffSpec::put(40), bs());
  ValueSurface s(uniform_axis(0, 1, 2), {uniform_axis(1, 80, 80)});
  for (Index j = 0; j < s.num_nodes(); ++j) {
    const double x = s.xs()[j];
    s.values()(0, j) = std::max(40.0 - x, 0.0) + (x > 30 ? 1.0 : 0.0);
    s.values()(1, j) = std::max(40.0 - x, 0.0);
  }
  std::vector<Vector> pts;
  for (double x : {5.0, 20.0, 29.0, 35.0, 40.0, 60.0}) pts.push_back(Vector::Constant(1, x));
  const SubsolutionReport rep = check_subsolution(put, pts, s);
  CHECK(rep.sampled == 6);
  CHECK(rep.in_exercise_region == 3);
  CHECK(rep.checked == 3);
  CHECK(rep.passed(1e-12));

  // call, c = 0, value strictly above the payoff everywhere: nothing to check
  const CashFlowSpec call(PayoffSpec::call(40), bs());
  ValueSurface c(uniform_axis(0, 1, 2), {uniform_axis(1, 80, 80)});
  c.values().setConstant(100.0);
  const SubsolutionReport none = check_subsolution(call, pts, c);
  CHECK(none.checked == 0);
  CHECK(none.passed(0.0));
}

}
