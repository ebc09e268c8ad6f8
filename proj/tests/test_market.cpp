#include "doctest.h"

#include "amopt/market.hpp"
#include "amopt/montecarlo.hpp"

#include <cmath>
#include <vector>

using namespace amopt;

namespace {

Vector vec1(double x) { return Vector::Constant(1, x); }

}  // namespace

TEST_SUITE("market") {

TEST_CASE("zero volatility grows deterministically") {
  const MarketModel m = MarketModel::black_scholes(0.06, 0.0);
  Rng rng(1);
  const std::vector<double> h{1.0};
  const PathSample p = sample_exact(m, 0.0, vec1(10.0), h, rng);
  CHECK(p.states(0, 0) == doctest::Approx(10.0 * std::exp(0.06)).epsilon(1e-14));
  CHECK(p.states(0, 0) == doctest::Approx(10.6184).epsilon(1e-5));
}

TEST_CASE("discounted price is a martingale") {
  const MarketModel m = MarketModel::black_scholes(0.06, 0.2);
  const LognormalStepper stepper(m);
  Rng rng(2);
  RunningStats s;
  for (int i = 0; i < 1'000'000; ++i) s.add(std::exp(-0.06) * stepper.advance(10.0, 1.0, rng));
  CHECK(std::abs(s.mean() - 10.0) < 3.0 * s.stderr_of_mean());
}

TEST_CASE("log-return variance matches the lognormal law") {
  const MarketModel m = MarketModel::black_scholes(0.06, 0.4);
  const LognormalStepper stepper(m);
  Rng rng(3);
  RunningStats s;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) s.add(std::log(stepper.advance(40.0, 1.0, rng) / 40.0));
  // Var of the sample variance of a Gaussian sample is 2 sigma^4 / (n - 1)
  const double band = 4.0 * std::sqrt(2.0 / (n - 1)) * 0.16;
  CHECK(std::abs(s.variance() - 0.16) < band);
  CHECK(std::abs(s.mean() - (0.06 - 0.08)) < 4.0 * s.stderr_of_mean());
}

TEST_CASE("sample_exact gives independent increments at several horizons") {
  const MarketModel m = MarketModel::black_scholes(0.0, 0.3);
  Rng rng(4);
  const std::vector<double> h{0.5, 1.0};
  RunningStats a, b, ab;
  for (int i = 0; i < 100'000; ++i) {
    const PathSample p = sample_exact(m, 0.0, vec1(1.0), h, rng);
    const double l1 = std::log(p.states(0, 0)), l2 = std::log(p.states(0, 1) / p.states(0, 0));
    a.add(l1);
    b.add(l2);
    ab.add(l1 * l2);
  }
  const double cov = ab.mean() - a.mean() * b.mean();
  CHECK(std::abs(cov) < 4.0 * 0.045 / std::sqrt(100'000.0));
}

TEST_CASE("positivity and seed determinism") {
  Matrix sb(2, 2);
  sb << 0.8, 0.0, 0.3, 0.9;
  const MarketModel m = MarketModel::constant(0.06, sb);
  const Vector x = (Vector(2) << 1.0, 2.0).finished();
  const std::vector<double> h{0.1, 0.5, 2.0, 10.0};
  Rng r1(99), r2(99);
  for (int i = 0; i < 2000; ++i) {
    const PathSample p = sample_exact(m, 0.0, x, h, r1);
    const PathSample q = sample_exact(m, 0.0, x, h, r2);
    CHECK((p.states.array() > 0.0).all());
    CHECK((p.states.array() == q.states.array()).all());
  }
}

TEST_CASE("argument errors") {
  const MarketModel m = MarketModel::black_scholes(0.06, 0.2);
  Rng rng(5);
  const std::vector<double> ok{1.0}, bad{1.0, 0.5};
  CHECK_THROWS_AS(sample_exact(m, 0.0, vec1(-1.0), ok, rng), std::domain_error);
  CHECK_THROWS_AS(sample_exact(m, 0.0, vec1(0.0), ok, rng), std::domain_error);
  CHECK_THROWS_AS(sample_exact(m, 0.0, vec1(1.0), bad, rng), std::invalid_argument);
  CHECK_THROWS_AS(MarketModel::black_scholes(0.06, std::nan("")).validate(), std::domain_error);
}

TEST_CASE("Euler sampler with constant FnVol matches the exact terminal mean") {
  const MarketModel exact = MarketModel::black_scholes(0.06, 0.2);
  const MarketModel fn = MarketModel::local(0.06, 1, FnVol{[](double, const Vector&) { return Matrix::Constant(1, 1, 0.2); }});
  std::vector<double> grid(101);
  for (int k = 0; k <= 100; ++k) grid[k] = k / 100.0;
  Rng r1(6), r2(7);
  RunningStats e, x;
  const LognormalStepper stepper(exact);
  for (int i = 0; i < 1'000'000; ++i) {
    const PathSample p = sample_euler(fn, 0.0, vec1(10.0), grid, r1);
    e.add(p.states(0, 100));
    x.add(stepper.advance(10.0, 1.0, r2));
  }
  CHECK(std::abs(e.mean() / x.mean() - 1.0) < 0.002);
}

TEST_CASE("Euler sampler with zero volatility is deterministic") {
  const MarketModel fn = MarketModel::local(0.06, 1, FnVol{[](double, const Vector&) { return Matrix::Zero(1, 1); }});
  const std::vector<double> grid{0.0, 0.25, 0.5, 1.0};
  Rng rng(8);
  const PathSample p = sample_euler(fn, 0.0, vec1(10.0), grid, rng);
  for (int k = 0; k < 4; ++k) CHECK(p.states(0, k) == doctest::Approx(10.0 * std::exp(0.06 * grid[k])).epsilon(1e-14));
}

TEST_CASE("state-dependent volatility stays positive") {
  const MarketModel fn = MarketModel::local(0.02, 1, FnVol{[](double t, const Vector& x) {
    return Matrix::Constant(1, 1, 0.1 + 0.5 * std::abs(std::sin(x[0] + t)));
  }});
  std::vector<double> grid(51);
  for (int k = 0; k <= 50; ++k) grid[k] = k / 50.0;
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) CHECK((sample_euler(fn, 0.0, vec1(1.0), grid, rng).states.array() > 0.0).all());
}

TEST_CASE("stream splitting gives distinct seeds") {
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 0, 1));
  CHECK(derive_seed(1, 1, 0) != derive_seed(1, 0, 1));
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

}
