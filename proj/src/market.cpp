#include "amopt/market.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace amopt {

namespace {

void check_start(const MarketModel& model, const Vector& x) {
  if (x.size() != model.dim) {
    throw std::invalid_argument("initial state has dimension " + std::to_string(x.size()) +
                                ", model has " + std::to_string(model.dim));
  }
  if (!((x.array() > 0.0).all()) || !x.allFinite()) {
    throw std::domain_error("initial state must lie in (0, inf)^d");
  }
}

void check_times(double t, std::span<const double> times, bool allow_equal_start) {
  double prev = t;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const bool ok = (k == 0 && allow_equal_start) ? times[k] >= prev : times[k] > prev;
    if (!ok || !std::isfinite(times[k])) {
      throw std::invalid_argument("horizons must be finite, start at or after t and be strictly increasing");
    }
    prev = times[k];
  }
}

void check_sigma(const Matrix& s, Index d) {
  if (s.rows() != d || s.cols() != d) throw std::invalid_argument("sigma_bar must be d x d");
  if (!s.allFinite()) throw std::domain_error("sigma_bar has non-finite entries");
}

}  // namespace

MarketModel MarketModel::black_scholes(double rate, double sigma) {
  return constant(rate, Matrix::Constant(1, 1, sigma));
}

MarketModel MarketModel::constant(double rate, Matrix sigma_bar) {
  MarketModel m;
  m.rate = rate;
  m.dim = sigma_bar.rows();
  m.vol = ConstVol{std::move(sigma_bar)};
  m.validate();
  return m;
}

MarketModel MarketModel::local(double rate, Index dim, FnVol vol) {
  MarketModel m;
  m.rate = rate;
  m.dim = dim;
  m.vol = std::move(vol);
  m.validate();
  return m;
}

const Matrix& MarketModel::sigma_bar() const {
  if (const auto* c = std::get_if<ConstVol>(&vol)) return c->sigma_bar;
  throw unsupported_error("constant sigma_bar requested from a state-dependent volatility model");
}

Matrix MarketModel::sigma_bar(double t, const Vector& x) const {
  if (const auto* c = std::get_if<ConstVol>(&vol)) return c->sigma_bar;
  Matrix s = std::get<FnVol>(vol).sigma_bar(t, x);
  check_sigma(s, dim);
  return s;
}

void MarketModel::validate() const {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  if (!std::isfinite(rate)) throw std::invalid_argument("rate must be finite");
  if (const auto* c = std::get_if<ConstVol>(&vol)) {
    check_sigma(c->sigma_bar, dim);
  } else if (!std::get<FnVol>(vol).sigma_bar) {
    throw std::invalid_argument("FnVol without a callable");
  }
}

PathSample sample_exact(const MarketModel& model, double t, const Vector& x,
                        std::span<const double> horizons, Rng& rng) {
  check_start(model, x);
  check_times(t, horizons, true);
  const LognormalStepper stepper(model);

  PathSample path;
  path.seed = rng.seed();
  path.times.assign(horizons.begin(), horizons.end());
  path.states.resize(model.dim, static_cast<Index>(horizons.size()));

  StateVector state = x;
  double now = t;
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    stepper.advance(state, horizons[k] - now, rng);
    now = horizons[k];
    path.states.col(static_cast<Index>(k)) = state;
  }
  return path;
}

PathSample sample_euler(const MarketModel& model, double t, const Vector& x,
                        std::span<const double> grid, Rng& rng) {
  check_start(model, x);
  if (grid.empty() || grid.front() != t) {
    throw std::invalid_argument("Euler grid must start at t");
  }
  check_times(t, grid.subspan(1), false);

  const Index d = model.dim;
  PathSample path;
  path.seed = rng.seed();
  path.times.assign(grid.begin(), grid.end());
  path.states.resize(d, static_cast<Index>(grid.size()));
  path.states.col(0) = x;

  Vector log_x = x.array().log();
  Vector state = x;
  Vector dw(d);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double dt = grid[k] - grid[k - 1];
    const Matrix s = model.sigma_bar(grid[k - 1], state);
    for (Index i = 0; i < d; ++i) dw[i] = std::sqrt(dt) * rng.normal();
    const Vector drift = (model.rate - 0.5 * s.rowwise().squaredNorm().array()).matrix() * dt;
    log_x += drift + s * dw;
    state = log_x.array().exp();
    path.states.col(static_cast<Index>(k)) = state;
  }
  return path;
}

LognormalStepper::LognormalStepper(const MarketModel& model)
    : dim_(model.dim), rate_(model.rate), sigma_bar_(model.sigma_bar()) {
  model.validate();
  drift_ = (model.rate - 0.5 * sigma_bar_.rowwise().squaredNorm().array()).matrix();
  sigma_ = sigma_bar_.rowwise().norm();
}

void LognormalStepper::advance(StateVector& x, double dt, Rng& rng) const {
  if (dt <= 0.0) return;
  const double sq = std::sqrt(dt);
  if (dim_ == 1) {
    x[0] *= std::exp(drift_[0] * dt + sigma_[0] * sq * rng.normal());
    return;
  }
  StateVector z(dim_);
  for (Index i = 0; i < dim_; ++i) z[i] = rng.normal();
  for (Index i = 0; i < dim_; ++i) {
    x[i] *= std::exp(drift_[i] * dt + sq * sigma_bar_.row(i).dot(z));
  }
}

}  // namespace amopt
