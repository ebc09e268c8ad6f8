#pragma once

#include "amopt/types.hpp"

#include <algorithm>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace amopt {

/// Strictly increasing abscissae spanning [lo, hi] with n points.
Vector uniform_axis(double lo, double hi, Index n);

/// v(t_i, x_k) on a time grid times a tensor-product space grid.
///
/// values() has one row per time and one column per space node; nodes are
/// flattened with the first axis varying fastest. Space interpolation is
/// multilinear, time lookups are piecewise constant (see slice_at_or_after).
class ValueSurface {
 public:
  ValueSurface() = default;
  ValueSurface(Vector times, std::vector<Vector> axes);

  Index dim() const { return static_cast<Index>(axes_.size()); }
  Index num_times() const { return times_.size(); }
  Index num_nodes() const { return values_.cols(); }

  const Vector& times() const { return times_; }
  const std::vector<Vector>& axes() const { return axes_; }
  /// The single axis of a one-dimensional surface.
  const Vector& xs() const;

  Matrix& values() { return values_; }
  const Matrix& values() const { return values_; }
  /// Per-node standard errors for Monte-Carlo surfaces; empty otherwise.
  Matrix& stderrs() { return stderrs_; }
  const Matrix& stderrs() const { return stderrs_; }

  Vector node(Index k) const;
  bool same_grid(const ValueSurface& other, double tol = 1e-12) const;

  /// Smallest time index whose time is >= s (within 1e-12). Throws if s
  /// exceeds the last time.
  Index slice_at_or_after(double s) const;

  /// Multilinear interpolation of slice i at x; nullopt when x lies outside
  /// the grid box.
  template <typename Derived>
  std::optional<double> interpolate(Index i, const Eigen::MatrixBase<Derived>& x) const {
    const auto& xe = x.derived().eval();
    return interpolate_impl(i, xe.data(), false);
  }

  /// As interpolate, clamping x into the box first.
  template <typename Derived>
  double interpolate_clamped(Index i, const Eigen::MatrixBase<Derived>& x) const {
    const auto& xe = x.derived().eval();
    return *interpolate_impl(i, xe.data(), true);
  }

  double interpolate(Index i, double x) const;

 private:
  std::optional<double> interpolate_impl(Index i, const double* x, bool clamp) const;

  Vector times_;
  std::vector<Vector> axes_;
  std::vector<Index> strides_;
  Matrix values_;
  Matrix stderrs_;
};

/// Shortest decimal that round-trips, at most 17 significant digits.
std::string format_double(double v);

/// CSV with header "t,x,v" (d == 1) or "t,x1,..,xd,v"; one row per node,
/// times outermost.
void write_surface_csv(const ValueSurface& surface, std::ostream& out);
void write_surface_csv(const ValueSurface& surface, const std::string& path);
ValueSurface read_surface_csv(std::istream& in);
ValueSurface read_surface_csv(const std::string& path);

/// Splits a CSV line on commas (no quoting; the project's files never quote).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace amopt
