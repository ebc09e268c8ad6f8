#include "amopt/surface.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace amopt {

Vector uniform_axis(double lo, double hi, Index n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("uniform_axis needs n >= 2 and hi > lo");
  Vector a = Vector::LinSpaced(n, lo, hi);
  a[n - 1] = hi;
  return a;
}

ValueSurface::ValueSurface(Vector times, std::vector<Vector> axes)
    : times_(std::move(times)), axes_(std::move(axes)) {
  if (times_.size() < 1 || axes_.empty()) throw std::invalid_argument("surface needs times and axes");
  for (Index i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) throw std::invalid_argument("surface times must increase");
  }
  Index n = 1;
  for (const auto& a : axes_) {
    if (a.size() < 1) throw std::invalid_argument("empty axis");
    for (Index k = 1; k < a.size(); ++k) {
      if (!(a[k] > a[k - 1])) throw std::invalid_argument("axis must be strictly increasing");
    }
    strides_.push_back(n);
    n *= a.size();
  }
  values_ = Matrix::Zero(times_.size(), n);
}

const Vector& ValueSurface::xs() const {
  if (axes_.size() != 1) throw std::logic_error("xs() on a multi-dimensional surface");
  return axes_[0];
}

Vector ValueSurface::node(Index k) const {
  Vector x(dim());
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    x[static_cast<Index>(a)] = axes_[a][(k / strides_[a]) % axes_[a].size()];
  }
  return x;
}

bool ValueSurface::same_grid(const ValueSurface& other, double tol) const {
  if (times_.size() != other.times_.size() || axes_.size() != other.axes_.size()) return false;
  if ((times_ - other.times_).cwiseAbs().maxCoeff() > tol) return false;
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    if (axes_[a].size() != other.axes_[a].size()) return false;
    if ((axes_[a] - other.axes_[a]).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

Index ValueSurface::slice_at_or_after(double s) const {
  const double* begin = times_.data();
  const double* end = begin + times_.size();
  const double* it = std::lower_bound(begin, end, s - 1e-12);
  if (it == end) throw std::out_of_range("time beyond the surface's last slice");
  return static_cast<Index>(it - begin);
}

std::optional<double> ValueSurface::interpolate_impl(Index i, const double* x, bool clamp) const {
  const Index d = dim();
  Index base = 0;
  std::array<double, kMaxDim> w{};
  std::array<Index, kMaxDim> step{};
  for (Index a = 0; a < d; ++a) {
    const Vector& ax = axes_[static_cast<std::size_t>(a)];
    double xa = x[a];
    if (xa < ax[0] || xa > ax[ax.size() - 1]) {
      if (!clamp) return std::nullopt;
      xa = std::clamp(xa, ax[0], ax[ax.size() - 1]);
    }
    if (ax.size() == 1) {
      w[a] = 0.0;
      step[a] = 0;
      continue;
    }
    const double* b = ax.data();
    Index j = static_cast<Index>(std::upper_bound(b, b + ax.size(), xa) - b) - 1;
    j = std::clamp<Index>(j, 0, ax.size() - 2);
    w[a] = (xa - ax[j]) / (ax[j + 1] - ax[j]);
    base += j * strides_[static_cast<std::size_t>(a)];
    step[a] = strides_[static_cast<std::size_t>(a)];
  }
  double acc = 0.0;
  const Index corners = Index{1} << d;
  for (Index m = 0; m < corners; ++m) {
    double weight = 1.0;
    Index k = base;
    for (Index a = 0; a < d; ++a) {
      if (m & (Index{1} << a)) {
        weight *= w[a];
        k += step[a];
      } else {
        weight *= 1.0 - w[a];
      }
    }
    if (weight != 0.0) acc += weight * values_(i, k);
  }
  return acc;
}

double ValueSurface::interpolate(Index i, double x) const {
  auto v = interpolate_impl(i, &x, false);
  if (!v) throw std::out_of_range("interpolation point outside the grid");
  return *v;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_surface_csv(const ValueSurface& s, std::ostream& out) {
  out << "t";
  if (s.dim() == 1) {
    out << ",x";
  } else {
    for (Index a = 0; a < s.dim(); ++a) out << ",x" << a + 1;
  }
  out << ",v\n";
  for (Index i = 0; i < s.num_times(); ++i) {
    for (Index k = 0; k < s.num_nodes(); ++k) {
      out << format_double(s.times()[i]);
      const Vector x = s.node(k);
      for (Index a = 0; a < x.size(); ++a) out << ',' << format_double(x[a]);
      out << ',' << format_double(s.values()(i, k)) << '\n';
    }
  }
}

void write_surface_csv(const ValueSurface& surface, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  write_surface_csv(surface, f);
}

namespace {

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

ValueSurface read_surface_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty surface file");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header.front() != "t" || header.back() != "v") {
    throw std::invalid_argument("surface header must be t,x..,v");
  }
  const std::size_t d = header.size() - 2;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw std::invalid_argument("ragged surface row: " + line);
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(parse_double(c));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::invalid_argument("surface file has no rows");

  auto unique_sorted = [&](std::size_t col) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r[col]);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  auto to_vector = [](const std::vector<double>& v) {
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
  };

  const auto ts = unique_sorted(0);
  std::vector<std::vector<double>> ax;
  std::vector<Vector> axes;
  for (std::size_t a = 0; a < d; ++a) {
    ax.push_back(unique_sorted(a + 1));
    axes.push_back(to_vector(ax.back()));
  }
  ValueSurface s(to_vector(ts), axes);
  if (static_cast<std::size_t>(s.num_times() * s.num_nodes()) != rows.size()) {
    throw std::invalid_argument("surface rows do not form a complete tensor grid");
  }
  auto index_of = [](const std::vector<double>& v, double x) {
    return static_cast<Index>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };
  Index stride = 1;
  std::vector<Index> strides;
  for (std::size_t a = 0; a < d; ++a) {
    strides.push_back(stride);
    stride *= static_cast<Index>(ax[a].size());
  }
  for (const auto& r : rows) {
    Index k = 0;
    for (std::size_t a = 0; a < d; ++a) k += index_of(ax[a], r[a + 1]) * strides[a];
    s.values()(index_of(ts, r[0]), k) = r[d + 1];
  }
  return s;
}

ValueSurface read_surface_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return read_surface_csv(f);
}

}  // namespace amopt
