#include "amopt/experiment.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace amopt {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid config:";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("expected a finite number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

Index to_index(const std::string& s) { return static_cast<Index>(to_u64(s)); }

bool to_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<double> to_list(const std::string& s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream in(t);
  std::vector<double> out;
  for (std::string tok; in >> tok;) out.push_back(to_double(tok));
  if (out.empty()) throw std::invalid_argument("expected a list of numbers");
  return out;
}

// rows separated by ';', entries by commas or blanks
Matrix to_matrix(const std::string& s) {
  std::vector<std::vector<double>> rows;
  std::stringstream in(s);
  for (std::string row; std::getline(in, row, ';');) rows.push_back(to_list(row));
  const auto n = static_cast<Index>(rows.size());
  Matrix m(n, static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != m.cols()) {
      throw std::invalid_argument("matrix rows have different lengths");
    }
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

PayoffKind to_kind(const std::string& s) {
  if (s == "put") return PayoffKind::Put;
  if (s == "call") return PayoffKind::Call;
  if (s == "strangle") return PayoffKind::Strangle;
  if (s == "arith_basket_put") return PayoffKind::ArithBasketPut;
  if (s == "geom_basket_put") return PayoffKind::GeomBasketPut;
  throw std::invalid_argument("unknown payoff kind '" + s + "'");
}

Method to_method(const std::string& s) {
  if (s == "fd") return Method::Fd;
  if (s == "branching") return Method::Branching;
  if (s == "randomized") return Method::Randomized;
  if (s == "european-cf") return Method::EuropeanCf;
  throw std::invalid_argument("unknown method '" + s + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.rate", [](auto& c, auto& v) { c.rate = to_double(v); }},
      {"model.sigma",
       [](auto& c, auto& v) {
         const double sigma = to_double(v);
         if (sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
         c.sigma_bar = Matrix::Constant(1, 1, sigma);
       }},
      {"model.sigma_bar", [](auto& c, auto& v) { c.sigma_bar = to_matrix(v); }},
      {"model.maturity", [](auto& c, auto& v) { c.maturity = to_double(v); }},
      {"payoff.kind",
       [](auto& c, auto& v) {
         c.payoff.kind = to_kind(v);
         c.payoff.dim = (c.payoff.kind == PayoffKind::ArithBasketPut || c.payoff.kind == PayoffKind::GeomBasketPut) ? 2 : 1;
       }},
      {"payoff.strike", [](auto& c, auto& v) { c.payoff.strike = to_double(v); }},
      {"payoff.strike_high", [](auto& c, auto& v) { c.payoff.strike_high = to_double(v); }},
      {"payoff.cashflow",
       [](auto& c, auto& v) {
         if (v == "example") c.cashflow = CashFlowRule::Example;
         else if (v == "zero") c.cashflow = CashFlowRule::Zero;
         else throw std::invalid_argument("cashflow must be 'example' or 'zero'");
       }},
      {"run.method", [](auto& c, auto& v) { c.method = to_method(v); }},
      {"run.seed", [](auto& c, auto& v) { c.seed = to_u64(v); }},
      {"run.trials", [](auto& c, auto& v) { c.trials = to_u64(v); }},
      {"run.paths", [](auto& c, auto& v) { c.paths = to_u64(v); }},
      {"run.out", [](auto& c, auto& v) { c.out = v; }},
      {"grid.x_min", [](auto& c, auto& v) { c.x_min = to_double(v); }},
      {"grid.x_max", [](auto& c, auto& v) { c.x_max = to_double(v); }},
      {"grid.points", [](auto& c, auto& v) { c.points = to_index(v); }},
      {"grid.fine_steps", [](auto& c, auto& v) { c.fine_steps = to_index(v); }},
      {"grid.update_every", [](auto& c, auto& v) { c.update_every = to_index(v); }},
      {"grid.time_periods", [](auto& c, auto& v) { c.time_periods = to_index(v); }},
      {"randomized.tau_mean", [](auto& c, auto& v) { c.tau_mean = to_double(v); }},
      {"randomized.eps_mean", [](auto& c, auto& v) { c.eps_mean = to_double(v); }},
      {"branching.driver",
       [](auto& c, auto& v) {
         if (v == "spline") c.branch_driver = BranchDriverKind::Spline;
         else if (v == "constant") c.branch_driver = BranchDriverKind::Constant;
         else if (v == "zero") c.branch_driver = BranchDriverKind::Zero;
         else throw std::invalid_argument("driver must be spline, constant or zero");
       }},
      {"branching.tau_mean", [](auto& c, auto& v) { c.branch_tau_mean = to_double(v); }},
      {"branching.kappa", [](auto& c, auto& v) { c.kappa = to_double(v); }},
      {"branching.spline_cells", [](auto& c, auto& v) { c.spline_cells = to_index(v); }},
      {"branching.y_max", [](auto& c, auto& v) { c.y_max = to_double(v); }},
      {"branching.blend", [](auto& c, auto& v) { c.blend = to_double(v); }},
      {"branching.constant_value", [](auto& c, auto& v) { c.constant_value = to_double(v); }},
      {"branching.offspring_probs", [](auto& c, auto& v) { c.offspring_probs = to_list(v); }},
      {"branching.picard_iters", [](auto& c, auto& v) { c.picard_iters = static_cast<int>(to_u64(v)); }},
      {"branching.particle_cap", [](auto& c, auto& v) { c.particle_cap = to_u64(v); }},
      {"fd.x_min", [](auto& c, auto& v) { c.fd.x_min = to_double(v); }},
      {"fd.x_max", [](auto& c, auto& v) { c.fd.x_max = to_double(v); }},
      {"fd.n_space", [](auto& c, auto& v) { c.fd.n_space = to_index(v); }},
      {"fd.n_time", [](auto& c, auto& v) { c.fd.n_time = to_index(v); }},
      {"fd.scheme", [](auto& c, auto& v) { c.fd.scheme = fd_scheme_from_string(v); }},
      {"fd.reference", [](auto& c, auto& v) { c.reference = to_bool(v); }},
      {"report.caps", [](auto& c, auto& v) { c.caps = to_list(v); }},
      {"report.full_surface", [](auto& c, auto& v) { c.full_surface = to_bool(v); }},
  };
  return table;
}

template <typename F>
void check(std::vector<std::string>& errors, const std::string& what, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    errors.push_back(what + ": " + e.what());
  }
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  check(errors, "model", [&] { c.model().validate(); });
  check(errors, "payoff", [&] { c.payoff.validate(); });
  if (c.sigma_bar.rows() != c.payoff.dim) {
    errors.push_back("model: sigma_bar has " + std::to_string(c.sigma_bar.rows()) + " rows but the payoff has dimension " +
                     std::to_string(c.payoff.dim));
  }
  if (!(c.maturity > 0.0)) errors.push_back("model.maturity must be positive");
  if (!(c.x_min > 0.0) || !(c.x_max > c.x_min)) errors.push_back("grid: need 0 < x_min < x_max");
  if (c.points < 2) errors.push_back("grid.points must be >= 2");
  if (c.trials < 1) errors.push_back("run.trials must be >= 1");
  for (double cap : c.caps) {
    if (!(cap > 0.0)) errors.push_back("report.caps must be positive");
  }
  if (!errors.empty()) return errors;

  check(errors, "cashflow", [&] { (void)c.cashflow_spec(); });
  const bool one_d = c.payoff.dim == 1;
  switch (c.method) {
    case Method::Fd:
      if (!one_d) errors.push_back("run.method = fd needs a one-dimensional payoff");
      check(errors, "fd", [&] { c.fd.validate(); });
      break;
    case Method::EuropeanCf:
      if (!one_d) errors.push_back("run.method = european-cf needs a one-dimensional payoff");
      break;
    case Method::Randomized:
      check(errors, "randomized", [&] { c.randomized().validate(); });
      if (c.trials < 2) errors.push_back("run.trials must be >= 2 for price statistics");
      if (one_d && c.reference) check(errors, "fd", [&] { c.fd.validate(); });
      break;
    case Method::Branching:
      check(errors, "branching", [&] {
        const LocalPolyDriver d = c.local_poly_driver();
        c.branching().validate(d);
      });
      if (one_d && c.reference) check(errors, "fd", [&] { c.fd.validate(); });
      break;
  }
  return errors;
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return os.str();
}

std::string cap_label(double cap) { return "rel_err_cap_" + format_double(cap); }

std::vector<std::string> coord_names(Index d) {
  if (d == 1) return {"x"};
  std::vector<std::string> out;
  for (Index k = 1; k <= d; ++k) out.push_back("x" + std::to_string(k));
  return out;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row_strings(header);
  }
  void row(const std::vector<double>& values) {
    for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << format_double(values[k]);
    out_ << '\n';
  }
  void row_strings(const std::vector<std::string>& values) {
    for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << values[k];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::vector<double> coords(const Vector& x) { return {x.data(), x.data() + x.size()}; }

ValueSurface valuation_slice(const ValueSurface& s) {
  ValueSurface out(s.times().head(1), s.axes());
  out.values() = s.values().topRows(1);
  if (s.stderrs().size()) out.stderrs() = s.stderrs().topRows(1);
  return out;
}

void emit_surface(const ExperimentConfig& cfg, const ValueSurface& s, const fs::path& path, RunOutcome& out) {
  write_surface_csv(cfg.full_surface ? s : valuation_slice(s), path.string());
  out.files.push_back(path.filename().string());
}

struct Reference {
  ValueSurface american, european, premium;
  double residual = 0.0;
};

Reference fd_reference(const ExperimentConfig& cfg) {
  const MarketModel m = cfg.model();
  Reference r;
  r.american = solve_american_fd(m, cfg.payoff, cfg.maturity, cfg.fd);
  r.european = solve_european_fd(m, cfg.payoff, cfg.maturity, cfg.fd);
  r.premium = early_exercise_premium(r.american, r.european);
  r.residual = obstacle_residual(m, cfg.payoff, cfg.fd, r.american);
  return r;
}

json fd_provenance(const ExperimentConfig& cfg, double residual) {
  return {{"solver", "implicit finite differences"}, {"scheme", to_string(cfg.fd.scheme)},
          {"x_min", cfg.fd.x_min}, {"x_max", cfg.fd.x_max}, {"n_space", cfg.fd.n_space},
          {"n_time", cfg.fd.n_time}, {"obstacle_residual", residual}};
}

// Writes x.., mean, std[, ref, rel_err, caps..] for a curve at t = 0.
void write_curve(const ExperimentConfig& cfg, const fs::path& path, const std::vector<Vector>& nodes,
                 const std::vector<std::pair<std::string, Vector>>& columns, const std::optional<Vector>& ref,
                 const Vector& mean, RunOutcome& out) {
  std::vector<std::string> header = coord_names(nodes.front().size());
  for (const auto& [name, _] : columns) header.push_back(name);
  Vector rel;
  if (ref) {
    header.push_back("ref");
    header.push_back("rel_err");
    for (double cap : cfg.caps) header.push_back(cap_label(cap));
    rel = ((mean - *ref).array().abs() / ref->array().abs()).matrix();
  }
  CsvWriter w(path, header);
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const auto jj = static_cast<Index>(j);
    std::vector<double> row = coords(nodes[j]);
    for (const auto& [_, col] : columns) row.push_back(col[jj]);
    if (ref) {
      row.push_back((*ref)[jj]);
      row.push_back(rel[jj]);
      for (double cap : cfg.caps) row.push_back(std::min(rel[jj], cap));
    }
    w.row(row);
  }
  out.files.push_back(path.filename().string());
}

json units_for(const std::vector<std::string>& cols) {
  json u = json::object();
  for (const auto& c : cols) {
    if (c == "t") u[c] = "years";
    else if (c == "trial" || c == "particles" || c == "samples" || c == "max_family") u[c] = "count";
    else if (c == "seed") u[c] = "u64";
    else if (c == "seconds") u[c] = "seconds";
    else if (c.rfind("rel_err", 0) == 0) u[c] = "fraction";
    else if (c == "status") u[c] = "text";
    else u[c] = "currency";
  }
  return u;
}

Vector curve_at(const ValueSurface& s, Index slice, const std::vector<Vector>& nodes) {
  Vector out(static_cast<Index>(nodes.size()));
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const auto v = s.interpolate(slice, nodes[j]);
    if (!v) throw std::invalid_argument("reference grid does not cover the price grid");
    out[static_cast<Index>(j)] = *v;
  }
  return out;
}

void write_report(const fs::path& dir, json report, RunOutcome& out) {
  std::ofstream f(dir / "report.json");
  f << report.dump(2) << '\n';
  out.files.push_back("report.json");
}

json base_report(const ExperimentConfig& cfg) {
  json cfg_echo = json::object();
  for (const auto& [k, v] : cfg.raw) cfg_echo[k] = v;
  return {{"config_hash", cfg.hash()}, {"method", to_string(cfg.method)}, {"payoff", to_string(cfg.payoff.kind)},
          {"config", cfg_echo}};
}

void run_fd(const ExperimentConfig& cfg, const fs::path& dir, RunOutcome& out, json& report) {
  const Reference ref = fd_reference(cfg);
  emit_surface(cfg, ref.american, dir / "surface.csv", out);
  emit_surface(cfg, ref.european, dir / "european.csv", out);
  emit_surface(cfg, ref.premium, dir / "premium.csv", out);
  const ValueSurface grid(Vector::Zero(1), cfg.space_axes());
  std::vector<Vector> nodes;
  for (Index j = 0; j < grid.num_nodes(); ++j) nodes.push_back(grid.node(j));
  const Vector am = curve_at(ref.american, 0, nodes), eu = curve_at(ref.european, 0, nodes);
  write_curve(cfg, dir / "price_curve.csv", nodes, {{"american", am}, {"european", eu}, {"premium", am - eu}},
              std::nullopt, am, out);
  report["reference"] = fd_provenance(cfg, ref.residual);
  report["columns"] = {{"surface.csv", units_for({"t", "x", "v"})},
                       {"price_curve.csv", units_for({"x", "american", "european", "premium"})}};
  out.notes.push_back("obstacle residual " + format_double(ref.residual));
}

void run_european_cf(const ExperimentConfig& cfg, const fs::path& dir, RunOutcome& out, json& report) {
  const MarketModel m = cfg.model();
  const Vector xs = cfg.space_axes()[0];
  ValueSurface s(Vector::Zero(1), cfg.space_axes());
  for (Index j = 0; j < xs.size(); ++j) s.values()(0, j) = european_closed_form(m, cfg.payoff, cfg.maturity, xs[j]);
  emit_surface(cfg, s, dir / "surface.csv", out);
  std::vector<Vector> nodes;
  for (Index j = 0; j < s.num_nodes(); ++j) nodes.push_back(s.node(j));
  write_curve(cfg, dir / "price_curve.csv", nodes, {{"price", s.values().row(0).transpose()}}, std::nullopt,
              s.values().row(0).transpose(), out);
  report["columns"] = {{"price_curve.csv", units_for({"x", "price"})}};
}

void run_randomized(const ExperimentConfig& cfg, const fs::path& dir, RunOutcome& out, json& report) {
  const MarketModel m = cfg.model();
  std::optional<Reference> ref;
  if (cfg.payoff.dim == 1 && cfg.reference) ref = fd_reference(cfg);
  const TrialReport rep =
      price_curve_with_stats(m, cfg.payoff, cfg.cashflow_spec(), cfg.randomized(), cfg.seed,
                             ref ? &ref->american : nullptr, ref ? &ref->premium : nullptr);

  ValueSurface mean_surface(Vector::Zero(1), cfg.space_axes());
  mean_surface.values() = rep.mean.transpose();
  mean_surface.stderrs() = rep.std.transpose();
  write_surface_csv(mean_surface, (dir / "surface.csv").string());
  out.files.push_back("surface.csv");

  write_curve(cfg, dir / "price_curve.csv", rep.nodes,
              {{"mean", rep.mean}, {"std", rep.std}, {"mean_std_error", rep.mean_std_error},
               {"european_mean", rep.european_mean}, {"european_std", rep.european_std}},
              rep.reference, rep.mean, out);
  write_curve(cfg, dir / "premium.csv", rep.nodes, {{"mean", rep.premium_mean}, {"std", rep.premium_std}},
              rep.reference_premium, rep.premium_mean, out);

  std::vector<std::string> header{"trial", "seed"};
  for (const auto& c : coord_names(m.dim)) header.push_back(c);
  header.insert(header.end(), {"american", "european", "premium"});
  {
    CsvWriter w(dir / "trials.csv", header);
    for (Index n = 0; n < rep.american.rows(); ++n) {
      for (Index j = 0; j < rep.american.cols(); ++j) {
        std::vector<std::string> row{std::to_string(n), std::to_string(rep.seeds[static_cast<std::size_t>(n)])};
        for (double c : coords(rep.nodes[static_cast<std::size_t>(j)])) row.push_back(format_double(c));
        row.push_back(format_double(rep.american(n, j)));
        row.push_back(format_double(rep.european(n, j)));
        row.push_back(format_double(rep.premium(n, j)));
        w.row_strings(row);
      }
    }
    out.files.push_back("trials.csv");
  }
  {
    CsvWriter w(dir / "timing.csv", {"trial", "seconds"});
    double total = 0.0;
    for (std::size_t n = 0; n < rep.seconds.size(); ++n) {
      w.row({static_cast<double>(n), rep.seconds[n]});
      total += rep.seconds[n];
    }
    out.files.push_back("timing.csv");
    std::ostringstream os;
    os << "mean wall clock per price curve: " << std::setprecision(3) << total / static_cast<double>(rep.seconds.size())
       << " s";
    out.notes.push_back(os.str());
  }
  if (ref) {
    report["reference"] = fd_provenance(cfg, ref->residual);
    out.notes.push_back("max relative error vs FD reference: " + format_double(rep.rel_err.maxCoeff()));
  }
  report["columns"] = {
      {"price_curve.csv", units_for({"x", "mean", "std", "mean_std_error", "european_mean", "european_std", "ref",
                                     "rel_err"})},
      {"premium.csv", units_for({"x", "mean", "std", "ref", "rel_err"})},
      {"trials.csv", units_for(header)},
      {"timing.csv", units_for({"trial", "seconds"})}};
}

void run_branching(const ExperimentConfig& cfg, const fs::path& dir, RunOutcome& out, json& report) {
  const MarketModel m = cfg.model();
  std::optional<Reference> ref;
  if (cfg.payoff.dim == 1 && cfg.reference) ref = fd_reference(cfg);
  const LocalPolyDriver driver = cfg.local_poly_driver();
  const std::vector<BranchingTrial> runs =
      run_branching_trials(m, cfg.payoff, driver, cfg.branching(), cfg.seed, cfg.trials);

  const ValueSurface grid(Vector::Zero(1), cfg.space_axes());
  std::vector<Vector> nodes;
  for (Index j = 0; j < grid.num_nodes(); ++j) nodes.push_back(grid.node(j));

  std::vector<std::string> header{"trial", "seed", "status", "particles", "samples", "max_family"};
  for (const auto& c : coord_names(m.dim)) header.push_back(c);
  header.insert(header.end(), {"v", "std_error"});
  std::size_t completed = 0, capped = 0, overflowed = 0;
  Matrix values(static_cast<Index>(runs.size()), static_cast<Index>(nodes.size()));
  {
    CsvWriter w(dir / "trials.csv", header);
    for (std::size_t n = 0; n < runs.size(); ++n) {
      const BranchingTrial& t = runs[n];
      const std::string status = t.result ? "ok" : (t.failure == instability_error::Kind::ParticleCap ? "particle_cap" : "overflow");
      if (!t.result) {
        (t.failure == instability_error::Kind::ParticleCap ? capped : overflowed)++;
        w.row_strings({std::to_string(n), std::to_string(t.seed), status, "", "", ""});
        continue;
      }
      const BranchingResult& r = *t.result;
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        std::vector<std::string> row{std::to_string(n), std::to_string(t.seed), status,
                                     std::to_string(r.stats.particles), std::to_string(r.stats.samples),
                                     std::to_string(r.stats.max_family)};
        for (double c : coords(nodes[j])) row.push_back(format_double(c));
        row.push_back(format_double(r.surface.values()(0, static_cast<Index>(j))));
        row.push_back(format_double(r.surface.stderrs()(0, static_cast<Index>(j))));
        w.row_strings(row);
      }
      values.row(static_cast<Index>(completed++)) = r.surface.values().row(0);
    }
    out.files.push_back("trials.csv");
  }
  {
    CsvWriter w(dir / "timing.csv", {"trial", "seconds"});
    for (std::size_t n = 0; n < runs.size(); ++n) w.row({static_cast<double>(n), runs[n].seconds});
    out.files.push_back("timing.csv");
  }
  report["trials"] = {{"total", runs.size()}, {"completed", completed}, {"particle_cap", capped},
                      {"overflow", overflowed}};
  if (ref) report["reference"] = fd_provenance(cfg, ref->residual);

  if (completed > 0) {
    const Matrix done = values.topRows(static_cast<Index>(completed));
    const Vector mean = done.colwise().mean().transpose();
    Vector std = Vector::Zero(mean.size());
    if (completed > 1) {
      for (Index j = 0; j < std.size(); ++j) {
        std[j] = std::sqrt((done.col(j).array() - mean[j]).square().sum() / static_cast<double>(completed - 1));
      }
    }
    ValueSurface mean_surface(Vector::Zero(1), cfg.space_axes());
    mean_surface.values() = mean.transpose();
    mean_surface.stderrs() = std.transpose();
    write_surface_csv(mean_surface, (dir / "surface.csv").string());
    out.files.push_back("surface.csv");
    std::optional<Vector> ref_curve, ref_premium;
    if (ref) {
      ref_curve = curve_at(ref->american, 0, nodes);
      ref_premium = curve_at(ref->premium, 0, nodes);
    }
    write_curve(cfg, dir / "price_curve.csv", nodes, {{"mean", mean}, {"std", std}}, ref_curve, mean, out);
    if (m.dim == 1) {
      Vector eu(mean.size());
      for (Index j = 0; j < eu.size(); ++j) eu[j] = european_closed_form(m, cfg.payoff, cfg.maturity, nodes[static_cast<std::size_t>(j)][0]);
      const Vector premium = mean - eu;
      write_curve(cfg, dir / "premium.csv", nodes, {{"mean", premium}, {"std", std}}, ref_premium, premium, out);
    }
  }
  if (runs.size() >= 10) {
    const InstabilityMetrics im = instability_report(runs);
    CsvWriter w(dir / "instability.csv", [&] {
      auto h = coord_names(m.dim);
      h.insert(h.end(), {"mean", "std", "mean_std_error"});
      return h;
    }());
    for (std::size_t j = 0; j < im.nodes.size(); ++j) {
      std::vector<double> row = coords(im.nodes[j]);
      const auto jj = static_cast<Index>(j);
      row.insert(row.end(), {im.node_mean[jj], im.node_std[jj], im.node_mean_std_error[jj]});
      w.row(row);
    }
    out.files.push_back("instability.csv");
    report["instability"] = {{"capped_fraction", im.capped_fraction},
                             {"mean_particles_per_sample", im.mean_particles_per_sample},
                             {"max_family", im.max_family}};
  }
  out.notes.push_back(std::to_string(completed) + " of " + std::to_string(runs.size()) + " trials completed, " +
                      std::to_string(capped) + " hit the particle cap, " + std::to_string(overflowed) +
                      " overflowed");
  report["columns"] = {{"trials.csv", units_for(header)},
                       {"price_curve.csv", units_for({"x", "mean", "std", "ref", "rel_err"})},
                       {"instability.csv", units_for({"x", "mean", "std", "mean_std_error"})}};
}

}  // namespace

config_error::config_error(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

std::string to_string(Method m) {
  switch (m) {
    case Method::Fd: return "fd";
    case Method::Branching: return "branching";
    case Method::Randomized: return "randomized";
    case Method::EuropeanCf: return "european-cf";
  }
  return "?";
}

MarketModel ExperimentConfig::model() const { return MarketModel::constant(rate, sigma_bar); }

CashFlowSpec ExperimentConfig::cashflow_spec() const { return CashFlowSpec(payoff, model(), cashflow); }

std::vector<Vector> ExperimentConfig::space_axes() const {
  return std::vector<Vector>(static_cast<std::size_t>(payoff.dim), uniform_axis(x_min, x_max, points));
}

RandSchemeConfig ExperimentConfig::randomized() const {
  RandSchemeConfig c;
  c.maturity = maturity;
  c.fine_steps = fine_steps;
  c.update_every = update_every;
  c.space_axes = space_axes();
  c.tau_mean = tau_mean;
  c.eps_mean = eps_mean;
  c.paths = paths;
  c.trials = trials;
  return c;
}

BranchingConfig ExperimentConfig::branching() const {
  BranchingConfig c;
  c.maturity = maturity;
  c.tau_mean = branch_tau_mean;
  c.offspring_probs = offspring_probs;
  c.picard_iters = picard_iters;
  c.paths = paths;
  c.time_grid = uniform_axis(0.0, maturity, time_periods + 1);
  c.space_axes = space_axes();
  c.particle_cap = particle_cap;
  return c;
}

double ExperimentConfig::default_y_max() const { return payoff.strike * (1.0 - std::exp(-rate * maturity)); }

LocalPolyDriver ExperimentConfig::local_poly_driver() const {
  switch (branch_driver) {
    case BranchDriverKind::Zero: return LocalPolyDriver::zero();
    case BranchDriverKind::Constant:
      return LocalPolyDriver::constant(constant_value != 0.0 ? constant_value : rate * payoff.strike);
    case BranchDriverKind::Spline: break;
  }
  const ErfcDriver erfc{ExactDriver{cashflow_spec()}, kappa};
  return fit_local_poly_driver(erfc, y_max.value_or(default_y_max()), spline_cells, blend);
}

std::string ExperimentConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : raw) {
    if (k != "run.out") out += k + "=" + v + "\n";  // where results go is not part of the experiment
  }
  return out;
}

std::string ExperimentConfig::ini_text() const {
  std::string out, section;
  for (const auto& [k, v] : raw) {
    const auto dot = k.find('.');
    if (k.compare(0, dot, section) != 0 || section.size() != dot) {
      section = k.substr(0, dot);
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  std::string section;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + ": malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + ": expected key = value");
      continue;
    }
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      errors.push_back(where + ": unknown key '" + key + "'");
      continue;
    }
    if (cfg.raw.count(key)) {
      errors.push_back(where + ": duplicate key '" + key + "'");
      continue;
    }
    try {
      it->second(cfg, value);
      cfg.raw[key] = value;
    } catch (const std::exception& e) {
      errors.push_back(where + ": " + key + ": " + e.what());
    }
  }
  if (errors.empty()) errors = validate(cfg);
  if (!errors.empty()) throw config_error(errors);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  return parse_config(in);
}

void override_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw std::invalid_argument("unknown key '" + key + "'");
  it->second(cfg, value);
  cfg.raw[key] = value;
  const auto errors = validate(cfg);
  if (!errors.empty()) throw config_error(errors);
}

RunOutcome run_experiment_in(const ExperimentConfig& cfg, const fs::path& dir) {
  RunOutcome out;
  out.dir = dir;
  {
    std::ofstream f(dir / "config.ini");
    f << cfg.ini_text();
    out.files.push_back("config.ini");
  }
  json report = base_report(cfg);
  switch (cfg.method) {
    case Method::Fd: run_fd(cfg, dir, out, report); break;
    case Method::EuropeanCf: run_european_cf(cfg, dir, out, report); break;
    case Method::Randomized: run_randomized(cfg, dir, out, report); break;
    case Method::Branching: run_branching(cfg, dir, out, report); break;
  }
  write_report(dir, std::move(report), out);
  return out;
}

RunOutcome run_experiment(const ExperimentConfig& cfg) {
  const fs::path base = fs::path(cfg.out) / (cfg.hash() + "-" + timestamp_utc());
  fs::path dir = base;
  for (int k = 1; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  fs::create_directories(dir);
  return run_experiment_in(cfg, dir);
}

CompareSummary compare_surfaces(const ValueSurface& a, const ValueSurface& b, double cap, std::ostream& out) {
  if (a.dim() != b.dim()) throw std::invalid_argument("surfaces have different dimensions");
  CompareSummary sum;
  std::vector<std::string> header{"t"};
  for (const auto& c : coord_names(a.dim())) header.push_back(c);
  header.insert(header.end(), {"a", "b", "abs_err", "rel_err", "rel_err_capped"});
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (Index i = 0; i < a.num_times(); ++i) {
    const double t = a.times()[i];
    Index ib = -1;
    for (Index k = 0; k < b.num_times(); ++k) {
      if (std::abs(b.times()[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) ib = k;
    }
    if (ib < 0) continue;
    for (Index j = 0; j < a.num_nodes(); ++j) {
      const Vector x = a.node(j);
      const auto vb = b.interpolate(ib, x);
      if (!vb) continue;
      const double va = a.values()(i, j);
      const double abs_err = std::abs(va - *vb);
      const double rel = abs_err == 0.0 ? 0.0 : abs_err / std::abs(*vb);
      out << format_double(t);
      for (Index k = 0; k < x.size(); ++k) out << ',' << format_double(x[k]);
      out << ',' << format_double(va) << ',' << format_double(*vb) << ',' << format_double(abs_err) << ','
          << format_double(rel) << ',' << format_double(std::min(rel, cap)) << '\n';
      ++sum.rows;
      sum.max_abs_err = std::max(sum.max_abs_err, abs_err);
      sum.max_rel_err = std::max(sum.max_rel_err, rel);
    }
  }
  if (sum.rows == 0) throw std::invalid_argument("surfaces share no (time, node) overlap");
  return sum;
}

}  // namespace amopt
