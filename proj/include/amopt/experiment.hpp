#pragma once

#include "amopt/branch_poly.hpp"
#include "amopt/pde_ref.hpp"
#include "amopt/rand_driver.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace amopt {

/// Every problem found while reading a config, in file order.
class config_error : public std::runtime_error {
 public:
  explicit config_error(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

enum class Method { Fd, Branching, Randomized, EuropeanCf };
std::string to_string(Method m);

enum class BranchDriverKind { Spline, Constant, Zero };

struct ExperimentConfig {
  // [model]
  double rate = 0.06;
  Index dim = 1;
  Matrix sigma_bar = Matrix::Constant(1, 1, 0.2);
  double maturity = 1.0;
  // [payoff]
  PayoffSpec payoff = PayoffSpec::put(25.0);
  CashFlowRule cashflow = CashFlowRule::Example;
  // [run]
  Method method = Method::Randomized;
  std::uint64_t seed = 1;
  std::size_t trials = 50;
  std::size_t paths = 10000;
  std::string out = "runs";
  // [grid]: price / iterate grid, one axis per dimension
  double x_min = 5.0;
  double x_max = 50.0;
  Index points = 40;
  Index fine_steps = 100;
  Index update_every = 10;
  Index time_periods = 10;
  // [randomized]
  double tau_mean = 0.6;
  double eps_mean = 1e-100;
  // [branching]
  BranchDriverKind branch_driver = BranchDriverKind::Spline;
  double branch_tau_mean = 0.6;
  double kappa = 10.0;
  Index spline_cells = 20;
  std::optional<double> y_max;  // default K (1 - e^{-rT})
  double blend = 0.5;
  double constant_value = 0.0;  // for branch_driver = constant; 0 means r K
  std::vector<double> offspring_probs;
  int picard_iters = 3;
  std::size_t particle_cap = 1'000'000;
  // [fd] reference solver, also the method = fd grid
  FDGrid fd;
  bool reference = true;  // d = 1: attach an FD reference to MC runs
  // [report]
  std::vector<double> caps{0.10, 0.40};
  bool full_surface = false;  // all time slices instead of t = 0 only

  /// Canonical "section.key=value" lines, sorted, as read from the file.
  std::map<std::string, std::string> raw;

  MarketModel model() const;
  CashFlowSpec cashflow_spec() const;
  std::vector<Vector> space_axes() const;
  RandSchemeConfig randomized() const;
  BranchingConfig branching() const;
  LocalPolyDriver local_poly_driver() const;
  double default_y_max() const;

  /// FNV-1a 64 of the canonical text, as 16 hex digits. run.out is left out.
  std::string hash() const;
  std::string canonical_text() const;
  /// The same settings in the [section] key = value form parse_config reads.
  std::string ini_text() const;
};

/// Parses the flat [section] key = value format. Unknown keys, malformed
/// values and violated invariants are all collected into one config_error.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Re-applies a command-line override, keeping `raw` (and so the hash) in sync.
void override_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct RunOutcome {
  std::filesystem::path dir;
  std::vector<std::string> files;
  std::vector<std::string> notes;  // human-readable summary lines
};

/// Runs the configured method and writes the report files into
/// <out>/<hash>-<UTC timestamp>/.
RunOutcome run_experiment(const ExperimentConfig& cfg);

/// Writes the report files into an existing directory.
RunOutcome run_experiment_in(const ExperimentConfig& cfg, const std::filesystem::path& dir);

struct CompareSummary {
  std::size_t rows = 0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
};

/// Error of A against B, B being linearly interpolated onto A's nodes at the
/// times the two surfaces share. Columns t, x.., a, b, abs_err, rel_err,
/// rel_err_capped. Throws std::invalid_argument when no node overlaps.
CompareSummary compare_surfaces(const ValueSurface& a, const ValueSurface& b, double cap, std::ostream& out);

}  // namespace amopt
