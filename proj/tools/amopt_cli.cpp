#include "amopt/experiment.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace {

int run_command(const std::string& config_path, bool validate_only, const std::optional<std::uint64_t>& seed,
                const std::optional<std::size_t>& trials, const std::optional<std::string>& out) {
  amopt::ExperimentConfig cfg = amopt::load_config(config_path);
  if (seed) amopt::override_key(cfg, "run.seed", std::to_string(*seed));
  if (trials) amopt::override_key(cfg, "run.trials", std::to_string(*trials));
  if (out) amopt::override_key(cfg, "run.out", *out);
  if (validate_only) {
    std::cout << config_path << ": ok (hash " << cfg.hash() << ")\n";
    return 0;
  }
  const amopt::RunOutcome res = amopt::run_experiment(cfg);
  std::cout << "wrote " << res.dir.string() << "\n";
  for (const auto& f : res.files) std::cout << "  " << f << "\n";
  for (const auto& n : res.notes) std::cout << n << "\n";
  return 0;
}

int compare_command(const std::string& a_path, const std::string& b_path, double cap,
                    const std::optional<std::string>& out) {
  const amopt::ValueSurface a = amopt::read_surface_csv(a_path);
  const amopt::ValueSurface b = amopt::read_surface_csv(b_path);
  amopt::CompareSummary sum;
  if (out) {
    std::ofstream f(*out);
    if (!f) throw std::runtime_error("cannot write " + *out);
    sum = amopt::compare_surfaces(a, b, cap, f);
  } else {
    sum = amopt::compare_surfaces(a, b, cap, std::cout);
  }
  std::cerr << sum.rows << " nodes compared, max abs error " << amopt::format_double(sum.max_abs_err)
            << ", max rel error " << amopt::format_double(sum.max_rel_err) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"American option pricing experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment config");
  std::string config_path;
  bool validate_only = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> out;
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_flag("--validate-only", validate_only, "check the config and exit");
  run->add_option("--seed", seed, "root seed override");
  run->add_option("--trials", trials, "trial count override");
  run->add_option("--out", out, "output directory override");

  auto* cmp = app.add_subcommand("compare", "error statistics of surface A against surface B");
  std::string a_path, b_path;
  double cap = 0.10;
  std::optional<std::string> cmp_out;
  cmp->add_option("A", a_path, "surface CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("B", b_path, "reference surface CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--cap", cap, "relative error cap");
  cmp->add_option("--out", cmp_out, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return run_command(config_path, validate_only, seed, trials, out);
    return compare_command(a_path, b_path, cap, cmp_out);
  } catch (const amopt::config_error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
