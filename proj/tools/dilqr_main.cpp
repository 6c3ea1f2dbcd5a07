// Command-line front end: solve / simulate / verify.
//
// Exit codes: 0 success, 1 config error, 2 validation error,
//             3 solver error, 4 io error.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <locale>

#include "dilqr/artifacts.hpp"
#include "dilqr/config.hpp"
#include "dilqr/verify.hpp"

namespace fs = std::filesystem;
using namespace dilqr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

int fail(const char* category, const std::string& msg) {
  std::cerr << "error: " << category << ": " << msg << "\n";
  if (std::string(category) == "config") return kExitConfig;
  if (std::string(category) == "validation") return kExitValidation;
  if (std::string(category) == "solver") return kExitSolver;
  return kExitIo;
}

std::string output_dir(const Config& cfg) {
  if (cfg.has("output.dir")) return cfg.get("output.dir");
  if (const char* env = std::getenv("DILQR_OUTPUT_DIR")) return env;
  return ".";
}

Config load_config(const std::string& path,
                   const std::vector<std::string>& overrides) {
  Config cfg = Config::parse_file(path);
  for (const auto& ov : overrides) cfg.apply_override(ov);
  return cfg;
}

int cmd_solve(const std::string& config_path,
              const std::vector<std::string>& overrides) {
  Config cfg;
  ContinuousProblem pb;
  int K = 0;
  try {
    cfg = load_config(config_path, overrides);
    pb = problem_from_config(cfg);
    K = cfg.get_int("grid.K");
    build_grid(pb.t_f, pb.tau, K);  // grid errors are config errors
  } catch (const std::exception& e) {
    return fail("config", e.what());
  }

  auto vr = validate_problem(pb);
  if (!vr.ok) return fail("validation", vr.failures[0]);

  SolveResult res;
  try {
    res = solve(pb, K, {}, solver_options_from_config(cfg));
  } catch (const BackwardPassError& e) {
    return fail("solver", e.what());
  } catch (const std::exception& e) {
    return fail("solver", e.what());
  }

  try {
    const fs::path dir = output_dir(cfg);
    fs::create_directories(dir);
    artifacts::write_trajectory((dir / "trajectory.csv").string(),
                                res.policy.grid, res.trajectory);
    artifacts::write_gains((dir / "gains.txt").string(), res.policy);
    artifacts::write_iterations((dir / "iterations.csv").string(), res.reports);
    artifacts::write_summary((dir / "summary.txt").string(), res);
    artifacts::save_policy((dir / "policy.txt").string(), res.policy, pb.n,
                           pb.d);
  } catch (const std::exception& e) {
    return fail("io", e.what());
  }
  std::cout << "final_cost " << std::setprecision(17) << res.final_cost
            << " iterations " << res.reports.size() << " converged "
            << (res.converged ? 1 : 0) << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& policy_path,
                 const std::vector<std::string>& overrides) {
  Config cfg;
  ContinuousProblem pb;
  try {
    cfg = load_config(config_path, overrides);
    pb = problem_from_config(cfg);
  } catch (const std::exception& e) {
    return fail("config", e.what());
  }

  Policy pol;
  int n = 0, d = 0;
  try {
    pol = artifacts::load_policy(policy_path, &n, &d);
  } catch (const std::exception& e) {
    return fail("io", e.what());
  }
  if (n != pb.n || d != pb.d)
    return fail("validation", "policy dimensions do not match the problem");
  const int K = cfg.get_int_or("grid.K", pol.grid.K);
  if (K != pol.grid.K)
    return fail("validation", "policy horizon does not match grid.K");

  const int trials = cfg.get_int_or("simulation.trials", 1000);
  const auto seed =
      static_cast<uint64_t>(cfg.get_int_or("simulation.seed", 0));
  SimulationResult sim;
  try {
    sim = stochastic_simulate(pb, pol.grid, pol, trials, seed);
  } catch (const std::exception& e) {
    return fail("solver", e.what());
  }

  try {
    const fs::path dir = output_dir(cfg);
    fs::create_directories(dir);
    const bool terms = cfg.get_int_or("simulation.write_terminals", 0) != 0;
    artifacts::write_simulation_stats((dir / "simulation.txt").string(), sim,
                                      terms);
  } catch (const std::exception& e) {
    return fail("io", e.what());
  }
  std::cout << "mean_cost " << std::setprecision(17) << sim.mean_cost
            << " stderr " << sim.std_error << " divergent " << sim.divergent
            << "\n";
  return kExitOk;
}

int cmd_verify(unsigned seed, int instances, const std::string& report_path) {
  verify::Report rep;
  try {
    rep = verify::run_suite(seed, instances);
  } catch (const std::exception& e) {
    return fail("solver", e.what());
  }
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) return fail("io", "cannot write report: " + report_path);
    out.imbue(std::locale::classic());
    verify::write_report(out, rep);
  }
  verify::write_report(std::cout, rep);
  if (!rep.all_pass()) {
    std::cerr << "error: solver: oracle disagreement on seeds:";
    for (unsigned s : rep.failing_seeds()) std::cerr << " " << s;
    std::cerr << "\n";
    return kExitSolver;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delay-aware iterative LQR"};
  app.require_subcommand(1);

  std::string config_path, policy_path, report_path;
  std::vector<std::string> overrides;
  unsigned seed = 1;
  int instances = 50;

  auto* sc_solve = app.add_subcommand("solve", "optimize a configured problem");
  sc_solve->add_option("-c,--config", config_path, "config file")->required();
  sc_solve->add_option("--set", overrides,
                       "override a config field (section.key=value)");

  auto* sc_sim = app.add_subcommand("simulate", "Monte Carlo closed loop");
  sc_sim->add_option("-c,--config", config_path, "config file")->required();
  sc_sim->add_option("-p,--policy", policy_path, "policy artifact")->required();
  sc_sim->add_option("--set", overrides,
                     "override a config field (section.key=value)");

  auto* sc_verify = app.add_subcommand("verify", "oracle cross-check suite");
  sc_verify->add_option("--seed", seed, "base seed");
  sc_verify->add_option("--instances", instances, "instances per suite");
  sc_verify->add_option("--report", report_path, "write report to file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sc_solve->parsed()) return cmd_solve(config_path, overrides);
    if (sc_sim->parsed())
      return cmd_simulate(config_path, policy_path, overrides);
    return cmd_verify(seed, instances, report_path);
  } catch (const std::exception& e) {
    return fail("io", e.what());
  }
}
