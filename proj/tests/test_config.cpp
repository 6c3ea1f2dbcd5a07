#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dilqr/artifacts.hpp"
#include "dilqr/config.hpp"

using namespace dilqr;

TEST_CASE("config parse, sections, comments, overrides") {
  std::istringstream in(
      "# comment line\n"
      "[grid]\n"
      "K = 50\n"
      "t_f = 0.5  # trailing comment\n"
      "tau = 0.1\n"
      "\n"
      "[problem]\n"
      "model = reach\n"
      "sigma = 0.2\n");
  Config cfg = Config::parse(in);
  CHECK(cfg.get_int("grid.K") == 50);
  CHECK(cfg.get_double("grid.t_f") == 0.5);
  CHECK(cfg.get("problem.model") == "reach");
  CHECK(cfg.get_double_or("problem.missing", 7.0) == 7.0);
  CHECK_FALSE(cfg.has("problem.missing"));

  cfg.apply_override("grid.K=25");
  CHECK(cfg.get_int("grid.K") == 25);
  cfg.apply_override("solver.max_iterations = 3");
  CHECK(cfg.get_int("solver.max_iterations") == 3);
  CHECK_THROWS_AS(cfg.apply_override("no-equals-sign"), ConfigError);
  CHECK_THROWS_AS(cfg.get("grid.nope"), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("problem.model"), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("problem.model"), ConfigError);
}

TEST_CASE("config parse rejects malformed lines") {
  {
    std::istringstream in("[grid\nK = 5\n");
    CHECK_THROWS_AS(Config::parse(in), ConfigError);
  }
  {
    std::istringstream in("[grid]\njust a bare token\n");
    CHECK_THROWS_AS(Config::parse(in), ConfigError);
  }
}

TEST_CASE("config matrix and vector literals") {
  Config cfg;
  cfg.set("m", "1 2; 3 4");
  Mat M = cfg.get_matrix("m");
  REQUIRE(M.rows() == 2);
  CHECK(M(0, 1) == 2.0);
  CHECK(M(1, 0) == 3.0);
  cfg.set("v", "1 2 3");
  Vec v = cfg.get_vector("v");
  REQUIRE(v.size() == 3);
  CHECK(v[2] == 3.0);
  cfg.set("vc", "1; 2; 3");
  CHECK(cfg.get_vector("vc")[1] == 2.0);
  cfg.set("ragged", "1 2; 3");
  CHECK_THROWS_AS(cfg.get_matrix("ragged"), ConfigError);
  cfg.set("notvec", "1 2; 3 4");
  CHECK_THROWS_AS(cfg.get_vector("notvec"), ConfigError);
}

TEST_CASE("config serialize / parse round trip") {
  Config cfg;
  cfg.set("grid.K", "50");
  cfg.set("grid.t_f", "0.5");
  cfg.set("problem.model", "reach");
  cfg.set("problem.sigma", "0.2");
  std::ostringstream out;
  cfg.serialize(out);
  std::istringstream back(out.str());
  Config cfg2 = Config::parse(back);
  CHECK(cfg == cfg2);
}

TEST_CASE("problem_from_config builds each model") {
  {
    Config cfg;
    cfg.set("problem.model", "reach");
    cfg.set("grid.t_f", "0.5");
    cfg.set("grid.tau", "0.1");
    cfg.set("problem.sigma", "0.3");
    auto pb = problem_from_config(cfg);
    CHECK(pb.n == 2);
    CHECK(pb.p == 1);
    CHECK(pb.tau == 0.1);
    CHECK(validate_problem(pb).ok);
  }
  {
    Config cfg;
    cfg.set("problem.model", "sinusoid");
    cfg.set("grid.t_f", "1.0");
    cfg.set("grid.tau", "0.2");
    auto pb = problem_from_config(cfg);
    CHECK(pb.p == 0);
    CHECK(validate_problem(pb).ok);
  }
  {
    Config cfg;
    cfg.set("problem.model", "linear");
    cfg.set("grid.t_f", "1.0");
    cfg.set("grid.tau", "0.2");
    cfg.set("problem.A", "0 1; -1 -0.5");
    cfg.set("problem.B0", "0; 1");
    cfg.set("problem.B1", "0; 0.5");
    cfg.set("problem.x0", "1 0");
    cfg.set("problem.x_target", "0 0");
    cfg.set("problem.P_tf", "1 0; 0 1");
    cfg.set("problem.Q", "0.1");
    auto pb = problem_from_config(cfg);
    CHECK(pb.n == 2);
    CHECK(pb.d == 1);
    CHECK(pb.p == 0);
    CHECK(validate_problem(pb).ok);
  }
  {
    Config cfg;
    cfg.set("problem.model", "hovercraft");
    cfg.set("grid.t_f", "1.0");
    cfg.set("grid.tau", "0.2");
    CHECK_THROWS_AS(problem_from_config(cfg), ConfigError);
  }
  {
    Config cfg;
    cfg.set("problem.model", "reach");
    cfg.set("grid.t_f", "0.5");
    cfg.set("grid.tau", "0.1");
    cfg.set("problem.m", "-1");
    CHECK_THROWS_AS(problem_from_config(cfg), ConfigError);
  }
}

TEST_CASE("solver options from config") {
  Config cfg;
  CHECK(solver_options_from_config(cfg).max_iterations == 100);
  cfg.set("solver.max_iterations", "7");
  cfg.set("solver.cost_tol", "1e-4");
  auto opts = solver_options_from_config(cfg);
  CHECK(opts.max_iterations == 7);
  CHECK(opts.cost_tol == 1e-4);
  CHECK(opts.grad_tol == 1e-8);
}

TEST_CASE("policy artifact save / load round trip") {
  auto pb = models::make_reach_model();
  auto res = solve(pb, 15);
  const std::string path = "test_policy_roundtrip.txt";
  artifacts::save_policy(path, res.policy, pb.n, pb.d);
  int n = 0, d = 0;
  Policy loaded = artifacts::load_policy(path, &n, &d);
  CHECK(n == pb.n);
  CHECK(d == pb.d);
  CHECK(loaded.grid.K == res.policy.grid.K);
  CHECK(loaded.grid.l == res.policy.grid.l);
  CHECK(loaded.grid.dt == res.policy.grid.dt);
  for (int k = 0; k < loaded.grid.K; ++k) {
    CHECK(loaded.gains[k].iota == res.policy.gains[k].iota);
    CHECK(loaded.gains[k].L == res.policy.gains[k].L);
    REQUIRE(loaded.gains[k].M.size() == res.policy.gains[k].M.size());
    for (size_t i = 0; i < loaded.gains[k].M.size(); ++i)
      CHECK(loaded.gains[k].M[i] == res.policy.gains[k].M[i]);
    CHECK(loaded.nominal.us[k] == res.policy.nominal.us[k]);
  }
  for (int k = 0; k <= loaded.grid.K; ++k)
    CHECK(loaded.nominal.xs[k] == res.policy.nominal.xs[k]);

  // the reloaded policy reproduces the deterministic rollout bit-for-bit
  auto grid = build_grid(pb.t_f, pb.tau, 15);
  auto [t1, c1] = closed_loop_rollout(pb, grid, res.policy, 1.0);
  auto [t2, c2] = closed_loop_rollout(pb, grid, loaded, 1.0);
  CHECK(c1 == c2);
  std::remove(path.c_str());
}

TEST_CASE("policy artifact rejects junk") {
  const std::string path = "test_policy_junk.txt";
  {
    std::ofstream out(path);
    out << "not-a-policy 9\n";
  }
  CHECK_THROWS_AS(artifacts::load_policy(path), artifacts::IoError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(artifacts::load_policy("does_not_exist.txt"),
                  artifacts::IoError);
}

TEST_CASE("trajectory and iteration artifacts are well formed") {
  auto pb = models::make_sinusoid_model();
  auto res = solve(pb, 10);
  auto grid = build_grid(pb.t_f, pb.tau, 10);
  {
    const std::string path = "test_traj.csv";
    artifacts::write_trajectory(path, grid, res.trajectory);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x0,x1,u0");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == grid.K + 1);
    std::remove(path.c_str());
  }
  {
    const std::string path = "test_iters.csv";
    artifacts::write_iterations(path, res.reports);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "iteration,cost,alpha,grad_norm,converged");
    std::remove(path.c_str());
  }
  {
    const std::string path = "test_summary.txt";
    artifacts::write_summary(path, res);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("final_cost") != std::string::npos);
    CHECK(ss.str().find("converged 1") != std::string::npos);
    std::remove(path.c_str());
  }
}
