#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <random>
#include <thread>
#include <vector>

#include "dilqr/backward_pass.hpp"

namespace dilqr {

struct SolveOptions {
  int max_iterations = 100;
  double cost_tol = 1e-6;      // relative cost change
  double grad_tol = 1e-8;      // max-abs feedforward offset
  int line_search_steps = 11;  // alpha in {1, 1/2, ..., 2^-10}
  // relative improvement a step must beat to be accepted; 0 accepts any
  // strict decrease (useful when polishing offsets below the default margin)
  double line_search_margin = 1e-12;
};

struct IterationReport {
  int iteration = 0;
  double cost = 0.0;
  double step_alpha = 0.0;  // 0 marks a non-improving / terminal record
  double grad_norm = 0.0;   // max-abs iota over all steps
  bool converged = false;
  std::string reason;
};

/// Riemann-sum cost of a trajectory on the true problem.
inline double trajectory_cost(const ContinuousProblem& pb, const TimeGrid& grid,
                              const NominalTrajectory& traj) {
  double cost = 0.0;
  for (int k = 0; k < grid.K; ++k) {
    const double t = k * grid.dt;
    cost += grid.dt * (traj.xs[k].dot(pb.P_of_t(t) * traj.xs[k]) +
                       traj.us[k].dot(pb.Q_of_t(t) * traj.us[k]));
  }
  const Vec err = traj.xs[grid.K] - pb.x_target;
  cost += err.dot(pb.P_tf * err);
  return cost;
}

/// Applies the delay-tap policy to the deterministic nonlinear system:
///   u_k = ubar_k + alpha*iota_k + L_k dx_k + sum_i M_k^i du_{k+i-l}.
/// Only the feedforward offset is scaled by alpha. Divergence is reported
/// as infinite cost.
inline std::pair<NominalTrajectory, double> closed_loop_rollout(
    const ContinuousProblem& pb, const TimeGrid& grid, const Policy& policy,
    double alpha) {
  const int K = grid.K;
  const int l = grid.l;
  NominalTrajectory traj;
  traj.xs.resize(K + 1);
  traj.us.resize(K);
  traj.xs[0] = pb.x0;
  std::vector<Vec> du(K);  // control deviation history
  for (int k = 0; k < K; ++k) {
    const StageGains& g = policy.gains[k];
    Vec u = policy.nominal.us[k] + alpha * g.iota +
            g.L * (traj.xs[k] - policy.nominal.xs[k]);
    for (size_t i = 0; i < g.M.size(); ++i) {
      const int idx = k + static_cast<int>(i) - l;
      if (idx >= 0) u += g.M[i] * du[idx];
    }
    du[k] = u - policy.nominal.us[k];
    traj.us[k] = u;
    const Vec ud = traj.control_or_zero(k - l, pb.d);
    traj.xs[k + 1] = traj.xs[k] + grid.dt * eval_drift(pb, traj.xs[k], u, ud);
    if (!traj.xs[k + 1].allFinite())
      return {std::move(traj), std::numeric_limits<double>::infinity()};
  }
  return {std::move(traj), trajectory_cost(pb, grid, traj)};
}

struct LineSearchResult {
  NominalTrajectory traj;
  double cost = 0.0;
  double alpha = 0.0;  // 0 when no step improved
  bool improved = false;
};

/// Backtracking on the feedforward scale: first alpha in {1, 1/2, ...}
/// whose rollout beats cost_prev by the acceptance margin wins.
inline LineSearchResult line_search(const ContinuousProblem& pb,
                                    const TimeGrid& grid, const Policy& policy,
                                    double cost_prev,
                                    const SolveOptions& opts = {}) {
  double alpha = 1.0;
  for (int i = 0; i < opts.line_search_steps; ++i, alpha *= 0.5) {
    auto [traj, cost] = closed_loop_rollout(pb, grid, policy, alpha);
    if (cost < cost_prev - opts.line_search_margin * std::abs(cost_prev))
      return {std::move(traj), cost, alpha, true};
  }
  LineSearchResult res;
  res.traj = policy.nominal;
  res.cost = cost_prev;
  return res;
}

struct SolveResult {
  Policy policy;
  NominalTrajectory trajectory;
  std::vector<IterationReport> reports;
  bool converged = false;
  std::string reason;
  double final_cost = 0.0;
};

/// Outer iLQR loop: rollout, local LQG approximation, delay-aware backward
/// pass, line search, re-root, until the cost stalls or the offsets vanish.
inline SolveResult solve(const ContinuousProblem& pb, int K,
                         const std::vector<Vec>& init_controls = {},
                         const SolveOptions& opts = {}) {
  auto vr = validate_problem(pb);
  if (!vr.ok)
    throw std::invalid_argument("solve: invalid problem: " + vr.failures[0]);
  const TimeGrid grid = build_grid(pb.t_f, pb.tau, K);

  std::vector<Vec> us = init_controls;
  if (us.empty()) us.assign(K, Vec::Zero(pb.d));
  if (static_cast<int>(us.size()) != K)
    throw std::invalid_argument("solve: init_controls must have K entries");

  SolveResult res;
  NominalTrajectory traj = rollout_nominal(pb, grid, us);
  double cost = trajectory_cost(pb, grid, traj);
  int stall = 0;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    auto approx = approximate_all(pb, grid, traj);
    Policy pol = run_backward(approx.stages, approx.quads, grid);
    pol.nominal = traj;

    double grad = 0.0;
    for (const auto& g : pol.gains)
      grad = std::max(grad, g.iota.lpNorm<Eigen::Infinity>());

    IterationReport rep;
    rep.iteration = it;
    rep.grad_norm = grad;

    if (grad <= opts.grad_tol) {
      rep.cost = cost;
      rep.converged = true;
      rep.reason = "offset norm below tolerance";
      res.reports.push_back(rep);
      res.policy = std::move(pol);
      res.trajectory = traj;
      res.converged = true;
      res.reason = rep.reason;
      res.final_cost = cost;
      return res;
    }

    auto ls = line_search(pb, grid, pol, cost, opts);
    rep.cost = ls.cost;
    rep.step_alpha = ls.alpha;

    if (!ls.improved) {
      rep.converged = true;
      rep.reason = "no line-search improvement";
      res.reports.push_back(rep);
      res.policy = std::move(pol);
      res.trajectory = traj;
      res.converged = true;
      res.reason = rep.reason;
      res.final_cost = cost;
      return res;
    }

    const double dcost = std::abs(cost - ls.cost);
    stall = dcost <= opts.cost_tol * std::max(1.0, std::abs(ls.cost)) ? stall + 1
                                                                      : 0;
    traj = std::move(ls.traj);
    cost = ls.cost;

    if (stall >= 2) {
      rep.converged = true;
      rep.reason = "cost change below tolerance";
      res.reports.push_back(rep);
      // re-root the returned policy at the final trajectory
      auto fa = approximate_all(pb, grid, traj);
      res.policy = run_backward(fa.stages, fa.quads, grid);
      res.policy.nominal = traj;
      res.trajectory = traj;
      res.converged = true;
      res.reason = rep.reason;
      res.final_cost = cost;
      return res;
    }
    res.reports.push_back(rep);
  }

  // iteration cap: return the policy re-rooted at the last trajectory
  auto fa = approximate_all(pb, grid, traj);
  res.policy = run_backward(fa.stages, fa.quads, grid);
  res.policy.nominal = traj;
  res.trajectory = traj;
  res.converged = false;
  res.reason = "iteration cap reached";
  res.final_cost = cost;
  return res;
}

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

struct SimulationResult {
  double mean_cost = 0.0;
  double std_error = 0.0;
  int divergent = 0;
  std::vector<double> costs;        // per finished trial, trial order
  std::vector<Vec> terminal_states; // per finished trial
};

/// Euler-Maruyama closed-loop simulation:
///   x_{k+1} = x_k + dt f + sqrt(dt) F(u_k, u_{k-l}) xi_k, xi ~ N(0, I_p).
/// Each trial draws from a stream derived from (seed, trial), so results are
/// independent of thread scheduling. Divergent trials are excluded from the
/// mean and counted.
inline SimulationResult stochastic_simulate(const ContinuousProblem& pb,
                                            const TimeGrid& grid,
                                            const Policy& policy, int trials,
                                            uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("stochastic_simulate: trials >= 1");
  const int K = grid.K;
  const int l = grid.l;
  const double sqrt_dt = std::sqrt(grid.dt);

  std::vector<double> costs(trials, std::numeric_limits<double>::quiet_NaN());
  std::vector<Vec> terminals(trials);

  auto run_trial = [&](int trial) {
    std::mt19937_64 rng(detail::splitmix64(seed ^ (0x51ED2701ULL + trial)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec x = pb.x0;
    std::vector<Vec> du(K);
    std::vector<Vec> applied(K);
    double cost = 0.0;
    for (int k = 0; k < K; ++k) {
      const StageGains& g = policy.gains[k];
      Vec u = policy.nominal.us[k] + g.iota + g.L * (x - policy.nominal.xs[k]);
      for (size_t i = 0; i < g.M.size(); ++i) {
        const int idx = k + static_cast<int>(i) - l;
        if (idx >= 0) u += g.M[i] * du[idx];
      }
      du[k] = u - policy.nominal.us[k];
      applied[k] = u;
      const Vec ud = k - l >= 0 ? applied[k - l] : Vec::Zero(pb.d);
      const double t = k * grid.dt;
      cost += grid.dt *
              (x.dot(pb.P_of_t(t) * x) + u.dot(pb.Q_of_t(t) * u));
      Vec xn = x + grid.dt * eval_drift(pb, x, u, ud);
      if (pb.p > 0) {
        const Mat F = eval_diffusion(pb, u, ud);
        Vec xi(pb.p);
        for (int j = 0; j < pb.p; ++j) xi[j] = gauss(rng);
        xn += sqrt_dt * (F * xi);
      }
      x = xn;
      if (!x.allFinite()) return;  // divergent, cost stays NaN
    }
    const Vec err = x - pb.x_target;
    cost += err.dot(pb.P_tf * err);
    costs[trial] = cost;
    terminals[trial] = x;
  };

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int workers = std::max(1, std::min(hw, trials));
  if (workers == 1 || trials < 64) {
    for (int t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int t = w; t < trials; t += workers) run_trial(t);
      });
    for (auto& th : pool) th.join();
  }

  SimulationResult res;
  for (int t = 0; t < trials; ++t) {
    if (std::isnan(costs[t])) {
      ++res.divergent;
      continue;
    }
    res.costs.push_back(costs[t]);
    res.terminal_states.push_back(terminals[t]);
  }
  const auto m = res.costs.size();
  if (m == 0) return res;
  double sum = 0.0;
  for (double c : res.costs) sum += c;
  res.mean_cost = sum / static_cast<double>(m);
  // identical samples (e.g. p = 0) must report exactly zero spread, without
  // picking up rounding noise from the mean
  bool all_equal = true;
  for (double c : res.costs) all_equal = all_equal && c == res.costs[0];
  if (m > 1 && !all_equal) {
    double ss = 0.0;
    for (double c : res.costs) ss += (c - res.mean_cost) * (c - res.mean_cost);
    res.std_error = std::sqrt(ss / static_cast<double>(m - 1) /
                           static_cast<double>(m));
  }
  return res;
}

}  // namespace dilqr
