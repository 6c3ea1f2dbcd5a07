#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dilqr/finite_diff.hpp"
#include "dilqr/problem.hpp"

namespace dilqr {

/// Equidistant grid with dt = t_f / K = tau / l.
struct TimeGrid {
  double dt = 0.0;
  int K = 0;  // number of steps
  int l = 0;  // delay in steps, >= 1 (l >= K allowed)
};

/// Nominal ("zero-noise") trajectory. xs has K+1 entries, us has K entries;
/// controls at negative indices are identically zero.
struct NominalTrajectory {
  std::vector<Vec> xs;
  std::vector<Vec> us;

  /// us[s], or zero for s < 0 (the u(s)=0 prefix on [-tau, 0)).
  Vec control_or_zero(int s, int d) const {
    if (s < 0) return Vec::Zero(d);
    return us.at(static_cast<size_t>(s));
  }
};

/// Linearized stage coefficients of the deviation dynamics
///   dx_{k+1} = A dx_k + B0 du_k + B1 du_{k-l} + C(du_k, du_{k-l}) xi_k.
struct LinearStage {
  Mat A;                // n x n
  Mat B0;               // n x d
  Mat B1;               // n x d
  std::vector<Vec> c;   // p vectors, n each
  std::vector<Mat> C0;  // p matrices, n x d
  std::vector<Mat> C1;  // p matrices, n x d
};

/// Quadratized stage cost
///   cost_k = d_tilde + 2 dx'd + dx'D dx + 2 du'e + du'E du.
struct QuadStage {
  double d_tilde = 0.0;
  Vec d_vec;
  Mat D;
  Vec e_vec;
  Mat E;
};

/// Builds the time grid; fails if tau is not an integer multiple of dt.
inline TimeGrid build_grid(double t_f, double tau, int K) {
  if (t_f <= 0.0 || tau <= 0.0 || K < 1)
    throw std::invalid_argument("build_grid: need t_f > 0, tau > 0, K >= 1");
  const double dt = t_f / K;
  const double ratio = tau / dt;
  const double l_rounded = std::round(ratio);
  if (std::abs(ratio - l_rounded) > 1e-9 || l_rounded < 1.0) {
    std::ostringstream msg;
    msg << "build_grid: delay not a multiple of sample period (tau/dt = "
        << ratio << ")";
    // suggest nearby K with an integer step delay
    for (double l : {std::max(1.0, std::floor(ratio)), std::ceil(ratio)}) {
      const double K_sugg = l * t_f / tau;
      if (std::abs(K_sugg - std::round(K_sugg)) <= 1e-9)
        msg << "; K=" << static_cast<long long>(std::round(K_sugg))
            << " gives l=" << static_cast<long long>(l);
    }
    throw std::invalid_argument(msg.str());
  }
  TimeGrid g;
  g.dt = dt;
  g.K = K;
  g.l = static_cast<int>(l_rounded);
  return g;
}

/// Euler rollout of the deterministic system under the given open-loop
/// controls, with the zero prefix for delayed controls.
inline NominalTrajectory rollout_nominal(const ContinuousProblem& pb,
                                         const TimeGrid& grid,
                                         const std::vector<Vec>& us) {
  if (static_cast<int>(us.size()) != grid.K)
    throw std::invalid_argument("rollout_nominal: need K control entries");
  NominalTrajectory traj;
  traj.us = us;
  traj.xs.resize(grid.K + 1);
  traj.xs[0] = pb.x0;
  for (int k = 0; k < grid.K; ++k) {
    const Vec ud = traj.control_or_zero(k - grid.l, pb.d);
    traj.xs[k + 1] = traj.xs[k] + grid.dt * eval_drift(pb, traj.xs[k], us[k], ud);
    if (!traj.xs[k + 1].allFinite())
      throw std::runtime_error("rollout_nominal: divergence at step " +
                               std::to_string(k));
  }
  return traj;
}

namespace detail {

inline Mat drift_jac(const ContinuousProblem& pb, const Vec& x, const Vec& u,
                     const Vec& ud, int which) {
  if (pb.analytic.has_drift()) {
    switch (which) {
      case 0: return pb.analytic.df_dx(x, u, ud);
      case 1: return pb.analytic.df_du0(x, u, ud);
      default: return pb.analytic.df_du1(x, u, ud);
    }
  }
  auto fn = [&](const Eigen::VectorXd& z) {
    switch (which) {
      case 0: return eval_drift(pb, z, u, ud);
      case 1: return eval_drift(pb, x, z, ud);
      default: return eval_drift(pb, x, u, z);
    }
  };
  const Vec& base = which == 0 ? x : (which == 1 ? u : ud);
  return numeric_jacobian(fn, base);
}

// p Jacobians of the diffusion columns w.r.t. u (which=0) or u_delayed (1).
inline std::vector<Mat> diffusion_jac(const ContinuousProblem& pb, const Vec& u,
                                      const Vec& ud, int which) {
  if (pb.analytic.has_diffusion())
    return which == 0 ? pb.analytic.dF_du0(u, ud) : pb.analytic.dF_du1(u, ud);
  std::vector<Mat> out(pb.p);
  for (int j = 0; j < pb.p; ++j) {
    auto fn = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
      return which == 0 ? eval_diffusion(pb, z, ud).col(j)
                        : eval_diffusion(pb, u, z).col(j);
    };
    out[j] = numeric_jacobian(fn, which == 0 ? u : ud);
  }
  return out;
}

}  // namespace detail

/// Scale applied to the control-dependent noise columns C^i_j.
/// AsPrinted uses dt; SqrtDtConsistent uses sqrt(dt), which makes the stage
/// noise an exact match for the Euler-Maruyama increment of an affine
/// diffusion. This is the single switch point for that scale policy.
enum class NoiseScale { AsPrinted, SqrtDtConsistent };

/// Linearizes dynamics at (xbar_k, ubar_k, ubar_{k-l}):
///   A = I + dt df/dx, Bi = dt df/dui,
///   c_j = sqrt(dt) F^(j), Ci_j = dt dF^(j)/dui.
inline LinearStage linearize_stage(const ContinuousProblem& pb,
                                   const TimeGrid& grid, int k,
                                   const NominalTrajectory& traj,
                                   NoiseScale scale = NoiseScale::AsPrinted) {
  if (k < 0 || k >= grid.K)
    throw std::invalid_argument("linearize_stage: k out of range");
  const Vec& x = traj.xs[k];
  const Vec& u = traj.us[k];
  const Vec ud = traj.control_or_zero(k - grid.l, pb.d);

  LinearStage st;
  st.A = Mat::Identity(pb.n, pb.n) + grid.dt * detail::drift_jac(pb, x, u, ud, 0);
  st.B0 = grid.dt * detail::drift_jac(pb, x, u, ud, 1);
  st.B1 = grid.dt * detail::drift_jac(pb, x, u, ud, 2);

  st.c.resize(pb.p);
  st.C0.resize(pb.p);
  st.C1.resize(pb.p);
  if (pb.p > 0) {
    const Mat F = eval_diffusion(pb, u, ud);
    const auto dF0 = detail::diffusion_jac(pb, u, ud, 0);
    const auto dF1 = detail::diffusion_jac(pb, u, ud, 1);
    const double sqrt_dt = std::sqrt(grid.dt);
    const double c_scale = scale == NoiseScale::AsPrinted ? grid.dt : sqrt_dt;
    for (int j = 0; j < pb.p; ++j) {
      st.c[j] = sqrt_dt * F.col(j);
      st.C0[j] = c_scale * dF0[j];
      st.C1[j] = c_scale * dF1[j];
    }
  }
  if (!st.A.allFinite() || !st.B0.allFinite() || !st.B1.allFinite())
    throw std::runtime_error("linearize_stage: non-finite coefficients at step " +
                             std::to_string(k));
  return st;
}

/// Conditional covariance of the stage noise C_k(du, du_delayed) xi_k:
/// the PSD sum of p rank-one outer products.
inline Mat stage_noise_covariance(const LinearStage& st, const Vec& du,
                                  const Vec& du_delayed) {
  const auto n = st.A.rows();
  Mat cov = Mat::Zero(n, n);
  for (size_t j = 0; j < st.c.size(); ++j) {
    const Vec w = st.c[j] + st.C0[j] * du + st.C1[j] * du_delayed;
    cov += w * w.transpose();
  }
  return cov;
}

/// Quadratizes the cost at step k (terminal form at k = K).
inline QuadStage quadratize_stage(const ContinuousProblem& pb,
                                  const TimeGrid& grid, int k,
                                  const NominalTrajectory& traj) {
  if (k < 0 || k > grid.K)
    throw std::invalid_argument("quadratize_stage: k out of range");
  QuadStage q;
  if (k == grid.K) {
    const Vec err = traj.xs[grid.K] - pb.x_target;
    q.d_tilde = err.dot(pb.P_tf * err);
    q.d_vec = pb.P_tf * err;
    q.D = pb.P_tf;
    q.e_vec = Vec::Zero(pb.d);
    q.E = Mat::Zero(pb.d, pb.d);
    return q;
  }
  const double t = k * grid.dt;
  const Mat P = pb.P_of_t(t);
  const Mat Q = pb.Q_of_t(t);
  const Vec& x = traj.xs[k];
  const Vec& u = traj.us[k];
  q.d_tilde = grid.dt * (x.dot(P * x) + u.dot(Q * u));
  q.d_vec = grid.dt * (P * x);
  q.D = grid.dt * P;
  q.e_vec = grid.dt * (Q * u);
  q.E = grid.dt * Q;
  return q;
}

/// Linearizes and quadratizes every stage in one pass.
struct StageApproximation {
  std::vector<LinearStage> stages;  // k = 0 .. K-1
  std::vector<QuadStage> quads;     // k = 0 .. K
};

inline StageApproximation approximate_all(
    const ContinuousProblem& pb, const TimeGrid& grid,
    const NominalTrajectory& traj, NoiseScale scale = NoiseScale::AsPrinted) {
  StageApproximation out;
  out.stages.reserve(grid.K);
  out.quads.reserve(grid.K + 1);
  for (int k = 0; k < grid.K; ++k)
    out.stages.push_back(linearize_stage(pb, grid, k, traj, scale));
  for (int k = 0; k <= grid.K; ++k)
    out.quads.push_back(quadratize_stage(pb, grid, k, traj));
  return out;
}

}  // namespace dilqr
