#pragma once

#include <cmath>
#include <vector>

#include "dilqr/problem.hpp"

namespace dilqr {
namespace models {

/// 1D point-mass reaching with delayed actuation:
///   state (position, velocity), f = (v, (u_delayed - b v) / m),
///   single noise column F = (0, sigma * u_delayed / m) -- signal-dependent
///   noise on the delayed control channel (exercises the B1/C1 pathway).
struct ReachParams {
  double m = 1.0;      // mass, > 0
  double b = 0.1;      // viscous friction, >= 0
  double sigma = 0.2;  // noise scale on delayed actuation, >= 0
  double target = 0.1;
  double q = 1e-3;     // control effort weight
  double w_pos = 1.0;  // terminal position weight
  double w_vel = 0.1;  // terminal velocity weight
  double tau = 0.1;
  double t_f = 0.5;
};

inline ContinuousProblem make_reach_model(const ReachParams& prm = {}) {
  ContinuousProblem pb;
  pb.n = 2;
  pb.d = 1;
  pb.p = prm.sigma > 0.0 ? 1 : 0;
  const double m = prm.m, b = prm.b, sigma = prm.sigma;
  pb.drift = [m, b](const Vec& x, const Vec&, const Vec& ud) {
    Vec f(2);
    f << x[1], (ud[0] - b * x[1]) / m;
    return f;
  };
  if (pb.p > 0) {
    pb.diffusion = [m, sigma](const Vec&, const Vec& ud) {
      Mat F(2, 1);
      F << 0.0, sigma * ud[0] / m;
      return F;
    };
  }
  pb.analytic.df_dx = [m, b](const Vec&, const Vec&, const Vec&) {
    Mat J(2, 2);
    J << 0, 1, 0, -b / m;
    return J;
  };
  pb.analytic.df_du0 = [](const Vec&, const Vec&, const Vec&) {
    return Mat::Zero(2, 1);
  };
  pb.analytic.df_du1 = [m](const Vec&, const Vec&, const Vec&) {
    Mat J(2, 1);
    J << 0, 1.0 / m;
    return J;
  };
  if (pb.p > 0) {
    pb.analytic.dF_du0 = [](const Vec&, const Vec&) {
      return std::vector<Mat>{Mat::Zero(2, 1)};
    };
    pb.analytic.dF_du1 = [m, sigma](const Vec&, const Vec&) {
      Mat J(2, 1);
      J << 0, sigma / m;
      return std::vector<Mat>{J};
    };
  }
  pb.tau = prm.tau;
  pb.t_f = prm.t_f;
  pb.x0 = Vec::Zero(2);
  pb.x_target = (Vec(2) << prm.target, 0.0).finished();
  pb.P_tf = (Mat(2, 2) << prm.w_pos, 0, 0, prm.w_vel).finished();
  pb.P_of_t = [](double) { return Mat::Zero(2, 2); };
  pb.Q_of_t = [q = prm.q](double) { return q * Mat::Identity(1, 1); };
  return pb;
}

/// Pendulum-like nonlinear toy with sinusoidal drift and delayed torque:
///   f = (v, u_delayed - a sin(pos) - b v).
struct SinusoidParams {
  double a = 2.0;
  double b = 0.3;
  double target = 1.0;  // target angle [rad]
  double q = 1e-2;
  double tau = 0.1;
  double t_f = 1.0;
};

inline ContinuousProblem make_sinusoid_model(const SinusoidParams& prm = {}) {
  ContinuousProblem pb;
  pb.n = 2;
  pb.d = 1;
  pb.p = 0;
  const double a = prm.a, b = prm.b;
  pb.drift = [a, b](const Vec& x, const Vec&, const Vec& ud) {
    Vec f(2);
    f << x[1], ud[0] - a * std::sin(x[0]) - b * x[1];
    return f;
  };
  pb.analytic.df_dx = [a, b](const Vec& x, const Vec&, const Vec&) {
    Mat J(2, 2);
    J << 0, 1, -a * std::cos(x[0]), -b;
    return J;
  };
  pb.analytic.df_du0 = [](const Vec&, const Vec&, const Vec&) {
    return Mat::Zero(2, 1);
  };
  pb.analytic.df_du1 = [](const Vec&, const Vec&, const Vec&) {
    Mat J(2, 1);
    J << 0, 1;
    return J;
  };
  pb.tau = prm.tau;
  pb.t_f = prm.t_f;
  pb.x0 = Vec::Zero(2);
  pb.x_target = (Vec(2) << prm.target, 0.0).finished();
  pb.P_tf = (Mat(2, 2) << 5.0, 0, 0, 0.5).finished();
  pb.P_of_t = [](double) { return Mat::Zero(2, 2); };
  pb.Q_of_t = [q = prm.q](double) { return q * Mat::Identity(1, 1); };
  return pb;
}

/// Linear delayed system dx = (A x + B0 u + B1 u_delayed) dt + F0 dw with a
/// constant diffusion plus optional control-proportional columns.
struct LinearSystem {
  Mat A;                 // n x n
  Mat B0;                // n x d
  Mat B1;                // n x d
  Mat F0;                // n x p constant diffusion (may be 0 x 0)
  std::vector<Mat> G0;   // p matrices n x d: column j gains on u
  std::vector<Mat> G1;   // p matrices n x d: column j gains on u_delayed
  Vec x0;
  Vec x_target;
  Mat P_tf;
  Mat P;  // constant running state weight
  Mat Q;  // constant running control weight
  double tau = 0.1;
  double t_f = 1.0;
};

inline ContinuousProblem make_linear_problem(const LinearSystem& sys) {
  ContinuousProblem pb;
  pb.n = static_cast<int>(sys.A.rows());
  pb.d = static_cast<int>(sys.B0.cols());
  pb.p = static_cast<int>(sys.F0.cols());
  const Mat A = sys.A, B0 = sys.B0, B1 = sys.B1, F0 = sys.F0;
  const auto G0 = sys.G0, G1 = sys.G1;
  pb.drift = [A, B0, B1](const Vec& x, const Vec& u, const Vec& ud) -> Vec {
    return A * x + B0 * u + B1 * ud;
  };
  if (pb.p > 0) {
    pb.diffusion = [F0, G0, G1](const Vec& u, const Vec& ud) {
      Mat F = F0;
      for (size_t j = 0; j < G0.size(); ++j) F.col(j) += G0[j] * u;
      for (size_t j = 0; j < G1.size(); ++j) F.col(j) += G1[j] * ud;
      return F;
    };
  }
  pb.analytic.df_dx = [A](const Vec&, const Vec&, const Vec&) { return A; };
  pb.analytic.df_du0 = [B0](const Vec&, const Vec&, const Vec&) { return B0; };
  pb.analytic.df_du1 = [B1](const Vec&, const Vec&, const Vec&) { return B1; };
  if (pb.p > 0) {
    const int n = pb.n, d = pb.d, p = pb.p;
    pb.analytic.dF_du0 = [G0, n, d, p](const Vec&, const Vec&) {
      std::vector<Mat> out(p, Mat::Zero(n, d));
      for (size_t j = 0; j < G0.size(); ++j) out[j] = G0[j];
      return out;
    };
    pb.analytic.dF_du1 = [G1, n, d, p](const Vec&, const Vec&) {
      std::vector<Mat> out(p, Mat::Zero(n, d));
      for (size_t j = 0; j < G1.size(); ++j) out[j] = G1[j];
      return out;
    };
  }
  pb.tau = sys.tau;
  pb.t_f = sys.t_f;
  pb.x0 = sys.x0;
  pb.x_target = sys.x_target;
  pb.P_tf = sys.P_tf;
  pb.P_of_t = [P = sys.P](double) { return P; };
  pb.Q_of_t = [Q = sys.Q](double) { return Q; };
  return pb;
}

}  // namespace models
}  // namespace dilqr
