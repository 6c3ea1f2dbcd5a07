#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dilqr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Drift f(x, u, u_delayed) -> n-vector.
using DriftFn = std::function<Vec(const Vec&, const Vec&, const Vec&)>;
/// Diffusion F(u, u_delayed) -> n x p matrix. The diffusion depends on the
/// control channels only; the state argument carried by the continuous model
/// never enters any coefficient and is dropped here.
using DiffusionFn = std::function<Mat(const Vec&, const Vec&)>;
/// Time-varying weight t -> square matrix.
using WeightFn = std::function<Mat(double)>;

/// Optional analytic derivatives. When absent, central differences are used.
struct AnalyticJacobians {
  // each returns the Jacobian of f at (x, u, u_delayed)
  std::function<Mat(const Vec&, const Vec&, const Vec&)> df_dx;   // n x n
  std::function<Mat(const Vec&, const Vec&, const Vec&)> df_du0;  // n x d
  std::function<Mat(const Vec&, const Vec&, const Vec&)> df_du1;  // n x d
  // column-wise diffusion Jacobians: p matrices of size n x d
  std::function<std::vector<Mat>(const Vec&, const Vec&)> dF_du0;
  std::function<std::vector<Mat>(const Vec&, const Vec&)> dF_du1;

  bool has_drift() const { return df_dx && df_du0 && df_du1; }
  bool has_diffusion() const { return dF_du0 && dF_du1; }
};

/// Continuous-time delayed stochastic optimal control problem:
///   dx = f(x, u, u(t - tau)) dt + F(u, u(t - tau)) dw,
/// quadratic running cost x'P(t)x + u'Q(t)u and terminal cost
/// (x(t_f) - x*)' P_tf (x(t_f) - x*). Immutable after construction;
/// evaluators are required to be pure.
struct ContinuousProblem {
  int n = 0;  // state dimension
  int d = 0;  // control dimension
  int p = 0;  // noise columns of F

  DriftFn drift;
  DiffusionFn diffusion;  // may be empty when p == 0

  double tau = 0.0;  // input delay [s]
  double t_f = 0.0;  // horizon [s]

  Vec x0;
  Vec x_target;
  Mat P_tf;
  WeightFn P_of_t;
  WeightFn Q_of_t;

  AnalyticJacobians analytic;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> failures;

  void fail(std::string msg) {
    ok = false;
    failures.push_back(std::move(msg));
  }
};

namespace detail {

inline bool is_symmetric(const Mat& X, double rel_tol = 1e-12) {
  const double scale = std::max(1e-300, X.norm());
  return (X - X.transpose()).norm() <= rel_tol * scale;
}

inline double min_eigenvalue(const Mat& X) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (X + X.transpose()));
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

/// Evaluates the drift with shape checks on inputs and output.
inline Vec eval_drift(const ContinuousProblem& pb, const Vec& x, const Vec& u,
                      const Vec& u_delayed) {
  if (x.size() != pb.n || u.size() != pb.d || u_delayed.size() != pb.d)
    throw std::invalid_argument("eval_drift: argument shape mismatch");
  Vec out = pb.drift(x, u, u_delayed);
  if (out.size() != pb.n)
    throw std::invalid_argument("eval_drift: drift returned wrong dimension");
  return out;
}

/// Evaluates the diffusion (n x p) with shape checks.
inline Mat eval_diffusion(const ContinuousProblem& pb, const Vec& u,
                          const Vec& u_delayed) {
  if (pb.p == 0) return Mat::Zero(pb.n, 0);
  if (u.size() != pb.d || u_delayed.size() != pb.d)
    throw std::invalid_argument("eval_diffusion: argument shape mismatch");
  Mat out = pb.diffusion(u, u_delayed);
  if (out.rows() != pb.n || out.cols() != pb.p)
    throw std::invalid_argument("eval_diffusion: diffusion returned wrong shape");
  return out;
}

/// Checks the problem invariants, probing time-varying weights at
/// t in {0, t_f/2, t_f}. Reports failures instead of throwing.
inline ValidationReport validate_problem(const ContinuousProblem& pb) {
  ValidationReport rep;
  if (pb.n <= 0) rep.fail("n must be positive");
  if (pb.d <= 0) rep.fail("d must be positive");
  if (pb.p < 0) rep.fail("p must be nonnegative");
  if (pb.tau <= 0.0) rep.fail("tau must be positive");
  if (pb.t_f <= 0.0) rep.fail("t_f must be positive");
  if (!rep.ok) return rep;

  if (pb.x0.size() != pb.n) rep.fail("x0 has wrong dimension");
  if (pb.x_target.size() != pb.n) rep.fail("x_target has wrong dimension");

  auto check_psd = [&rep](const Mat& X, const std::string& name) {
    if (!detail::is_symmetric(X))
      rep.fail(name + " not symmetric within tolerance");
    const double floor = -1e-10 * std::max(1e-300, X.norm());
    if (detail::min_eigenvalue(X) < floor) rep.fail(name + " not PSD");
  };

  if (pb.P_tf.rows() != pb.n || pb.P_tf.cols() != pb.n)
    rep.fail("P_tf has wrong shape");
  else
    check_psd(pb.P_tf, "P_tf");

  for (double t : {0.0, 0.5 * pb.t_f, pb.t_f}) {
    Mat P = pb.P_of_t(t);
    if (P.rows() != pb.n || P.cols() != pb.n)
      rep.fail("P(t) has wrong shape at t=" + std::to_string(t));
    else
      check_psd(P, "P(t=" + std::to_string(t) + ")");

    Mat Q = pb.Q_of_t(t);
    if (Q.rows() != pb.d || Q.cols() != pb.d) {
      rep.fail("Q(t) has wrong shape at t=" + std::to_string(t));
      continue;
    }
    if (!detail::is_symmetric(Q))
      rep.fail("Q(t=" + std::to_string(t) + ") not symmetric within tolerance");
    if (detail::min_eigenvalue(Q) <= 0.0)
      rep.fail("Q not positive definite at t=" + std::to_string(t));
  }

  // Shape probe of the evaluators at the initial point.
  if (rep.ok) {
    try {
      eval_drift(pb, pb.x0, Vec::Zero(pb.d), Vec::Zero(pb.d));
      eval_diffusion(pb, Vec::Zero(pb.d), Vec::Zero(pb.d));
    } catch (const std::exception& e) {
      rep.fail(std::string("evaluator shape check failed: ") + e.what());
    }
  }
  return rep;
}

}  // namespace dilqr
