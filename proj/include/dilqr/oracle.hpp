#pragma once

#include <random>
#include <stdexcept>
#include <vector>

#include "dilqr/backward_pass.hpp"

namespace dilqr {
namespace oracle {

// ---------------------------------------------------------------------------
// Augmented-state Riccati over z_k = (dx_k, du_{k-1}, ..., du_{k-l}).
//
// Independent ground truth for the delay-aware recursion: the delayed system
// is rewritten as a delay-free one by stacking the last l controls into the
// state, and a plain time-varying Riccati recursion (in homogeneous
// coordinates, so constant and linear value terms ride along) is run on it.
// Shares nothing with the solver beyond Eigen.
// ---------------------------------------------------------------------------

struct AugmentedResult {
  // unfolded per-step gains, directly comparable with Policy::gains
  std::vector<StageGains> gains;
  // per-step value matrices over (z_k, 1), size (n + l*d + 1)^2,
  // directly comparable with assemble_gamma
  std::vector<Mat> value;
};

inline AugmentedResult augmented_riccati(const std::vector<LinearStage>& stages,
                                         const std::vector<QuadStage>& quads,
                                         const TimeGrid& grid) {
  const int K = grid.K;
  const int l = grid.l;
  const int n = static_cast<int>(stages[0].A.rows());
  const int d = static_cast<int>(stages[0].B0.cols());
  const int nz = n + l * d;

  AugmentedResult out;
  out.gains.resize(K);
  out.value.resize(K + 1);

  // terminal value over (z, 1)
  {
    Mat V = Mat::Zero(nz + 1, nz + 1);
    V.topLeftCorner(n, n) = quads[K].D;
    V.block(0, nz, n, 1) = quads[K].d_vec;
    V.block(nz, 0, 1, n) = quads[K].d_vec.transpose();
    V(nz, nz) = quads[K].d_tilde;
    out.value[K] = V;
  }

  for (int k = K - 1; k >= 0; --k) {
    const LinearStage& st = stages[k];
    const QuadStage& q = quads[k];
    const Mat& Vn = out.value[k + 1];
    const Mat Sxx = Vn.topLeftCorner(n, n);

    // columns of the extended decision vector: (z, u, 1)
    const int dim = nz + d + 1;
    const int cu = nz;       // first u column
    const int c1 = nz + d;   // homogeneous column
    const int reg_last = n + (l - 1) * d;  // z-column of du_{k-l}

    // transition (z, u, 1) -> (z', 1)
    Mat T = Mat::Zero(nz + 1, dim);
    T.block(0, 0, n, n) = st.A;
    T.block(0, reg_last, n, d) = st.B1;
    T.block(0, cu, n, d) = st.B0;
    T.block(n, cu, d, d) = Mat::Identity(d, d);  // du_k enters register 1
    for (int j = 2; j <= l; ++j)                 // registers shift down
      T.block(n + (j - 1) * d, n + (j - 2) * d, d, d) = Mat::Identity(d, d);
    T(nz, c1) = 1.0;

    Mat Phi = T.transpose() * Vn * T;

    // stage cost
    Phi.topLeftCorner(n, n) += q.D;
    Phi.block(0, c1, n, 1) += q.d_vec;
    Phi.block(c1, 0, 1, n) += q.d_vec.transpose();
    Phi.block(cu, cu, d, d) += q.E;
    Phi.block(cu, c1, d, 1) += q.e_vec;
    Phi.block(c1, cu, 1, d) += q.e_vec.transpose();
    Phi(c1, c1) += q.d_tilde;

    // multiplicative noise: E[ (C xi)' Sxx' (C xi) ] with columns
    // w_i = c_i + C0_i u + C1_i du_{k-l}, each quadratic in (z, u, 1)
    for (size_t i = 0; i < st.c.size(); ++i) {
      Mat W = Mat::Zero(n, dim);
      W.block(0, reg_last, n, d) = st.C1[i];
      W.block(0, cu, n, d) = st.C0[i];
      W.block(0, c1, n, 1) = st.c[i];
      Phi += W.transpose() * Sxx * W;
    }
    Phi = Mat(0.5 * (Phi + Phi.transpose().eval()));

    Mat Huu = Phi.block(cu, cu, d, d);
    Eigen::LLT<Mat> llt(Huu);
    if (llt.info() != Eigen::Success) {
      const double base = Huu.trace() / d;
      bool ok = false;
      for (double lam = 1e-8 * base; lam <= 1e-2 * base; lam *= 10.0) {
        llt.compute(Huu + lam * Mat::Identity(d, d));
        if (llt.info() == Eigen::Success) { ok = true; break; }
      }
      if (!ok) throw BackwardPassError(k, detail::min_eigenvalue(Huu));
    }

    // gain over (z, 1): u = Gz * z + g0
    Mat rhs(d, nz + 1);
    rhs << Phi.block(cu, 0, d, nz), Phi.block(cu, c1, d, 1);
    Mat G = -llt.solve(rhs);

    // condense u out: V_k = Kc' Phi Kc
    Mat Kc = Mat::Zero(dim, nz + 1);
    Kc.topLeftCorner(nz, nz) = Mat::Identity(nz, nz);
    Kc.block(cu, 0, d, nz + 1) = G;
    Kc(c1, nz) = 1.0;
    Mat V = Kc.transpose() * Phi * Kc;
    out.value[k] = 0.5 * (V + V.transpose());

    // unfold gains: register j holds du_{k-j} = du_{k + (l-j) - l}
    StageGains sg;
    sg.H = Huu;
    sg.iota = G.col(nz);
    sg.L = G.leftCols(n);
    const int m = std::min(K - k, l);
    sg.M.resize(m);
    for (int i = 0; i < m; ++i) {
      const int j = l - i;
      sg.M[i] = G.block(0, n + (j - 1) * d, d, d);
    }
    out.gains[k] = std::move(sg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch quadratic solve for deterministic instances: J(0) is an explicit
// quadratic in the stacked controls; build it by propagating the transfer
// matrices dx_k = sum_j W_{k,j} du_j and solve the normal equations.
// ---------------------------------------------------------------------------

struct BatchResult {
  std::vector<Vec> du;  // open-loop minimizer, K entries
  double cost = 0.0;
};

inline BatchResult batch_quadratic_solve(const std::vector<LinearStage>& stages,
                                         const std::vector<QuadStage>& quads,
                                         const TimeGrid& grid) {
  const int K = grid.K;
  const int l = grid.l;
  const int n = static_cast<int>(stages[0].A.rows());
  const int d = static_cast<int>(stages[0].B0.cols());
  for (const auto& st : stages)
    for (const auto& c : st.c)
      if (c.norm() != 0.0)
        throw std::invalid_argument("batch_quadratic_solve: instance has noise");

  // W[k] is n x (K*d): dx_k as a linear map of stacked controls
  std::vector<Mat> W(K + 1, Mat::Zero(n, K * d));
  for (int k = 0; k < K; ++k) {
    W[k + 1] = stages[k].A * W[k];
    W[k + 1].middleCols(k * d, d) += stages[k].B0;
    if (k - l >= 0) W[k + 1].middleCols((k - l) * d, d) += stages[k].B1;
  }

  Mat Hess = Mat::Zero(K * d, K * d);
  Vec b = Vec::Zero(K * d);
  double c0 = 0.0;
  for (int k = 0; k <= K; ++k) {
    const QuadStage& q = quads[k];
    c0 += q.d_tilde;
    b += W[k].transpose() * q.d_vec;
    Hess += W[k].transpose() * q.D * W[k];
    if (k < K) {
      b.segment(k * d, d) += q.e_vec;
      Hess.block(k * d, k * d, d, d) += q.E;
    }
  }
  Hess = Mat(0.5 * (Hess + Hess.transpose().eval()));
  Eigen::LLT<Mat> llt(Hess);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("batch_quadratic_solve: Hessian not PD");
  Vec sol = -llt.solve(b);

  BatchResult res;
  res.cost = c0 + b.dot(sol);  // c0 - b' Hess^-1 b
  res.du.resize(K);
  for (int k = 0; k < K; ++k) res.du[k] = sol.segment(k * d, d);
  return res;
}

// ---------------------------------------------------------------------------
// Exact expected cost of an affine delay-tap policy on the linear stages, by
// propagating the second moment of (z_k, 1). No sampling.
// ---------------------------------------------------------------------------

inline double moment_propagation_cost(const std::vector<LinearStage>& stages,
                                      const std::vector<QuadStage>& quads,
                                      const TimeGrid& grid,
                                      const Policy& policy) {
  const int K = grid.K;
  const int l = grid.l;
  const int n = static_cast<int>(stages[0].A.rows());
  const int d = static_cast<int>(stages[0].B0.cols());
  const int nz = n + l * d;
  const int dim = nz + 1;

  // P = E[(z,1)(z,1)'], initially z = 0 deterministically
  Mat P = Mat::Zero(dim, dim);
  P(nz, nz) = 1.0;

  double cost = 0.0;
  for (int k = 0; k < K; ++k) {
    const LinearStage& st = stages[k];
    const QuadStage& q = quads[k];
    const StageGains& g = policy.gains[k];

    // du_k = U * (z, 1): feedback on dx, taps on registers, offset on 1
    Mat U = Mat::Zero(d, dim);
    U.leftCols(n) = g.L;
    U.col(nz) = g.iota;
    for (size_t i = 0; i < g.M.size(); ++i) {
      const int j = l - static_cast<int>(i);  // register holding du_{k+i-l}
      U.block(0, n + (j - 1) * d, d, d) = g.M[i];
    }

    // E[cost_k] = trace(C_hat P) with the stage quadratic over (z, 1)
    Mat Chat = Mat::Zero(dim, dim);
    Chat.topLeftCorner(n, n) = q.D;
    Chat.block(0, nz, n, 1) = q.d_vec;
    Chat.block(nz, 0, 1, n) = q.d_vec.transpose();
    Chat(nz, nz) = q.d_tilde;
    Chat += U.transpose() * q.E * U;
    const Vec eU = U.transpose() * q.e_vec;
    Chat.col(nz) += eU;
    Chat.row(nz) += eU.transpose();
    cost += (Chat.cwiseProduct(P)).sum();

    // closed-loop transition (z, 1) -> (z', 1)
    Mat F = Mat::Zero(dim, dim);
    F.block(0, 0, n, n) = st.A;
    F.block(0, n + (l - 1) * d, n, d) = st.B1;
    F.block(0, 0, n, dim) += st.B0 * U;
    F.block(n, 0, d, dim) = U;
    for (int j = 2; j <= l; ++j)
      F.block(n + (j - 1) * d, n + (j - 2) * d, d, d) = Mat::Identity(d, d);
    F(nz, nz) = 1.0;

    Mat Pn = F * P * F.transpose();
    // noise columns w_i = c_i + C0_i du_k + C1_i du_{k-l} = Ghat_i (z, 1)
    for (size_t i = 0; i < st.c.size(); ++i) {
      Mat Gh = Mat::Zero(n, dim);
      Gh += st.C0[i] * U;
      Gh.block(0, n + (l - 1) * d, n, d) += st.C1[i];
      Gh.col(nz) += st.c[i];
      Pn.topLeftCorner(n, n) += Gh * P * Gh.transpose();
    }
    P = 0.5 * (Pn + Pn.transpose());
  }

  // terminal
  const QuadStage& qK = quads[K];
  Mat Chat = Mat::Zero(dim, dim);
  Chat.topLeftCorner(n, n) = qK.D;
  Chat.block(0, nz, n, 1) = qK.d_vec;
  Chat.block(nz, 0, 1, n) = qK.d_vec.transpose();
  Chat(nz, nz) = qK.d_tilde;
  cost += (Chat.cwiseProduct(P)).sum();
  return cost;
}

// ---------------------------------------------------------------------------
// Delay-free multiplicative-noise LQR, for the B1 = C1 = 0 reduction test.
// Re-derived independently of the delay recursion.
// ---------------------------------------------------------------------------

struct DelayFreeResult {
  std::vector<Vec> iota;
  std::vector<Mat> L;
  std::vector<double> s_tilde;  // K+1 entries
  std::vector<Vec> s_vec;
  std::vector<Mat> S;
};

inline DelayFreeResult delay_free_lqr(const std::vector<LinearStage>& stages,
                                      const std::vector<QuadStage>& quads,
                                      const TimeGrid& grid) {
  const int K = grid.K;
  const int d = static_cast<int>(stages[0].B0.cols());
  DelayFreeResult res;
  res.iota.resize(K);
  res.L.resize(K);
  res.s_tilde.resize(K + 1);
  res.s_vec.resize(K + 1);
  res.S.resize(K + 1);
  res.s_tilde[K] = quads[K].d_tilde;
  res.s_vec[K] = quads[K].d_vec;
  res.S[K] = quads[K].D;
  for (int k = K - 1; k >= 0; --k) {
    const LinearStage& st = stages[k];
    const QuadStage& q = quads[k];
    const Mat& Sn = res.S[k + 1];
    Mat H = q.E + st.B0.transpose() * Sn * st.B0;
    Vec gvec = q.e_vec + st.B0.transpose() * res.s_vec[k + 1];
    double noise_const = 0.0;
    for (size_t i = 0; i < st.c.size(); ++i) {
      H += st.C0[i].transpose() * Sn * st.C0[i];
      gvec += st.C0[i].transpose() * Sn * st.c[i];
      noise_const += st.c[i].dot(Sn * st.c[i]);
    }
    H = Mat(0.5 * (H + H.transpose().eval()));
    Eigen::LLT<Mat> llt(H);
    if (llt.info() != Eigen::Success) {
      const double base = H.trace() / d;
      bool ok = false;
      for (double lam = 1e-8 * base; lam <= 1e-2 * base; lam *= 10.0) {
        llt.compute(H + lam * Mat::Identity(d, d));
        if (llt.info() == Eigen::Success) { ok = true; break; }
      }
      if (!ok) throw BackwardPassError(k, detail::min_eigenvalue(H));
    }
    res.L[k] = -llt.solve(st.B0.transpose() * Sn * st.A);
    res.iota[k] = -llt.solve(gvec);
    res.S[k] = q.D + st.A.transpose() * Sn * st.A -
               res.L[k].transpose() * H * res.L[k];
    res.S[k] = Mat(0.5 * (res.S[k] + res.S[k].transpose().eval()));
    res.s_vec[k] = q.d_vec + st.A.transpose() * res.s_vec[k + 1] -
                   res.L[k].transpose() * (H * res.iota[k]);
    res.s_tilde[k] = q.d_tilde + res.s_tilde[k + 1] + noise_const -
                     res.iota[k].dot(H * res.iota[k]);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Seeded random LQG instance generator for the cross-check suites.
// ---------------------------------------------------------------------------

struct Instance {
  TimeGrid grid;
  int n = 0, d = 0, p = 0;
  std::vector<LinearStage> stages;
  std::vector<QuadStage> quads;
};

/// Random validated instance: A scaled to spectral radius in [0.5, 1.1],
/// B/C entries N(0, 0.5^2), stage cost blocks generated in the outer-product
/// form dt * [I; xbar']' diag(P, Q) [I; xbar] so the joint stage-cost matrix
/// (and hence every Gamma_k) is provably PSD.
inline Instance random_instance(unsigned seed, bool with_noise) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim_dist(1, 4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Instance inst;
  inst.n = dim_dist(rng);
  inst.d = dim_dist(rng);
  inst.p = with_noise ? dim_dist(rng) : 0;
  const int l = dim_dist(rng);
  std::uniform_int_distribution<int> K_dist(l + 2, 12);
  const int K = K_dist(rng);
  inst.grid = TimeGrid{1.0, K, l};
  const int n = inst.n, d = inst.d, p = inst.p;

  auto randn_mat = [&](int r, int c, double scale) {
    Mat M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = scale * gauss(rng);
    return M;
  };
  auto rand_psd = [&](int m, double scale) {
    Mat G = randn_mat(m, m, scale);
    return Mat(G * G.transpose());
  };

  const double dt = inst.grid.dt;
  inst.stages.resize(K);
  inst.quads.resize(K + 1);
  for (int k = 0; k < K; ++k) {
    LinearStage st;
    st.A = randn_mat(n, n, 1.0);
    Eigen::VectorXcd eig = st.A.eigenvalues();
    double rho = 0.0;
    for (int i = 0; i < n; ++i) rho = std::max(rho, std::abs(eig[i]));
    const double target = 0.5 + 0.6 * unif(rng);
    if (rho > 1e-12) st.A *= target / rho;
    st.B0 = randn_mat(n, d, 0.5);
    st.B1 = randn_mat(n, d, 0.5);
    st.c.resize(p);
    st.C0.resize(p);
    st.C1.resize(p);
    for (int j = 0; j < p; ++j) {
      st.c[j] = randn_mat(n, 1, 0.3);
      st.C0[j] = randn_mat(n, d, 0.3);
      st.C1[j] = randn_mat(n, d, 0.3);
    }
    inst.stages[k] = std::move(st);

    const Mat P = rand_psd(n, 0.5);
    const Mat Q = Mat::Identity(d, d) + rand_psd(d, 0.5);
    const Vec xbar = randn_mat(n, 1, 1.0);
    const Vec ubar = randn_mat(d, 1, 1.0);
    QuadStage q;
    q.d_tilde = dt * (xbar.dot(P * xbar) + ubar.dot(Q * ubar));
    q.d_vec = dt * (P * xbar);
    q.D = dt * P;
    q.e_vec = dt * (Q * ubar);
    q.E = dt * Q;
    inst.quads[k] = std::move(q);
  }
  // terminal in the PSD-preserving outer-product form
  const Mat Ptf = rand_psd(n, 0.7);
  const Vec err = randn_mat(n, 1, 1.0);
  QuadStage qK;
  qK.d_tilde = err.dot(Ptf * err);
  qK.d_vec = Ptf * err;
  qK.D = Ptf;
  qK.e_vec = Vec::Zero(d);
  qK.E = Mat::Zero(d, d);
  inst.quads[K] = std::move(qK);
  return inst;
}

}  // namespace oracle
}  // namespace dilqr
