#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "dilqr/discretize.hpp"

namespace dilqr {

/// Cost-to-go coefficients at step k:
///   J(k) = s_tilde + 2 dx's + dx'S dx
///        + 2 sum_i du_{k+i-l}' r[i] + 2 dx' sum_i R_tilde[i] du_{k+i-l}
///        + sum_{ij} du_{k+i-l}' R[i][j] du_{k+j-l},
/// with i, j < m_k = min(K - k, l). Arrays hold exactly the active taps;
/// taps at or beyond m_k are identically zero by convention.
struct ValueCoeffs {
  double s_tilde = 0.0;
  Vec s_vec;                     // n
  Mat S;                         // n x n
  std::vector<Vec> r;            // m_k vectors, d each
  std::vector<Mat> R_tilde;      // m_k matrices, n x d
  std::vector<std::vector<Mat>> R;  // m_k x m_k grid, d x d

  int taps() const { return static_cast<int>(r.size()); }
};

/// Affine policy coefficients at step k:
///   du_k = iota + L dx_k + sum_i M[i] du_{k+i-l},  i < min(K-k, l).
struct StageGains {
  Vec iota;            // d
  Mat L;               // d x n
  std::vector<Mat> M;  // active taps, d x d each
  Mat H;               // d x d, kept for diagnostics
};

struct Policy {
  std::vector<StageGains> gains;   // k = 0 .. K-1
  std::vector<ValueCoeffs> value;  // k = 0 .. K
  TimeGrid grid;
  NominalTrajectory nominal;

  /// Predicted optimal cost from step 0 (zero deviation, zero history).
  double predicted_cost() const { return value.front().s_tilde; }
};

class BackwardPassError : public std::runtime_error {
 public:
  BackwardPassError(int step, double min_eig)
      : std::runtime_error("backward pass failure at step " +
                           std::to_string(step) +
                           ": H not positive definite (min eig " +
                           std::to_string(min_eig) + ")"),
        step(step),
        min_eig(min_eig) {}
  int step;
  double min_eig;
};

/// Terminal condition: s_tilde = d_tilde_K, s = d_K, S = D_K; no taps.
inline ValueCoeffs terminal_value(const QuadStage& quad_K) {
  ValueCoeffs v;
  v.s_tilde = quad_K.d_tilde;
  v.s_vec = quad_K.d_vec;
  v.S = quad_K.D;
  return v;
}

namespace detail {

// zero-padded accessors for taps at or beyond the active count
inline Vec rpad(const ValueCoeffs& v, int i, int d) {
  return i < v.taps() ? v.r[i] : Vec::Zero(d);
}
inline Mat Rtpad(const ValueCoeffs& v, int i, int n, int d) {
  return i < v.taps() ? v.R_tilde[i] : Mat::Zero(n, d);
}
inline Mat Rpad(const ValueCoeffs& v, int i, int j, int d) {
  return (i < v.taps() && j < v.taps()) ? v.R[i][j] : Mat::Zero(d, d);
}

// Solves H X = B for PD-symmetric H via Cholesky, regularizing with
// escalating lambda * I if the factorization fails.
inline Eigen::LLT<Mat> factor_pd(Mat& H, int step) {
  const auto d = H.rows();
  H = Mat(0.5 * (H + H.transpose().eval()));
  Eigen::LLT<Mat> llt(H);
  if (llt.info() == Eigen::Success) return llt;
  const double base = H.trace() / static_cast<double>(d);
  for (double lam = 1e-8 * base; lam <= 1e-2 * base; lam *= 10.0) {
    Mat Hr = H + lam * Mat::Identity(d, d);
    llt.compute(Hr);
    if (llt.info() == Eigen::Success) {
      H = Hr;
      return llt;
    }
  }
  throw BackwardPassError(step, min_eigenvalue(H));
}

}  // namespace detail

/// One step of the delay-aware value recursion: consumes the value at step k
/// and the
/// stage approximation at k-1, produces the gains and value at k-1.
///
/// A single coefficient list is used for both proof regimes: the taps of the
/// incoming value are zero-padded up to l, so the extra coupling terms
/// (R^{(l-1)(l-1)}, R_tilde^{l-1}, r^{l-1}) vanish identically whenever the
/// value at step k does not yet reference du_{k-1}, i.e. while K - k < l.
inline std::pair<StageGains, ValueCoeffs> stage_step(const ValueCoeffs& vnext,
                                                     const LinearStage& lin,
                                                     const QuadStage& quad,
                                                     const TimeGrid& grid,
                                                     int k) {
  if (k < 1 || k > grid.K) throw std::invalid_argument("stage_step: bad k");
  const int n = static_cast<int>(lin.A.rows());
  const int d = static_cast<int>(lin.B0.cols());
  const int p = static_cast<int>(lin.c.size());
  const int l = grid.l;
  const Mat& A = lin.A;
  const Mat& B0 = lin.B0;
  const Mat& B1 = lin.B1;
  const Mat& S = vnext.S;

  // coupling blocks to du_{k-1} (zero unless K - k >= l)
  const Mat Rt_top = detail::Rtpad(vnext, l - 1, n, d);
  const Mat R_top = detail::Rpad(vnext, l - 1, l - 1, d);
  const Vec r_top = detail::rpad(vnext, l - 1, d);

  StageGains g;
  g.H = quad.E + B0.transpose() * S * B0 + R_top +
        B0.transpose() * Rt_top + Rt_top.transpose() * B0;
  Vec iota_rhs = quad.e_vec + B0.transpose() * vnext.s_vec + r_top;
  Mat M0_rhs = B0.transpose() * S * B1 + Rt_top.transpose() * B1;
  for (int i = 0; i < p; ++i) {
    g.H += lin.C0[i].transpose() * S * lin.C0[i];
    iota_rhs += lin.C0[i].transpose() * S * lin.c[i];
    M0_rhs += lin.C0[i].transpose() * S * lin.C1[i];
  }
  auto llt = detail::factor_pd(g.H, k - 1);

  g.iota = -llt.solve(iota_rhs);
  g.L = -llt.solve((S * B0 + Rt_top).transpose() * A);
  const int m_out = std::min(grid.K - (k - 1), l);  // taps of du_{k-1}
  g.M.resize(m_out);
  g.M[0] = -llt.solve(M0_rhs);
  for (int i = 1; i < m_out; ++i)
    g.M[i] = -llt.solve(B0.transpose() * detail::Rtpad(vnext, i - 1, n, d) +
                        detail::Rpad(vnext, l - 1, i - 1, d));

  ValueCoeffs v;
  v.s_tilde = quad.d_tilde + vnext.s_tilde - g.iota.dot(g.H * g.iota);
  for (int i = 0; i < p; ++i) v.s_tilde += lin.c[i].dot(S * lin.c[i]);
  v.s_vec = quad.d_vec + A.transpose() * vnext.s_vec -
            g.L.transpose() * (g.H * g.iota);
  v.S = quad.D + A.transpose() * S * A - g.L.transpose() * g.H * g.L;
  v.S = Mat(0.5 * (v.S + v.S.transpose().eval()));

  v.r.resize(m_out);
  v.R_tilde.resize(m_out);
  v.R.assign(m_out, std::vector<Mat>(m_out));

  v.r[0] = B1.transpose() * vnext.s_vec - g.M[0].transpose() * (g.H * g.iota);
  for (int i = 0; i < p; ++i)
    v.r[0] += lin.C1[i].transpose() * S * lin.c[i];
  v.R_tilde[0] = A.transpose() * S * B1 - g.L.transpose() * g.H * g.M[0];
  v.R[0][0] = B1.transpose() * S * B1 - g.M[0].transpose() * g.H * g.M[0];
  for (int i = 0; i < p; ++i)
    v.R[0][0] += lin.C1[i].transpose() * S * lin.C1[i];
  v.R[0][0] = Mat(0.5 * (v.R[0][0] + v.R[0][0].transpose().eval()));

  for (int i = 1; i < m_out; ++i) {
    v.r[i] = detail::rpad(vnext, i - 1, d) -
             g.M[i].transpose() * (g.H * g.iota);
    v.R_tilde[i] = A.transpose() * detail::Rtpad(vnext, i - 1, n, d) -
                   g.L.transpose() * g.H * g.M[i];
    v.R[0][i] = B1.transpose() * detail::Rtpad(vnext, i - 1, n, d) -
                g.M[0].transpose() * g.H * g.M[i];
    v.R[i][0] = v.R[0][i].transpose();
    for (int j = 1; j <= i; ++j) {
      v.R[i][j] = detail::Rpad(vnext, i - 1, j - 1, d) -
                  g.M[i].transpose() * g.H * g.M[j];
      if (j == i)
        v.R[i][i] = Mat(0.5 * (v.R[i][i] + v.R[i][i].transpose().eval()));
      else
        v.R[j][i] = v.R[i][j].transpose();
    }
  }
  return {std::move(g), std::move(v)};
}

/// Full backward recursion k = K .. 1 over cached stage approximations.
inline Policy run_backward(const std::vector<LinearStage>& stages,
                           const std::vector<QuadStage>& quads,
                           const TimeGrid& grid) {
  if (static_cast<int>(stages.size()) != grid.K ||
      static_cast<int>(quads.size()) != grid.K + 1)
    throw std::invalid_argument("run_backward: stage/quad count mismatch");
  Policy pol;
  pol.grid = grid;
  pol.gains.resize(grid.K);
  pol.value.resize(grid.K + 1);
  pol.value[grid.K] = terminal_value(quads[grid.K]);
  for (int k = grid.K; k >= 1; --k) {
    auto [g, v] = stage_step(pol.value[k], stages[k - 1], quads[k - 1], grid, k);
    pol.gains[k - 1] = std::move(g);
    pol.value[k - 1] = std::move(v);
  }
  return pol;
}

/// Assembles the (n + l*d + 1)-square value matrix Gamma_k over the vector
/// (dx_k, du_{k-1}, ..., du_{k-l}, 1). Register j (1-based, du_{k-j})
/// corresponds to tap i = l - j; inactive taps pad with zeros.
inline Mat assemble_gamma(const ValueCoeffs& v, const TimeGrid& grid) {
  const int n = static_cast<int>(v.S.rows());
  // control dimension from any active tap; a tapless value has no register
  // blocks at all (see the overload below for that case)
  const int D = v.taps() > 0 ? static_cast<int>(v.r[0].size()) : 0;
  const int dim = n + grid.l * D + 1;
  Mat G = Mat::Zero(dim, dim);
  G.topLeftCorner(n, n) = v.S;
  G(dim - 1, dim - 1) = v.s_tilde;
  G.block(0, dim - 1, n, 1) = v.s_vec;
  G.block(dim - 1, 0, 1, n) = v.s_vec.transpose();
  if (D == 0) return G;
  auto reg = [&](int j) { return n + (j - 1) * D; };  // column of du_{k-j}
  for (int i = 0; i < grid.l; ++i) {
    const int j = grid.l - i;
    const Mat Rt = detail::Rtpad(v, i, n, D);
    const Vec ri = detail::rpad(v, i, D);
    G.block(0, reg(j), n, D) = Rt;
    G.block(reg(j), 0, D, n) = Rt.transpose();
    G.block(reg(j), dim - 1, D, 1) = ri;
    G.block(dim - 1, reg(j), 1, D) = ri.transpose();
    for (int i2 = 0; i2 < grid.l; ++i2) {
      const int j2 = grid.l - i2;
      G.block(reg(j), reg(j2), D, D) = detail::Rpad(v, i, i2, D);
    }
  }
  return G;
}

/// Variant for tapless values (e.g. the terminal step) where the control
/// dimension cannot be recovered from the coefficients.
inline Mat assemble_gamma(const ValueCoeffs& v, const TimeGrid& grid, int d) {
  if (v.taps() > 0) return assemble_gamma(v, grid);
  const int n = static_cast<int>(v.S.rows());
  const int dim = n + grid.l * d + 1;
  Mat G = Mat::Zero(dim, dim);
  G.topLeftCorner(n, n) = v.S;
  G(dim - 1, dim - 1) = v.s_tilde;
  G.block(0, dim - 1, n, 1) = v.s_vec;
  G.block(dim - 1, 0, 1, n) = v.s_vec.transpose();
  return G;
}

}  // namespace dilqr
