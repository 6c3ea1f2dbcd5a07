#include <doctest.h>

#include "dilqr/backward_pass.hpp"
#include "dilqr/oracle.hpp"

using namespace dilqr;

namespace {

LinearStage scalar_stage(double A, double B0, double B1) {
  LinearStage st;
  st.A = Mat::Constant(1, 1, A);
  st.B0 = Mat::Constant(1, 1, B0);
  st.B1 = Mat::Constant(1, 1, B1);
  return st;
}

QuadStage scalar_quad(double d_tilde, double d, double D, double e, double E) {
  QuadStage q;
  q.d_tilde = d_tilde;
  q.d_vec = Vec::Constant(1, d);
  q.D = Mat::Constant(1, 1, D);
  q.e_vec = Vec::Constant(1, e);
  q.E = Mat::Constant(1, 1, E);
  return q;
}

}  // namespace

TEST_CASE("terminal_value copies the terminal quadratic") {
  {
    QuadStage q;
    q.d_tilde = 0.0;
    q.d_vec = Vec::Zero(2);
    q.D = Mat::Identity(2, 2);
    auto v = terminal_value(q);
    CHECK(v.s_tilde == 0.0);
    CHECK(v.s_vec.isZero(0));
    CHECK(v.S.isApprox(Mat::Identity(2, 2)));
    CHECK(v.taps() == 0);
  }
  {
    // P_tf = I, terminal error (1, 0)
    Vec err(2);
    err << 1, 0;
    QuadStage q;
    q.D = Mat::Identity(2, 2);
    q.d_vec = q.D * err;
    q.d_tilde = err.dot(q.d_vec);
    auto v = terminal_value(q);
    CHECK(v.s_tilde == doctest::Approx(1.0));
    CHECK(v.s_vec[0] == 1.0);
    CHECK(v.s_vec[1] == 0.0);
  }
  {
    // P_tf = diag(2, 0), error (1, 1)
    Mat P = Mat::Zero(2, 2);
    P(0, 0) = 2.0;
    Vec err = Vec::Ones(2);
    QuadStage q;
    q.D = P;
    q.d_vec = P * err;
    q.d_tilde = err.dot(q.d_vec);
    auto v = terminal_value(q);
    CHECK(v.s_tilde == 2.0);
    CHECK(v.s_vec[0] == 2.0);
    CHECK(v.s_vec[1] == 0.0);
    CHECK(v.S(0, 0) == 2.0);
    CHECK(v.S(1, 1) == 0.0);
  }
}

TEST_CASE("stage_step scalar closed form at the last step") {
  // E=1, B0=1, S_K=1, A=1, B1=1, e=0, s_K=0, D=0.3
  TimeGrid grid{1.0, 1, 1};
  auto st = scalar_stage(1.0, 1.0, 1.0);
  auto q = scalar_quad(0.0, 0.0, 0.3, 0.0, 1.0);
  ValueCoeffs vK;
  vK.s_tilde = 0.0;
  vK.s_vec = Vec::Zero(1);
  vK.S = Mat::Identity(1, 1);

  auto [g, v] = stage_step(vK, st, q, grid, 1);
  CHECK(g.H(0, 0) == doctest::Approx(2.0));
  CHECK(g.iota[0] == doctest::Approx(0.0));
  CHECK(g.L(0, 0) == doctest::Approx(-0.5));
  REQUIRE(g.M.size() == 1);
  CHECK(g.M[0](0, 0) == doctest::Approx(-0.5));
  // S_{K-1} = D + A S A - L' H L = 0.3 + 1 - 0.5
  CHECK(v.S(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("stage_step zero-gain fixed point") {
  TimeGrid grid{1.0, 3, 2};
  LinearStage st;
  st.A = Mat::Zero(2, 2);
  st.B0 = Mat::Zero(2, 1);
  st.B1 = Mat::Zero(2, 1);
  QuadStage q;
  q.d_tilde = 0.7;
  q.d_vec = Vec::Zero(2);
  q.D = Mat::Zero(2, 2);
  q.e_vec = Vec::Zero(1);
  q.E = Mat::Identity(1, 1);
  ValueCoeffs vn;
  vn.s_tilde = 1.5;
  vn.s_vec = Vec::Zero(2);
  vn.S = Mat::Zero(2, 2);

  auto [g, v] = stage_step(vn, st, q, grid, 3);
  CHECK(g.H.isApprox(Mat::Identity(1, 1)));
  CHECK(g.iota.isZero(0));
  CHECK(g.L.isZero(0));
  for (const auto& M : g.M) CHECK(M.isZero(0));
  CHECK(v.s_tilde == doctest::Approx(2.2));
  CHECK(v.s_vec.isZero(0));
}

TEST_CASE("backward pass matches augmented Riccati on a noisy delayed instance") {
  // n=2, d=1, p=1, l=2, K=6 fixed seed sweep
  for (unsigned seed : {7u, 8u, 9u, 10u}) {
    auto inst = oracle::random_instance(seed, true);
    Policy pol = run_backward(inst.stages, inst.quads, inst.grid);
    auto aug = oracle::augmented_riccati(inst.stages, inst.quads, inst.grid);
    for (int k = 0; k < inst.grid.K; ++k) {
      CHECK((pol.gains[k].iota - aug.gains[k].iota).lpNorm<Eigen::Infinity>() <
            1e-8);
      CHECK((pol.gains[k].L - aug.gains[k].L).lpNorm<Eigen::Infinity>() < 1e-8);
      REQUIRE(pol.gains[k].M.size() == aug.gains[k].M.size());
      for (size_t i = 0; i < pol.gains[k].M.size(); ++i)
        CHECK((pol.gains[k].M[i] - aug.gains[k].M[i])
                  .lpNorm<Eigen::Infinity>() < 1e-8);
    }
    // full value comparison through the assembled Gamma matrices
    for (int k = 0; k <= inst.grid.K; ++k) {
      const Mat G = assemble_gamma(pol.value[k], pol.grid, inst.d);
      CHECK((G - aug.value[k]).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }
}

TEST_CASE("run_backward with K=1 equals terminal_value + one stage_step") {
  auto inst = oracle::random_instance(42, true);
  inst.grid.K = 1;
  inst.stages.resize(1);
  inst.quads = {inst.quads[0], inst.quads.back()};
  Policy pol = run_backward(inst.stages, inst.quads, inst.grid);
  auto vK = terminal_value(inst.quads[1]);
  auto [g, v] = stage_step(vK, inst.stages[0], inst.quads[0], inst.grid, 1);
  CHECK(pol.gains[0].L == g.L);
  CHECK(pol.gains[0].iota == g.iota);
  CHECK(pol.value[0].s_tilde == v.s_tilde);
  CHECK(pol.value[0].S == v.S);
}

TEST_CASE("zero dynamics reduce to per-stage minimization") {
  // A = I, B0 = B1 = 0: L = 0, M = 0, iota = -E^{-1} e
  TimeGrid grid{1.0, 4, 2};
  std::vector<LinearStage> stages;
  std::vector<QuadStage> quads;
  for (int k = 0; k < 4; ++k) {
    LinearStage st;
    st.A = Mat::Identity(2, 2);
    st.B0 = Mat::Zero(2, 1);
    st.B1 = Mat::Zero(2, 1);
    stages.push_back(st);
    QuadStage q;
    q.d_tilde = 0.1 * k;
    q.d_vec = Vec::Constant(2, 0.2);
    q.D = 0.5 * Mat::Identity(2, 2);
    q.e_vec = Vec::Constant(1, 0.3 + k);
    q.E = 2.0 * Mat::Identity(1, 1);
    quads.push_back(q);
  }
  QuadStage qK;
  qK.d_tilde = 0;
  qK.d_vec = Vec::Zero(2);
  qK.D = Mat::Identity(2, 2);
  qK.e_vec = Vec::Zero(1);
  qK.E = Mat::Zero(1, 1);
  quads.push_back(qK);

  Policy pol = run_backward(stages, quads, grid);
  for (int k = 0; k < 4; ++k) {
    CHECK(pol.gains[k].L.isZero(0));
    for (const auto& M : pol.gains[k].M) CHECK(M.isZero(0));
    CHECK(pol.gains[k].iota[0] ==
          doctest::Approx(-quads[k].e_vec[0] / quads[k].E(0, 0)));
  }
}

TEST_CASE("l >= K: whole-horizon zero history matches delay-free LQR") {
  auto inst = oracle::random_instance(11, true);
  // stretch the delay past the horizon; B1/C1 only act through zero history
  inst.grid.l = inst.grid.K + 2;
  Policy pol = run_backward(inst.stages, inst.quads, inst.grid);
  auto nodelay = inst;
  for (auto& st : nodelay.stages) {
    st.B1.setZero();
    for (auto& C : st.C1) C.setZero();
  }
  auto ref = oracle::delay_free_lqr(nodelay.stages, nodelay.quads, nodelay.grid);
  for (int k = 0; k < inst.grid.K; ++k) {
    CHECK((pol.gains[k].iota - ref.iota[k]).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((pol.gains[k].L - ref.L[k]).lpNorm<Eigen::Infinity>() < 1e-10);
  }
  CHECK(pol.predicted_cost() == doctest::Approx(ref.s_tilde[0]).epsilon(1e-10));
}

TEST_CASE("assemble_gamma structure and symmetry") {
  {
    // tapless terminal value: S bordered by s and s_tilde
    ValueCoeffs v;
    v.s_tilde = 3.0;
    v.s_vec = Vec::Constant(2, 1.0);
    v.S = 2.0 * Mat::Identity(2, 2);
    TimeGrid grid{1.0, 5, 2};
    Mat G = assemble_gamma(v, grid, 1);
    REQUIRE(G.rows() == 2 + 2 * 1 + 1);
    CHECK(G(4, 4) == 3.0);
    CHECK(G(0, 4) == 1.0);
    CHECK(G.block(0, 2, 2, 2).isZero(0));
    CHECK(G.block(2, 2, 2, 2).isZero(0));
  }
  for (unsigned seed : {21u, 22u, 23u}) {
    auto inst = oracle::random_instance(seed, true);
    Policy pol = run_backward(inst.stages, inst.quads, inst.grid);
    for (int k = 0; k <= inst.grid.K; ++k) {
      Mat G = assemble_gamma(pol.value[k], pol.grid, inst.d);
      CHECK((G - G.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    }
  }
}

TEST_CASE("H positivity audit on randomized instances") {
  for (unsigned seed = 60; seed < 75; ++seed) {
    auto inst = oracle::random_instance(seed, true);
    Policy pol = run_backward(inst.stages, inst.quads, inst.grid);
    for (int k = 0; k < inst.grid.K; ++k) {
      const Mat& H = pol.gains[k].H;
      const double lo = detail::min_eigenvalue(inst.quads[k].E) -
                        1e-8 * H.norm();
      CHECK(detail::min_eigenvalue(H) >= lo);
    }
  }
}
