#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "dilqr/oracle.hpp"

namespace dilqr {
namespace verify {

constexpr double kAgreementTol = 1e-8;   // oracle cross-check tolerance
constexpr double kReductionTol = 1e-10;  // delay-free reduction tolerance
constexpr double kPsdTol = 1e-8;         // relative PSD audit tolerance

struct InstanceCheck {
  unsigned seed = 0;
  double gain_dev = 0.0;    // backward pass vs augmented Riccati, max-abs
  double value_dev = 0.0;   // value coefficients / Gamma deviation, max-abs
  double cost_dev = 0.0;    // relative cost deviation across methods
  double h_margin = 0.0;    // min over k of mineig(H_k) - mineig(E_k) + tol*|H|
  double gamma_margin = 0.0;  // min over k of mineig(Gamma_k) + tol*|Gamma|
  bool pass = false;
};

namespace detail {

inline double max_abs_gain_dev(const std::vector<StageGains>& a,
                               const std::vector<StageGains>& b) {
  double dev = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    dev = std::max(dev, (a[k].iota - b[k].iota).lpNorm<Eigen::Infinity>());
    dev = std::max(dev, (a[k].L - b[k].L).lpNorm<Eigen::Infinity>());
    for (size_t i = 0; i < a[k].M.size(); ++i)
      dev = std::max(dev, (a[k].M[i] - b[k].M[i]).lpNorm<Eigen::Infinity>());
  }
  return dev;
}

inline double rel_dev(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace detail

/// Appendix audits on a solved policy: H positivity relative to E, and
/// nonnegativity of every assembled Gamma_k. Returns the two margins
/// (nonnegative margins mean the audit passes).
inline std::pair<double, double> psd_audit(const Policy& pol,
                                           const std::vector<QuadStage>& quads,
                                           int d) {
  double h_margin = std::numeric_limits<double>::infinity();
  double gamma_margin = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < pol.gains.size(); ++k) {
    const Mat& H = pol.gains[k].H;
    const double floor =
        dilqr::detail::min_eigenvalue(quads[k].E) - kPsdTol * H.norm();
    h_margin = std::min(h_margin, dilqr::detail::min_eigenvalue(H) - floor);
  }
  for (size_t k = 0; k < pol.value.size(); ++k) {
    const Mat G = assemble_gamma(pol.value[k], pol.grid, d);
    gamma_margin = std::min(
        gamma_margin, dilqr::detail::min_eigenvalue(G) + kPsdTol * G.norm());
  }
  return {h_margin, gamma_margin};
}

/// Deterministic oracle triangle on one instance: backward pass vs
/// augmented Riccati (gains) vs batch quadratic solve (cost), plus the
/// Appendix PSD audits.
inline InstanceCheck check_deterministic(unsigned seed) {
  auto inst = oracle::random_instance(seed, /*with_noise=*/false);
  InstanceCheck chk;
  chk.seed = seed;
  Policy pol = run_backward(inst.stages, inst.quads, inst.grid);
  auto aug = oracle::augmented_riccati(inst.stages, inst.quads, inst.grid);
  auto batch = oracle::batch_quadratic_solve(inst.stages, inst.quads, inst.grid);

  chk.gain_dev = detail::max_abs_gain_dev(pol.gains, aug.gains);
  chk.cost_dev = detail::rel_dev(pol.predicted_cost(), batch.cost);
  for (size_t k = 0; k < pol.value.size(); ++k) {
    const Mat G = assemble_gamma(pol.value[k], pol.grid, inst.d);
    chk.value_dev =
        std::max(chk.value_dev, (G - aug.value[k]).lpNorm<Eigen::Infinity>());
  }
  auto [hm, gm] = psd_audit(pol, inst.quads, inst.d);
  chk.h_margin = hm;
  chk.gamma_margin = gm;
  chk.pass = chk.gain_dev <= kAgreementTol && chk.cost_dev <= kAgreementTol &&
             chk.h_margin >= 0.0 && chk.gamma_margin >= 0.0;
  return chk;
}

/// Multiplicative-noise agreement on one instance: value coefficients vs the
/// augmented Riccati, and predicted J(0) vs exact moment propagation of the
/// produced policy.
inline InstanceCheck check_noisy(unsigned seed) {
  auto inst = oracle::random_instance(seed, /*with_noise=*/true);
  InstanceCheck chk;
  chk.seed = seed;
  Policy pol = run_backward(inst.stages, inst.quads, inst.grid);
  auto aug = oracle::augmented_riccati(inst.stages, inst.quads, inst.grid);

  chk.gain_dev = detail::max_abs_gain_dev(pol.gains, aug.gains);
  // s0-tilde, s0, S0 live in the (z,1) value matrix restricted to zero history
  const Mat& V0 = aug.value[0];
  const int n = inst.n;
  const int nz = static_cast<int>(V0.rows()) - 1;
  const ValueCoeffs& v0 = pol.value[0];
  chk.value_dev = std::abs(v0.s_tilde - V0(nz, nz));
  chk.value_dev = std::max(
      chk.value_dev,
      (v0.s_vec - V0.block(0, nz, n, 1)).lpNorm<Eigen::Infinity>());
  chk.value_dev = std::max(
      chk.value_dev,
      (v0.S - V0.topLeftCorner(n, n)).lpNorm<Eigen::Infinity>());

  const double mp =
      oracle::moment_propagation_cost(inst.stages, inst.quads, inst.grid, pol);
  chk.cost_dev = detail::rel_dev(pol.predicted_cost(), mp);

  auto [hm, gm] = psd_audit(pol, inst.quads, inst.d);
  chk.h_margin = hm;
  chk.gamma_margin = gm;
  chk.pass = chk.gain_dev <= kAgreementTol && chk.value_dev <= kAgreementTol &&
             chk.cost_dev <= kAgreementTol && chk.h_margin >= 0.0 &&
             chk.gamma_margin >= 0.0;
  return chk;
}

/// Delay-free reduction: with B1 = C1 = 0 the delay recursion must match the
/// independent delay-free LQR and all tap blocks must vanish exactly.
inline InstanceCheck check_reduction(unsigned seed) {
  auto inst = oracle::random_instance(seed, /*with_noise=*/true);
  for (auto& st : inst.stages) {
    st.B1.setZero();
    for (auto& C : st.C1) C.setZero();
  }
  InstanceCheck chk;
  chk.seed = seed;
  Policy pol = run_backward(inst.stages, inst.quads, inst.grid);
  auto ref = oracle::delay_free_lqr(inst.stages, inst.quads, inst.grid);

  for (int k = 0; k < inst.grid.K; ++k) {
    chk.gain_dev = std::max(
        chk.gain_dev,
        (pol.gains[k].iota - ref.iota[k]).lpNorm<Eigen::Infinity>());
    chk.gain_dev = std::max(
        chk.gain_dev, (pol.gains[k].L - ref.L[k]).lpNorm<Eigen::Infinity>());
  }
  for (int k = 0; k <= inst.grid.K; ++k) {
    const ValueCoeffs& v = pol.value[k];
    chk.value_dev = std::max(chk.value_dev, std::abs(v.s_tilde - ref.s_tilde[k]));
    chk.value_dev = std::max(
        chk.value_dev, (v.s_vec - ref.s_vec[k]).lpNorm<Eigen::Infinity>());
    chk.value_dev =
        std::max(chk.value_dev, (v.S - ref.S[k]).lpNorm<Eigen::Infinity>());
    // all tap blocks must be exactly zero
    double taps = 0.0;
    for (const auto& r : v.r) taps = std::max(taps, r.lpNorm<Eigen::Infinity>());
    for (const auto& Rt : v.R_tilde)
      taps = std::max(taps, Rt.lpNorm<Eigen::Infinity>());
    for (const auto& row : v.R)
      for (const auto& R : row) taps = std::max(taps, R.lpNorm<Eigen::Infinity>());
    if (k < inst.grid.K)
      for (const auto& M : pol.gains[k].M)
        taps = std::max(taps, M.lpNorm<Eigen::Infinity>());
    if (taps != 0.0) chk.gain_dev = std::numeric_limits<double>::infinity();
  }
  chk.pass = chk.gain_dev <= kReductionTol && chk.value_dev <= kReductionTol;
  return chk;
}

struct Report {
  std::vector<InstanceCheck> deterministic;
  std::vector<InstanceCheck> noisy;
  std::vector<InstanceCheck> reduction;

  bool all_pass() const {
    auto ok = [](const std::vector<InstanceCheck>& v) {
      for (const auto& c : v)
        if (!c.pass) return false;
      return true;
    };
    return ok(deterministic) && ok(noisy) && ok(reduction);
  }

  std::vector<unsigned> failing_seeds() const {
    std::vector<unsigned> out;
    for (const auto* group : {&deterministic, &noisy, &reduction})
      for (const auto& c : *group)
        if (!c.pass) out.push_back(c.seed);
    return out;
  }
};

inline Report run_suite(unsigned base_seed, int instances,
                        int reduction_instances = 20) {
  Report rep;
  for (int i = 0; i < instances; ++i)
    rep.deterministic.push_back(check_deterministic(base_seed + i));
  for (int i = 0; i < instances; ++i)
    rep.noisy.push_back(check_noisy(base_seed + 1000 + i));
  for (int i = 0; i < reduction_instances; ++i)
    rep.reduction.push_back(check_reduction(base_seed + 2000 + i));
  return rep;
}

inline void write_report(std::ostream& out, const Report& rep) {
  auto dump = [&out](const char* name, const std::vector<InstanceCheck>& v) {
    for (const auto& c : v)
      out << name << " seed=" << c.seed << " gain_dev=" << c.gain_dev
          << " value_dev=" << c.value_dev << " cost_dev=" << c.cost_dev
          << " h_margin=" << c.h_margin << " gamma_margin=" << c.gamma_margin
          << " " << (c.pass ? "pass" : "FAIL") << "\n";
  };
  dump("deterministic", rep.deterministic);
  dump("noisy", rep.noisy);
  dump("reduction", rep.reduction);
  out << (rep.all_pass() ? "ALL PASS" : "FAILURES PRESENT") << "\n";
}

}  // namespace verify
}  // namespace dilqr
