#pragma once

#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dilqr/forward_pass.hpp"

namespace dilqr {
namespace artifacts {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  return out;
}

inline void write_mat(std::ostream& out, const Mat& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    out << "   ";
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << " " << M(i, j);
    out << "\n";
  }
}

}  // namespace detail

/// Trajectory table: one row per step, delimiter-separated with a header.
/// The terminal row carries the state only.
inline void write_trajectory(const std::string& path, const TimeGrid& grid,
                             const NominalTrajectory& traj) {
  auto out = detail::open_out(path);
  const auto n = traj.xs[0].size();
  const auto d = traj.us.empty() ? 0 : traj.us[0].size();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  for (Eigen::Index i = 0; i < d; ++i) out << ",u" << i;
  out << "\n";
  for (int k = 0; k <= grid.K; ++k) {
    out << k * grid.dt;
    for (Eigen::Index i = 0; i < n; ++i) out << "," << traj.xs[k][i];
    for (Eigen::Index i = 0; i < d; ++i) {
      out << ",";
      if (k < grid.K) out << traj.us[k][i];
    }
    out << "\n";
  }
}

/// Per-step gains (iota, L, M taps) as a structured text document.
inline void write_gains(const std::string& path, const Policy& policy) {
  auto out = detail::open_out(path);
  for (size_t k = 0; k < policy.gains.size(); ++k) {
    const StageGains& g = policy.gains[k];
    out << "step " << k << "\n";
    out << "  iota (" << g.iota.size() << ")\n";
    detail::write_mat(out, g.iota);
    out << "  L (" << g.L.rows() << "x" << g.L.cols() << ")\n";
    detail::write_mat(out, g.L);
    for (size_t i = 0; i < g.M.size(); ++i) {
      out << "  M" << i << " (" << g.M[i].rows() << "x" << g.M[i].cols()
          << ")\n";
      detail::write_mat(out, g.M[i]);
    }
  }
}

inline void write_iterations(const std::string& path,
                             const std::vector<IterationReport>& reports) {
  auto out = detail::open_out(path);
  out << "iteration,cost,alpha,grad_norm,converged\n";
  for (const auto& r : reports)
    out << r.iteration << "," << r.cost << "," << r.step_alpha << ","
        << r.grad_norm << "," << (r.converged ? 1 : 0) << "\n";
}

inline void write_summary(const std::string& path, const SolveResult& res) {
  auto out = detail::open_out(path);
  out << "final_cost " << res.final_cost << "\n";
  out << "iterations " << res.reports.size() << "\n";
  out << "converged " << (res.converged ? 1 : 0) << "\n";
  out << "reason " << res.reason << "\n";
}

// ---------------------------------------------------------------------------
// Policy artifact: everything needed to re-run the closed loop (grid,
// nominal trajectory, per-step gains), full double precision.
// ---------------------------------------------------------------------------

inline void save_policy(const std::string& path, const Policy& policy, int n,
                        int d) {
  auto out = detail::open_out(path);
  out << "dilqr-policy 1\n";
  out << "dims " << n << " " << d << "\n";
  out << "grid " << policy.grid.dt << " " << policy.grid.K << " "
      << policy.grid.l << "\n";
  for (int k = 0; k <= policy.grid.K; ++k) {
    out << "x " << k;
    for (int i = 0; i < n; ++i) out << " " << policy.nominal.xs[k][i];
    out << "\n";
  }
  for (int k = 0; k < policy.grid.K; ++k) {
    out << "u " << k;
    for (int i = 0; i < d; ++i) out << " " << policy.nominal.us[k][i];
    out << "\n";
  }
  for (int k = 0; k < policy.grid.K; ++k) {
    const StageGains& g = policy.gains[k];
    out << "gain " << k << " " << g.M.size() << "\n";
    out << "iota";
    for (int i = 0; i < d; ++i) out << " " << g.iota[i];
    out << "\n";
    out << "L";
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < n; ++j) out << " " << g.L(i, j);
    out << "\n";
    for (size_t m = 0; m < g.M.size(); ++m) {
      out << "M " << m;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out << " " << g.M[m](i, j);
      out << "\n";
    }
  }
}

inline Policy load_policy(const std::string& path, int* n_out = nullptr,
                          int* d_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open policy artifact: " + path);
  in.imbue(std::locale::classic());
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "dilqr-policy" || version != 1)
    throw IoError("not a dilqr policy artifact: " + path);
  int n = 0, d = 0;
  in >> tag >> n >> d;
  if (tag != "dims") throw IoError("policy artifact: expected dims");
  Policy pol;
  in >> tag >> pol.grid.dt >> pol.grid.K >> pol.grid.l;
  if (tag != "grid") throw IoError("policy artifact: expected grid");
  const int K = pol.grid.K;
  pol.nominal.xs.assign(K + 1, Vec(n));
  pol.nominal.us.assign(K, Vec(d));
  pol.gains.resize(K);
  int k = 0;
  for (int r = 0; r <= K; ++r) {
    in >> tag >> k;
    for (int i = 0; i < n; ++i) in >> pol.nominal.xs[k][i];
  }
  for (int r = 0; r < K; ++r) {
    in >> tag >> k;
    for (int i = 0; i < d; ++i) in >> pol.nominal.us[k][i];
  }
  for (int r = 0; r < K; ++r) {
    size_t taps = 0;
    in >> tag >> k >> taps;
    if (tag != "gain") throw IoError("policy artifact: expected gain block");
    StageGains g;
    g.iota = Vec(d);
    g.L = Mat(d, n);
    in >> tag;
    for (int i = 0; i < d; ++i) in >> g.iota[i];
    in >> tag;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < n; ++j) in >> g.L(i, j);
    g.M.resize(taps);
    for (size_t m = 0; m < taps; ++m) {
      int mi = 0;
      in >> tag >> mi;
      g.M[m] = Mat(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) in >> g.M[m](i, j);
    }
    pol.gains[k] = std::move(g);
  }
  if (!in) throw IoError("policy artifact truncated: " + path);
  if (n_out) *n_out = n;
  if (d_out) *d_out = d;
  return pol;
}

inline void write_simulation_stats(const std::string& path,
                                   const SimulationResult& sim,
                                   bool with_terminals = false) {
  auto out = detail::open_out(path);
  out << "mean_cost " << sim.mean_cost << "\n";
  out << "stderr " << sim.std_error << "\n";
  out << "divergent " << sim.divergent << "\n";
  out << "trials " << sim.costs.size() + sim.divergent << "\n";
  if (with_terminals) {
    for (const auto& x : sim.terminal_states) {
      out << "terminal";
      for (Eigen::Index i = 0; i < x.size(); ++i) out << " " << x[i];
      out << "\n";
    }
  }
}

}  // namespace artifacts
}  // namespace dilqr
