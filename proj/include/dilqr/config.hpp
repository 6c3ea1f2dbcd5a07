#pragma once

#include <algorithm>
#include <fstream>
#include <locale>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dilqr/forward_pass.hpp"
#include "dilqr/models.hpp"

namespace dilqr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat configuration: dotted keys ("grid.K") with string values, insertion
/// order preserved. Serialized as INI-style sections; matrices are row-major
/// literals with ';' between rows.
class Config {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = value;
        return;
      }
    entries_.emplace_back(key, value);
  }

  bool has(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e.first == key; });
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    throw ConfigError("missing config key: " + key);
  }

  std::string get_or(const std::string& key, const std::string& def) const {
    return has(key) ? get(key) : def;
  }

  double get_double(const std::string& key) const {
    return parse_double(get(key), key);
  }
  double get_double_or(const std::string& key, double def) const {
    return has(key) ? get_double(key) : def;
  }
  int get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
      size_t pos = 0;
      int out = std::stoi(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " is not an integer: " + v);
    }
  }
  int get_int_or(const std::string& key, int def) const {
    return has(key) ? get_int(key) : def;
  }

  Mat get_matrix(const std::string& key) const {
    const std::string& v = get(key);
    std::vector<std::vector<double>> rows;
    std::stringstream row_stream(v);
    std::string row;
    while (std::getline(row_stream, row, ';')) {
      std::istringstream cell(row);
      cell.imbue(std::locale::classic());
      std::vector<double> vals;
      double x;
      while (cell >> x) vals.push_back(x);
      if (!vals.empty()) rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ConfigError("config key " + key + ": empty matrix");
    Mat M(rows.size(), rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size())
        throw ConfigError("config key " + key + ": ragged matrix rows");
      for (size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
    }
    return M;
  }

  Vec get_vector(const std::string& key) const {
    Mat M = get_matrix(key);
    if (M.rows() != 1 && M.cols() != 1)
      throw ConfigError("config key " + key + " is not a vector");
    return M.rows() == 1 ? Vec(M.transpose().col(0)) : Vec(M.col(0));
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  bool operator==(const Config& other) const {
    return entries_ == other.entries_;
  }

  /// Applies a "section.key=value" override.
  void apply_override(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must be key=value: " + spec);
    set(trim(spec.substr(0, eq)), trim(spec.substr(eq + 1)));
  }

  static Config parse(std::istream& in) {
    Config cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("line " + std::to_string(lineno) +
                            ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) +
                          ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      cfg.set(key, trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse(in);
  }

  void serialize(std::ostream& out) const {
    std::string current;
    for (const auto& [k, v] : entries_) {
      const auto dot = k.find('.');
      const std::string section = dot == std::string::npos ? "" : k.substr(0, dot);
      const std::string name = dot == std::string::npos ? k : k.substr(dot + 1);
      if (section != current) {
        out << "[" << section << "]\n";
        current = section;
      }
      out << name << " = " << v << "\n";
    }
  }

 private:
  static std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
  }
  static double parse_double(const std::string& v, const std::string& key) {
    std::istringstream ss(v);
    ss.imbue(std::locale::classic());
    double out;
    if (!(ss >> out) || !(ss >> std::ws).eof())
      throw ConfigError("config key " + key + " is not a number: " + v);
    return out;
  }

  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Builds the problem described by the [problem] and [grid] sections.
inline ContinuousProblem problem_from_config(const Config& cfg) {
  const std::string model = cfg.get("problem.model");
  const double t_f = cfg.get_double("grid.t_f");
  const double tau = cfg.get_double("grid.tau");

  if (model == "reach") {
    models::ReachParams prm;
    prm.m = cfg.get_double_or("problem.m", prm.m);
    prm.b = cfg.get_double_or("problem.b", prm.b);
    prm.sigma = cfg.get_double_or("problem.sigma", prm.sigma);
    prm.target = cfg.get_double_or("problem.target", prm.target);
    prm.q = cfg.get_double_or("problem.q", prm.q);
    prm.w_pos = cfg.get_double_or("problem.w_pos", prm.w_pos);
    prm.w_vel = cfg.get_double_or("problem.w_vel", prm.w_vel);
    if (prm.m <= 0) throw ConfigError("problem.m must be positive");
    if (prm.b < 0 || prm.sigma < 0)
      throw ConfigError("problem.b and problem.sigma must be nonnegative");
    prm.tau = tau;
    prm.t_f = t_f;
    return models::make_reach_model(prm);
  }
  if (model == "sinusoid") {
    models::SinusoidParams prm;
    prm.a = cfg.get_double_or("problem.a", prm.a);
    prm.b = cfg.get_double_or("problem.b", prm.b);
    prm.target = cfg.get_double_or("problem.target", prm.target);
    prm.q = cfg.get_double_or("problem.q", prm.q);
    prm.tau = tau;
    prm.t_f = t_f;
    return models::make_sinusoid_model(prm);
  }
  if (model == "linear") {
    models::LinearSystem sys;
    sys.A = cfg.get_matrix("problem.A");
    sys.B0 = cfg.get_matrix("problem.B0");
    sys.B1 = cfg.has("problem.B1") ? cfg.get_matrix("problem.B1")
                                   : Mat(Mat::Zero(sys.A.rows(), sys.B0.cols()));
    sys.F0 = cfg.has("problem.F0") ? cfg.get_matrix("problem.F0")
                                   : Mat(Mat::Zero(sys.A.rows(), 0));
    sys.x0 = cfg.get_vector("problem.x0");
    sys.x_target = cfg.get_vector("problem.x_target");
    sys.P_tf = cfg.get_matrix("problem.P_tf");
    sys.P = cfg.has("problem.P") ? cfg.get_matrix("problem.P")
                                 : Mat(Mat::Zero(sys.A.rows(), sys.A.rows()));
    sys.Q = cfg.get_matrix("problem.Q");
    sys.tau = tau;
    sys.t_f = t_f;
    return models::make_linear_problem(sys);
  }
  throw ConfigError("unknown problem.model: " + model);
}

inline SolveOptions solver_options_from_config(const Config& cfg) {
  SolveOptions opts;
  opts.max_iterations = cfg.get_int_or("solver.max_iterations", opts.max_iterations);
  opts.cost_tol = cfg.get_double_or("solver.cost_tol", opts.cost_tol);
  opts.grad_tol = cfg.get_double_or("solver.grad_tol", opts.grad_tol);
  opts.line_search_steps =
      cfg.get_int_or("solver.line_search_steps", opts.line_search_steps);
  opts.line_search_margin =
      cfg.get_double_or("solver.line_search_margin", opts.line_search_margin);
  return opts;
}

}  // namespace dilqr
