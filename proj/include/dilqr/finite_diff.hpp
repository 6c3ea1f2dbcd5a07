#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace dilqr {

/// Central-difference Jacobian of a vector-valued map at base_point.
/// Step per coordinate: cbrt(eps) * max(1, |z_i|).
inline Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& base_point) {
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::VectorXd f0 = fn(base_point);
  const auto rows = f0.size();
  const auto cols = base_point.size();
  Eigen::MatrixXd J(rows, cols);
  Eigen::VectorXd z = base_point;
  for (Eigen::Index i = 0; i < cols; ++i) {
    const double h = h0 * std::max(1.0, std::abs(base_point[i]));
    z[i] = base_point[i] + h;
    Eigen::VectorXd fp = fn(z);
    z[i] = base_point[i] - h;
    Eigen::VectorXd fm = fn(z);
    z[i] = base_point[i];
    if (!fp.allFinite() || !fm.allFinite())
      throw std::runtime_error(
          "numeric_jacobian: non-finite evaluator output at coordinate " +
          std::to_string(i));
    J.col(i) = (fp - fm) / (2.0 * h);
  }
  return J;
}

}  // namespace dilqr
