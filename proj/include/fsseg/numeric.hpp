#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace fsseg {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum(exp(v))) with max subtraction. -inf entries contribute nothing;
// an all -inf input yields -inf.
template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

inline double log_sum_exp(double a, double b) {
  const double m = a > b ? a : b;
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

}  // namespace fsseg
