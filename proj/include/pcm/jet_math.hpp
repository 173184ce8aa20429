#pragma once

// Scalar helpers shared by the double and ceres::Jet instantiations of the
// rendering kernels.

#include <ceres/jet.h>

#include <cmath>

namespace pcm {

inline double value_of(double x) { return x; }
template <typename T, int N>
inline T value_of(const ceres::Jet<T, N>& x) {
  return x.a;
}

inline double log1p_t(double x) { return std::log1p(x); }
template <typename T, int N>
inline ceres::Jet<T, N> log1p_t(const ceres::Jet<T, N>& x) {
  return ceres::Jet<T, N>(std::log1p(x.a), x.v / (T(1) + x.a));
}

inline double expm1_t(double x) { return std::expm1(x); }
template <typename T, int N>
inline ceres::Jet<T, N> expm1_t(const ceres::Jet<T, N>& x) {
  return ceres::Jet<T, N>(std::expm1(x.a), std::exp(x.a) * x.v);
}

/// log(1 + exp(y)) without overflow.
template <typename S>
inline S softplus(const S& y) {
  using std::exp;
  if (value_of(y) > 0.0) return y + log1p_t(exp(-y));
  return log1p_t(exp(y));
}

/// Logistic sigmoid, evaluated on the branch that cannot overflow.
template <typename S>
inline S sigmoid(const S& z) {
  using std::exp;
  if (value_of(z) >= 0.0) return S(1.0) / (S(1.0) + exp(-z));
  const S e = exp(z);
  return e / (S(1.0) + e);
}

}  // namespace pcm
