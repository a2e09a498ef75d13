#pragma once

#include "lassocompat/core.hpp"

#include <functional>

namespace lassocompat {

/// Euclidean projection onto {w >= 0, sum w = radius} (sort-based).
inline Vector project_simplex(const Vector& v, double radius = 1.0) {
  const int n = static_cast<int>(v.size());
  if (n == 0) return v;
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += u[i];
    const double t = (cum - radius) / (i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

/// Projection onto {|w|_1 <= radius}.
inline Vector project_l1_ball(const Vector& v, double radius) {
  if (v.size() == 0 || v.lpNorm<1>() <= radius) return v;
  if (radius <= 0.0) return Vector::Zero(v.size());
  const Vector w = project_simplex(v.cwiseAbs(), radius);
  Vector out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = v[i] < 0.0 ? -w[i] : w[i];
  return out;
}

/// Projection onto the signed simplex {s_j w_j >= 0, sum_j s_j w_j = 1}.
inline Vector project_signed_simplex(const Vector& v, const Vector& signs) {
  const Vector w = project_simplex(v.cwiseProduct(signs), 1.0);
  return w.cwiseProduct(signs);
}

} // namespace lassocompat
