#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace inopca::vec {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline void scale(std::span<double> a, double s) {
  for (double& v : a) v *= s;
}

/// a <- a + s * b
inline void axpy(std::span<double> a, double s, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

/// a <- alpha * a + beta * b
inline void axpby(std::span<double> a, double alpha, double beta, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = alpha * a[i] + beta * b[i];
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

} // namespace inopca::vec
