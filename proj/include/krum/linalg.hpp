#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "krum/errors.hpp"

namespace krum {

// A dense d-dimensional real vector: a proposed gradient, a true gradient or
// a parameter vector.
using Vector = std::vector<double>;

// Squared Euclidean distance, accumulated in natural component order.
inline double sq_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return acc;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

inline double sq_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(sq_norm(a)); }

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

inline Vector zeros(std::size_t d) { return Vector(d, 0.0); }

inline Vector unit_vector(std::size_t d, std::size_t axis) {
  Vector e(d, 0.0);
  e.at(axis) = 1.0;
  return e;
}

inline Vector scaled(std::span<const double> a, double s) {
  Vector out(a.begin(), a.end());
  for (double& v : out) v *= s;
  return out;
}

inline Vector difference(std::span<const double> a, std::span<const double> b) {
  Vector out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
  return out;
}

// y += s * x
inline void add_scaled(Vector& y, std::span<const double> x, double s) {
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += s * x[k];
}

inline void add_to(Vector& y, std::span<const double> x) {
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += x[k];
}

inline void require_dimension(std::span<const double> v, std::size_t d, const std::string& what) {
  if (v.size() != d)
    throw InvalidInput(what + ": dimension mismatch (expected " + std::to_string(d) + ", got " +
                       std::to_string(v.size()) + ")");
}

inline void require_finite(std::span<const double> v, const std::string& what) {
  if (!all_finite(v)) throw InvalidInput(what + ": non-finite component");
}

}  // namespace krum
