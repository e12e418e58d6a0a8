#pragma once

// Dense vector helpers shared by every module. Parameters, gradients and
// basis columns are plain std::vector<double>; functions take spans.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gu {

using Vector = std::vector<double>;
using ConstSpan = std::span<const double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_same_size(ConstSpan a, ConstSpan b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
}

inline double dot(ConstSpan a, ConstSpan b) {
  require_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(ConstSpan a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(ConstSpan a) {
  for (double x : a) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// y += s * x
inline void axpy(double s, ConstSpan x, std::span<double> y) {
  if (x.size() != y.size()) throw DimensionError("axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline Vector scaled(ConstSpan x, double s) {
  Vector out(x.begin(), x.end());
  for (double& v : out) v *= s;
  return out;
}

inline Vector add(ConstSpan a, ConstSpan b) {
  require_same_size(a, b, "add");
  Vector out(a.begin(), a.end());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += b[i];
  return out;
}

inline Vector subtract(ConstSpan a, ConstSpan b) {
  require_same_size(a, b, "subtract");
  Vector out(a.begin(), a.end());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] -= b[i];
  return out;
}

}  // namespace gu
