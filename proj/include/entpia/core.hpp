#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace entpia {

/// Largest supported state / action dimension.
inline constexpr int kMaxDim = 2;

/// Fixed-capacity point in state or action space; only the first `dim` entries are used.
using Vec = std::array<double, kMaxDim>;

/// Symmetric 2x2 matrix. One-dimensional problems only use `xx`.
struct Sym {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  double operator()(int i, int j) const {
    if (i == 0 && j == 0) return xx;
    if (i == 1 && j == 1) return yy;
    return xy;
  }
  Sym& operator+=(const Sym& o) {
    xx += o.xx;
    xy += o.xy;
    yy += o.yy;
    return *this;
  }
  friend Sym operator*(double s, const Sym& m) { return {s * m.xx, s * m.xy, s * m.yy}; }
  friend Sym operator-(const Sym& a, const Sym& b) { return {a.xx - b.xx, a.xy - b.xy, a.yy - b.yy}; }

  /// Smallest eigenvalue; `dim` selects the 1x1 or 2x2 block.
  double min_eigenvalue(int dim) const {
    if (dim == 1) return xx;
    const double mean = 0.5 * (xx + yy);
    const double rad = std::hypot(0.5 * (xx - yy), xy);
    return mean - rad;
  }
  /// Entrywise max norm |X| := max |x_ij|.
  double max_abs(int dim) const {
    if (dim == 1) return std::abs(xx);
    return std::max({std::abs(xx), std::abs(xy), std::abs(yy)});
  }
};

/// Diffusion factor sigma (d x m, m <= 2); unused entries stay zero.
struct VolMatrix {
  std::array<std::array<double, kMaxDim>, kMaxDim> a{};

  /// sigma sigma^T restricted to the leading `dim` block.
  Sym covariance() const {
    Sym s;
    s.xx = a[0][0] * a[0][0] + a[0][1] * a[0][1];
    s.xy = a[0][0] * a[1][0] + a[0][1] * a[1][1];
    s.yy = a[1][0] * a[1][0] + a[1][1] * a[1][1];
    return s;
  }
  double max_abs(int dim) const {
    double m = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < kMaxDim; ++j) m = std::max(m, std::abs(a[i][j]));
    return m;
  }
};

inline double norm2(const Vec& x, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += x[k] * x[k];
  return std::sqrt(s);
}

inline double max_abs(const Vec& x, int dim) {
  double m = 0.0;
  for (int k = 0; k < dim; ++k) m = std::max(m, std::abs(x[k]));
  return m;
}

inline std::string format_point(const Vec& x, int dim) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (int k = 0; k < dim; ++k) os << (k ? ", " : "") << x[k];
  os << ')';
  return os.str();
}

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Coefficient evaluation failure (domain error, non-finite value) at a specific point.
class EvalError : public Error {
 public:
  using Error::Error;
};

/// Linear solver failure; carries the residuals observed before giving up.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

}  // namespace entpia
