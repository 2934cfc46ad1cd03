#pragma once

// Uniform tensor grids on a truncated box, nodal fields and derivative stencils.
//
// Node enumeration is row-major: in 2D the node (i0, i1) has index i0 * n1 + i1,
// so the last axis varies fastest.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "entpia/core.hpp"
#include "entpia/problem.hpp"

namespace entpia {

struct Grid {
  int dim = 1;
  Box box;
  std::array<int, kMaxDim> n{1, 1};
  Vec h{};
  double core_fraction = 1.0;
  Box core;

  std::size_t size() const {
    std::size_t s = 1;
    for (int k = 0; k < dim; ++k) s *= static_cast<std::size_t>(n[k]);
    return s;
  }
  std::size_t index(int i0, int i1 = 0) const {
    return dim == 1 ? static_cast<std::size_t>(i0) : static_cast<std::size_t>(i0) * n[1] + i1;
  }
  std::array<int, kMaxDim> multi(std::size_t idx) const {
    if (dim == 1) return {static_cast<int>(idx), 0};
    return {static_cast<int>(idx / n[1]), static_cast<int>(idx % n[1])};
  }
  /// Flat-index offset of one step along `axis`.
  std::size_t stride(int axis) const { return (dim == 2 && axis == 0) ? static_cast<std::size_t>(n[1]) : 1; }
  double coord(int axis, int i) const { return box.lo[axis] + i * h[axis]; }
  Vec point(std::size_t idx) const {
    const auto m = multi(idx);
    Vec x{};
    for (int k = 0; k < dim; ++k) x[k] = coord(k, m[k]);
    return x;
  }
  bool on_boundary(std::size_t idx) const {
    const auto m = multi(idx);
    for (int k = 0; k < dim; ++k)
      if (m[k] == 0 || m[k] == n[k] - 1) return true;
    return false;
  }
  bool in_core(std::size_t idx) const {
    const Vec x = point(idx);
    for (int k = 0; k < dim; ++k) {
      const double tol = 1e-9 * h[k];
      if (x[k] < core.lo[k] - tol || x[k] > core.hi[k] + tol) return false;
    }
    return true;
  }
  std::vector<std::size_t> core_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (in_core(i)) out.push_back(i);
    return out;
  }
  bool same_shape(const Grid& o) const {
    if (dim != o.dim) return false;
    for (int k = 0; k < dim; ++k)
      if (n[k] != o.n[k] || box.lo[k] != o.box.lo[k] || box.hi[k] != o.box.hi[k]) return false;
    return true;
  }
};

/// Uniform grid with `n[k]` nodes per axis; the core is the box scaled by
/// `core_fraction` about its center.
inline Grid build_grid(const Box& box, std::array<int, kMaxDim> n, double core_fraction) {
  if (box.dim < 1 || box.dim > kMaxDim) throw InvalidArgument("grid dimension must be 1 or 2");
  if (!(core_fraction > 0.0 && core_fraction <= 1.0)) throw InvalidArgument("core_fraction must lie in (0,1]");
  Grid g;
  g.dim = box.dim;
  g.box = box;
  g.core_fraction = core_fraction;
  for (int k = 0; k < g.dim; ++k) {
    if (!(box.hi[k] > box.lo[k]) || !std::isfinite(box.hi[k] - box.lo[k]))
      throw InvalidArgument("degenerate box on axis " + std::to_string(k));
    if (n[k] < 5) throw InvalidArgument("at least 5 nodes per axis are required");
    g.n[k] = n[k];
    g.h[k] = (box.hi[k] - box.lo[k]) / (n[k] - 1);
  }
  if (g.dim == 1) g.n[1] = 1;
  g.core = box.scaled(core_fraction);
  return g;
}

inline Grid build_grid(const Box& box, int n, double core_fraction) {
  return build_grid(box, {n, n}, core_fraction);
}

/// Grid with the same box and 2(n-1)+1 nodes per axis; every coarse node is a fine node.
inline Grid refine(const Grid& g) {
  std::array<int, kMaxDim> n = g.n;
  for (int k = 0; k < g.dim; ++k) n[k] = 2 * (g.n[k] - 1) + 1;
  return build_grid(g.box, n, g.core_fraction);
}

struct ScalarField {
  Grid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
  ScalarField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw InvalidArgument("field size does not match grid");
  }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }

  template <class F>
  static ScalarField sample(const Grid& g, F&& f) {
    ScalarField s(g);
    for (std::size_t i = 0; i < g.size(); ++i) s.values[i] = f(g.point(i));
    return s;
  }
  bool finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

using VectorField = std::vector<Vec>;
using MatrixField = std::vector<Sym>;

inline double sup_norm(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

inline double sup_norm(const ScalarField& f, const std::vector<std::size_t>& nodes) {
  double m = 0.0;
  for (std::size_t i : nodes) m = std::max(m, std::abs(f.values[i]));
  return m;
}

inline ScalarField operator-(const ScalarField& a, const ScalarField& b) {
  if (!a.grid.same_shape(b.grid)) throw InvalidArgument("field grids differ");
  ScalarField out(a.grid);
  for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] - b.values[i];
  return out;
}

/// Restriction of a fine-grid field onto a nested coarse grid by nodal injection.
inline ScalarField inject(const ScalarField& fine, const Grid& coarse) {
  const Grid& gf = fine.grid;
  if (gf.dim != coarse.dim) throw InvalidArgument("grids are not nested");
  std::array<int, kMaxDim> ratio{1, 1};
  for (int k = 0; k < coarse.dim; ++k) {
    if (gf.box.lo[k] != coarse.box.lo[k] || gf.box.hi[k] != coarse.box.hi[k] || (gf.n[k] - 1) % (coarse.n[k] - 1) != 0)
      throw InvalidArgument("grids are not nested");
    ratio[k] = (gf.n[k] - 1) / (coarse.n[k] - 1);
  }
  ScalarField out(coarse);
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const auto m = coarse.multi(i);
    out.values[i] = fine.values[gf.index(m[0] * ratio[0], m[1] * ratio[1])];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Derivative stencils

namespace detail {

/// Second-order first derivative along `axis` at node `m`, one-sided at the ends.
inline double central_diff(const ScalarField& f, const std::array<int, kMaxDim>& m, int axis) {
  const Grid& g = f.grid;
  const std::size_t i = g.index(m[0], m[1]);
  const std::size_t s = g.stride(axis);
  const double h = g.h[axis];
  const int j = m[axis];
  if (j == 0) return (-3.0 * f[i] + 4.0 * f[i + s] - f[i + 2 * s]) / (2.0 * h);
  if (j == g.n[axis] - 1) return (3.0 * f[i] - 4.0 * f[i - s] + f[i - 2 * s]) / (2.0 * h);
  return (f[i + s] - f[i - s]) / (2.0 * h);
}

inline double second_diff(const ScalarField& f, const std::array<int, kMaxDim>& m, int axis) {
  const Grid& g = f.grid;
  auto mm = m;
  mm[axis] = std::clamp(m[axis], 1, g.n[axis] - 2);
  const std::size_t c = g.index(mm[0], mm[1]);
  const std::size_t s = g.stride(axis);
  const double h = g.h[axis];
  return (f[c + s] - 2.0 * f[c] + f[c - s]) / (h * h);
}

inline double cross_diff(const ScalarField& f, const std::array<int, kMaxDim>& m) {
  const Grid& g = f.grid;
  const int i0 = std::clamp(m[0], 1, g.n[0] - 2);
  const int i1 = std::clamp(m[1], 1, g.n[1] - 2);
  auto v = [&](int a, int b) { return f[g.index(a, b)]; };
  return (v(i0 + 1, i1 + 1) - v(i0 + 1, i1 - 1) - v(i0 - 1, i1 + 1) + v(i0 - 1, i1 - 1)) / (4.0 * g.h[0] * g.h[1]);
}

}  // namespace detail

enum class GradientScheme { central, upwind };

/// Gradient field. Central: second order, one-sided second order at the ends.
/// Upwind: first-order difference taken on the side the drift points to
/// (forward for b > 0, backward for b < 0, central for b = 0), switching to the
/// available side at the ends.
inline VectorField gradient(const ScalarField& f, GradientScheme scheme = GradientScheme::central,
                            const VectorField* drift = nullptr) {
  const Grid& g = f.grid;
  if (f.values.size() != g.size()) throw InvalidArgument("field size does not match grid");
  if (scheme == GradientScheme::upwind && (!drift || drift->size() != g.size()))
    throw InvalidArgument("upwind gradient needs a drift field of matching shape");
  VectorField out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto m = g.multi(i);
    for (int k = 0; k < g.dim; ++k) {
      if (scheme == GradientScheme::central) {
        out[i][k] = detail::central_diff(f, m, k);
        continue;
      }
      const double b = (*drift)[i][k];
      const std::size_t s = g.stride(k);
      const bool can_fwd = m[k] < g.n[k] - 1;
      const bool can_bwd = m[k] > 0;
      bool fwd = b > 0.0;
      if (b == 0.0) {
        if (can_fwd && can_bwd) {
          out[i][k] = (f[i + s] - f[i - s]) / (2.0 * g.h[k]);
          continue;
        }
        fwd = can_fwd;
      }
      if (fwd && !can_fwd) fwd = false;
      if (!fwd && !can_bwd) fwd = true;
      out[i][k] = fwd ? (f[i + s] - f[i]) / g.h[k] : (f[i] - f[i - s]) / g.h[k];
    }
  }
  return out;
}

/// Hessian field: 3-point second differences on the diagonal and the 4-point
/// cross difference off it; boundary nodes use the nearest interior stencil.
inline MatrixField hessian(const ScalarField& f) {
  const Grid& g = f.grid;
  if (f.values.size() != g.size()) throw InvalidArgument("field size does not match grid");
  MatrixField out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto m = g.multi(i);
    out[i].xx = detail::second_diff(f, m, 0);
    if (g.dim == 2) {
      out[i].yy = detail::second_diff(f, m, 1);
      out[i].xy = detail::cross_diff(f, m);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  os.write(buf, 8);
}

inline double get_f64(std::istream& is) {
  char buf[8];
  if (!is.read(buf, 8)) throw Error("truncated field file");
  std::uint64_t bits;
  std::memcpy(&bits, buf, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

/// Binary layout, all little-endian f64: dim, n_0..n_{dim-1}, lo_0, hi_0, ..., then
/// the values in row-major node order.
inline void write_field_binary(const std::filesystem::path& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const Grid& g = f.grid;
  detail::put_f64(os, g.dim);
  for (int k = 0; k < g.dim; ++k) detail::put_f64(os, g.n[k]);
  for (int k = 0; k < g.dim; ++k) {
    detail::put_f64(os, g.box.lo[k]);
    detail::put_f64(os, g.box.hi[k]);
  }
  for (double v : f.values) detail::put_f64(os, v);
  if (!os) throw Error("write failed for " + path.string());
}

inline ScalarField read_field_binary(const std::filesystem::path& path, double core_fraction = 1.0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  const int dim = static_cast<int>(detail::get_f64(is));
  if (dim < 1 || dim > kMaxDim) throw Error("bad field header in " + path.string());
  std::array<int, kMaxDim> n{1, 1};
  for (int k = 0; k < dim; ++k) n[k] = static_cast<int>(detail::get_f64(is));
  Box box;
  box.dim = dim;
  for (int k = 0; k < dim; ++k) {
    box.lo[k] = detail::get_f64(is);
    box.hi[k] = detail::get_f64(is);
  }
  ScalarField f(build_grid(box, n, core_fraction));
  for (double& v : f.values) v = detail::get_f64(is);
  return f;
}

/// CSV with header x1[,x2],value and one row per node.
inline void write_field_csv(const std::filesystem::path& path, const ScalarField& f) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.precision(17);
  const Grid& g = f.grid;
  for (int k = 0; k < g.dim; ++k) os << 'x' << (k + 1) << ',';
  os << "value\r\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.point(i);
    for (int k = 0; k < g.dim; ++k) os << x[k] << ',';
    os << f.values[i] << "\r\n";
  }
}

}  // namespace entpia
