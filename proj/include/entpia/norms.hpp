#pragma once

// Discrete Hoelder seminorms and the weighted H^1 error on a ball.

#include <cmath>
#include <numbers>
#include <vector>

#include "entpia/grid.hpp"

namespace entpia {

namespace detail {

/// D^a w for all multi-indices with |a| = k, from the central stencils.
inline std::vector<std::vector<double>> derivative_fields(const ScalarField& w, int k) {
  const Grid& g = w.grid;
  std::vector<std::vector<double>> out;
  if (k == 0) {
    out.push_back(w.values);
  } else if (k == 1) {
    const VectorField D = gradient(w);
    for (int a = 0; a < g.dim; ++a) {
      std::vector<double> f(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) f[i] = D[i][a];
      out.push_back(std::move(f));
    }
  } else if (k == 2) {
    const MatrixField H = hessian(w);
    const int comps = g.dim == 1 ? 1 : 3;
    for (int c = 0; c < comps; ++c) {
      std::vector<double> f(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) f[i] = c == 0 ? H[i].xx : (c == 1 ? H[i].xy : H[i].yy);
      out.push_back(std::move(f));
    }
  } else {
    throw InvalidArgument("derivative order must be 0, 1 or 2");
  }
  return out;
}

inline bool in_box(const Box& b, const Vec& x, int dim, const Vec& h) {
  for (int k = 0; k < dim; ++k)
    if (x[k] < b.lo[k] - 1e-9 * h[k] || x[k] > b.hi[k] + 1e-9 * h[k]) return false;
  return true;
}

}  // namespace detail

/// max over node pairs x != y in `region` with |x - y| <= 1 of
/// |D^a w(x) - D^a w(y)| / |x - y|^alpha, over all |a| = k.
inline double holder_seminorm(const ScalarField& w, int k, double alpha, const Box& region) {
  const Grid& g = w.grid;
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0,1]");
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (detail::in_box(region, g.point(i), g.dim, g.h)) nodes.push_back(i);
  if (nodes.empty()) throw InvalidArgument("region contains no grid nodes");
  const auto fields = detail::derivative_fields(w, k);
  std::array<int, kMaxDim> win{0, 0};
  for (int a = 0; a < g.dim; ++a) win[a] = static_cast<int>(std::floor(1.0 / g.h[a] + 1e-9));
  double best = 0.0;
  for (std::size_t i : nodes) {
    const auto m = g.multi(i);
    const Vec x = g.point(i);
    const int lo1 = g.dim == 2 ? -win[1] : 0, hi1 = g.dim == 2 ? win[1] : 0;
    for (int d0 = 0; d0 <= win[0]; ++d0)
      for (int d1 = lo1; d1 <= hi1; ++d1) {
        if (d0 == 0 && d1 <= 0) continue;  // each unordered pair once
        const int j0 = m[0] + d0, j1 = m[1] + d1;
        if (j0 >= g.n[0] || (g.dim == 2 && (j1 < 0 || j1 >= g.n[1]))) continue;
        const std::size_t j = g.index(j0, j1);
        const Vec y = g.point(j);
        if (!detail::in_box(region, y, g.dim, g.h)) continue;
        double dist2 = 0.0;
        for (int a = 0; a < g.dim; ++a) dist2 += (x[a] - y[a]) * (x[a] - y[a]);
        const double dist = std::sqrt(dist2);
        if (dist > 1.0 + 1e-12) continue;
        const double scale = std::pow(dist, -alpha);
        for (const auto& f : fields) best = std::max(best, std::abs(f[i] - f[j]) * scale);
      }
  }
  return best;
}

/// rho int_B |v - v_ref|^2 + int_B |D(v - v_ref)|^2 over the ball B = B_radius(center).
/// 1D: exact for the piecewise-linear interpolant of v - v_ref.
/// 2D: node sum over the disc with cell area h0 h1.
inline double weighted_h1_error(const ScalarField& v, const ScalarField& v_ref, double rho, const Vec& center,
                                double radius = 1.0) {
  const Grid& g = v.grid;
  if (!g.same_shape(v_ref.grid)) throw InvalidArgument("fields live on different grids");
  for (int k = 0; k < g.dim; ++k)
    if (center[k] - radius < g.core.lo[k] - 1e-9 || center[k] + radius > g.core.hi[k] + 1e-9)
      throw InvalidArgument("ball exceeds the core region");
  const ScalarField e = v - v_ref;
  double total = 0.0;
  if (g.dim == 1) {
    const double a = center[0] - radius, b = center[0] + radius;
    for (int i = 0; i + 1 < g.n[0]; ++i) {
      const double x0 = g.coord(0, i), x1 = g.coord(0, i + 1);
      const double lo = std::max(a, x0), hi = std::min(b, x1);
      if (hi <= lo) continue;
      const double slope = (e[i + 1] - e[i]) / (x1 - x0);
      const double el = e[i] + slope * (lo - x0), eh = e[i] + slope * (hi - x0);
      total += (hi - lo) * (rho * (el * el + el * eh + eh * eh) / 3.0 + slope * slope);
    }
  } else {
    const VectorField De = gradient(e);
    const double cell = g.h[0] * g.h[1];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vec x = g.point(i);
      const double r2 = (x[0] - center[0]) * (x[0] - center[0]) + (x[1] - center[1]) * (x[1] - center[1]);
      if (r2 > radius * radius * (1.0 + 1e-12)) continue;
      total += (rho * e[i] * e[i] + De[i][0] * De[i][0] + De[i][1] * De[i][1]) * cell;
    }
  }
  return total;
}

}  // namespace entpia
