#pragma once

// Discrete generator L v = b.Dv + 1/2 tr(Sigma D^2 v) at a grid node.
//
// The drift is carried as three per-axis parts (central, forward, backward) so that
// the generator is linear in the coefficients: averaging per-action generators
// against a policy gives exactly the generator of the averaged coefficients.
//
// Interior nodes: 3-point second differences, 4-point cross difference, drift by
// the selected scheme. Nodes on the boundary of axis k: the normal second
// derivative is taken to be zero, only an inward-pointing drift component is kept
// (one-sided), and the cross term is dropped.

#include <array>
#include <cmath>

#include "entpia/core.hpp"
#include "entpia/grid.hpp"

namespace entpia {

/// hybrid: central where the cell Peclet number |b|h/Sigma_kk <= 1, upwind elsewhere.
enum class DriftScheme { hybrid, upwind, central };

inline const char* to_string(DriftScheme s) {
  switch (s) {
    case DriftScheme::hybrid: return "hybrid";
    case DriftScheme::upwind: return "upwind";
    case DriftScheme::central: return "central";
  }
  return "?";
}

struct DriftSplit {
  Vec central{};
  Vec forward{};
  Vec backward{};

  void add(const DriftSplit& o, double w) {
    for (int k = 0; k < kMaxDim; ++k) {
      central[k] += w * o.central[k];
      forward[k] += w * o.forward[k];
      backward[k] += w * o.backward[k];
    }
  }
};

/// Splits drift `b` at node `m` into scheme parts given the diffusion `S` there.
inline DriftSplit split_drift(const Grid& g, const std::array<int, kMaxDim>& m, const Vec& b, const Sym& S,
                              DriftScheme scheme) {
  DriftSplit out;
  for (int k = 0; k < g.dim; ++k) {
    const double bk = b[k];
    if (m[k] == 0) {
      if (bk > 0.0) out.forward[k] = bk;
      continue;
    }
    if (m[k] == g.n[k] - 1) {
      if (bk < 0.0) out.backward[k] = bk;
      continue;
    }
    bool central = scheme == DriftScheme::central;
    if (scheme == DriftScheme::hybrid) central = std::abs(bk) * g.h[k] <= S(k, k);
    if (central) out.central[k] = bk;
    else if (bk > 0.0) out.forward[k] = bk;
    else out.backward[k] = bk;
  }
  return out;
}

/// Calls emit(j, c) for every term of the generator row at node i, so that
/// (L v)(x_i) = sum c * v[j]. Terms may repeat an index.
template <class Emit>
void generator_terms(const Grid& g, std::size_t i, const DriftSplit& drift, const Sym& S, bool with_diffusion,
                     Emit&& emit) {
  const auto m = g.multi(i);
  bool interior_all = true;
  for (int k = 0; k < g.dim; ++k) {
    const std::size_t s = g.stride(k);
    const double h = g.h[k];
    const bool interior = m[k] > 0 && m[k] < g.n[k] - 1;
    interior_all = interior_all && interior;
    if (drift.central[k] != 0.0) {
      emit(i + s, drift.central[k] / (2.0 * h));
      emit(i - s, -drift.central[k] / (2.0 * h));
    }
    if (drift.forward[k] != 0.0) {
      emit(i + s, drift.forward[k] / h);
      emit(i, -drift.forward[k] / h);
    }
    if (drift.backward[k] != 0.0) {
      emit(i, drift.backward[k] / h);
      emit(i - s, -drift.backward[k] / h);
    }
    if (with_diffusion && interior) {
      const double a = 0.5 * S(k, k) / (h * h);
      emit(i + s, a);
      emit(i - s, a);
      emit(i, -2.0 * a);
    }
  }
  if (with_diffusion && g.dim == 2 && interior_all && S.xy != 0.0) {
    const std::size_t s0 = g.stride(0), s1 = g.stride(1);
    const double c = S.xy / (4.0 * g.h[0] * g.h[1]);
    emit(i + s0 + s1, c);
    emit(i + s0 - s1, -c);
    emit(i - s0 + s1, -c);
    emit(i - s0 - s1, c);
  }
}

/// (L v)(x_i) for the given coefficients.
inline double apply_generator(const Grid& g, const std::vector<double>& v, std::size_t i, const DriftSplit& drift,
                              const Sym& S, bool with_diffusion = true) {
  double acc = 0.0;
  generator_terms(g, i, drift, S, with_diffusion, [&](std::size_t j, double c) { acc += c * v[j]; });
  return acc;
}

}  // namespace entpia
