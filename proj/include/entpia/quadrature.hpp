#pragma once

// Tensor Gauss-Legendre rules on the unit action cube [0,1]^L.

#include <cmath>
#include <numbers>
#include <vector>

#include "entpia/core.hpp"

namespace entpia {

struct ActionQuadrature {
  int dim = 1;
  int nodes_per_dim = 0;
  std::vector<Vec> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_m.
inline void gauss_legendre(int m, std::vector<double>& x, std::vector<double>& w) {
  x.assign(m, 0.0);
  w.assign(m, 0.0);
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= m; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = m * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[m - 1 - i] = z;
    w[i] = w[m - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (m % 2 == 1) x[m / 2] = 0.0;
}

/// Tensor rule with `nodes_per_dim` points per axis mapped to [0,1]^L; weights sum to 1.
inline ActionQuadrature build_action_quadrature(int L, int nodes_per_dim) {
  if (L < 1 || L > kMaxDim) throw InvalidArgument("action dimension must be 1 or 2");
  if (nodes_per_dim < 2) throw InvalidArgument("at least 2 quadrature nodes per axis are required");
  std::vector<double> x, w;
  gauss_legendre(nodes_per_dim, x, w);
  ActionQuadrature q;
  q.dim = L;
  q.nodes_per_dim = nodes_per_dim;
  if (L == 1) {
    for (int i = 0; i < nodes_per_dim; ++i) {
      q.nodes.push_back({0.5 * (x[i] + 1.0), 0.0});
      q.weights.push_back(0.5 * w[i]);
    }
  } else {
    for (int i = 0; i < nodes_per_dim; ++i)
      for (int j = 0; j < nodes_per_dim; ++j) {
        q.nodes.push_back({0.5 * (x[i] + 1.0), 0.5 * (x[j] + 1.0)});
        q.weights.push_back(0.25 * w[i] * w[j]);
      }
  }
  return q;
}

}  // namespace entpia
