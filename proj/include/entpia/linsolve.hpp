#pragma once

// Assembly and solution of the policy-evaluation equation
//   rho v - b.Dv - 1/2 tr(Sigma D^2 v) = r - lambda H
// with policy-averaged coefficients on a truncated box.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "entpia/core.hpp"
#include "entpia/grid.hpp"
#include "entpia/log.hpp"
#include "entpia/policy.hpp"
#include "entpia/stencil.hpp"

namespace entpia {

enum class BcKind { linear_extrapolation, zero_dirichlet, bound_dirichlet, prescribed };

inline const char* to_string(BcKind b) {
  switch (b) {
    case BcKind::linear_extrapolation: return "linear-extrapolation";
    case BcKind::zero_dirichlet: return "zero-dirichlet";
    case BcKind::bound_dirichlet: return "bound-dirichlet";
    case BcKind::prescribed: return "prescribed";
  }
  return "?";
}

inline BcKind parse_bc(const std::string& s) {
  if (s == "linear-extrapolation") return BcKind::linear_extrapolation;
  if (s == "zero-dirichlet") return BcKind::zero_dirichlet;
  if (s == "bound-dirichlet") return BcKind::bound_dirichlet;
  if (s == "prescribed") return BcKind::prescribed;
  throw InvalidArgument("unknown boundary condition '" + s + "'");
}

struct BoundaryCondition {
  BcKind kind = BcKind::linear_extrapolation;
  /// Growth record for bound-dirichlet values 2 A1 rho^{-1} (1+|x|^2)^{N/2}.
  Growth growth;
  /// Node values for `prescribed` (only boundary entries are read).
  std::vector<double> values;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct LinearOperatorSystem {
  Grid grid;
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  BcKind bc = BcKind::linear_extrapolation;
  /// Positive diagonal and non-positive off-diagonals in every row.
  bool m_matrix = false;
  bool cross_terms = false;
};

inline bool is_dirichlet(BcKind b) { return b != BcKind::linear_extrapolation; }

inline bool check_m_matrix(const SparseMatrix& A) {
  for (int r = 0; r < A.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
      if (it.col() == r ? !(it.value() > 0.0) : it.value() > 0.0) return false;
    }
  return true;
}

/// Assembles the system for averaged coefficients `c`.
inline LinearOperatorSystem assemble_operator(const Grid& g, const AveragedCoefficients& c, double rho, double lambda,
                                              const BoundaryCondition& bc) {
  if (!g.same_shape(c.grid) || c.r_bar.size() != g.size()) throw InvalidArgument("coefficients do not match the grid");
  if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
  if (bc.kind == BcKind::prescribed && bc.values.size() != g.size())
    throw InvalidArgument("prescribed boundary values do not match the grid");
  LinearOperatorSystem sys;
  sys.grid = g;
  sys.bc = bc.kind;
  const std::size_t n = g.size();
  sys.rhs.resize(static_cast<Eigen::Index>(n));
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
  std::vector<char> cross(n, 0);
  parallel_for(n, [&](std::size_t i) {
    auto& row = rows[i];
    if (is_dirichlet(bc.kind) && g.on_boundary(i)) {
      double val = 0.0;
      if (bc.kind == BcKind::bound_dirichlet) {
        const Vec x = g.point(i);
        const double r2 = norm2(x, g.dim) * norm2(x, g.dim);
        val = 2.0 * bc.growth.A1 / rho * std::pow(1.0 + r2, 0.5 * bc.growth.N);
        if (c.r_bar[i] < 0.0) val = -val;
      } else if (bc.kind == BcKind::prescribed) {
        val = bc.values[i];
      }
      row.push_back({i, 1.0});
      sys.rhs[static_cast<Eigen::Index>(i)] = val;
      return;
    }
    row.push_back({i, rho});
    generator_terms(g, i, c.drift[i], c.Sigma_bar[i], true, [&](std::size_t j, double v) {
      if (j == i) {
        row[0].second -= v;
        return;
      }
      for (auto& e : row)
        if (e.first == j) {
          e.second -= v;
          return;
        }
      row.push_back({j, -v});
    });
    if (g.dim == 2 && !g.on_boundary(i) && c.Sigma_bar[i].xy != 0.0) cross[i] = 1;
    sys.rhs[static_cast<Eigen::Index>(i)] = c.r_bar[i] - lambda * c.H_bar[i];
  });
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : rows[i])
      trip.emplace_back(static_cast<int>(i), static_cast<int>(e.first), e.second);
  sys.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  sys.matrix.makeCompressed();
  sys.cross_terms = std::any_of(cross.begin(), cross.end(), [](char v) { return v != 0; });
  sys.m_matrix = check_m_matrix(sys.matrix);
  if (sys.cross_terms && !sys.m_matrix)
    log_warning("cross-derivative terms make the system a non-M-matrix; comparison checks are disabled");
  return sys;
}

struct SolverOptions {
  /// Required relative residual |Av - rhs| / |rhs|.
  double rel_tol = 1e-10;
  /// Target handed to the Krylov method (tighter than rel_tol).
  double krylov_tol = 1e-12;
  int max_krylov_iters = 4000;
};

struct SolveReport {
  std::string method;
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> residual_history;
};

namespace detail {

inline double relative_residual(const SparseMatrix& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  const double rn = (A * x - b).norm();
  const double bn = b.norm();
  return bn > 0.0 ? rn / bn : rn;
}

/// Thomas elimination for a matrix whose rows touch only i-1, i, i+1.
inline Eigen::VectorXd tridiagonal_solve(const SparseMatrix& A, const Eigen::VectorXd& b) {
  const Eigen::Index n = A.rows();
  std::vector<double> lo(n, 0.0), di(n, 0.0), up(n, 0.0);
  for (Eigen::Index r = 0; r < n; ++r)
    for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
      if (it.col() == r) di[r] = it.value();
      else if (it.col() == r - 1) lo[r] = it.value();
      else if (it.col() == r + 1) up[r] = it.value();
      else throw SolverError("matrix is not tridiagonal", {});
    }
  std::vector<double> cp(n), dp(n);
  Eigen::VectorXd x(n);
  double den = di[0];
  if (den == 0.0) throw SolverError("zero pivot in banded elimination", {});
  cp[0] = up[0] / den;
  dp[0] = b[0] / den;
  for (Eigen::Index i = 1; i < n; ++i) {
    den = di[i] - lo[i] * cp[i - 1];
    if (den == 0.0) throw SolverError("zero pivot in banded elimination", {});
    cp[i] = up[i] / den;
    dp[i] = (b[i] - lo[i] * dp[i - 1]) / den;
  }
  x[n - 1] = dp[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
  return x;
}

inline Eigen::VectorXd sparse_lu_solve(const SparseMatrix& A, const Eigen::VectorXd& b, bool& ok) {
  Eigen::SparseMatrix<double> Ac(A);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(Ac);
  ok = lu.info() == Eigen::Success;
  if (!ok) return Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd x = lu.solve(b);
  ok = lu.info() == Eigen::Success;
  return x;
}

}  // namespace detail

/// Solves the system. 1D: banded elimination. 2D: BiCGSTAB with a diagonal
/// preconditioner, then sparse LU if the residual target is missed. Throws
/// SolverError with the residual history when every method fails.
inline ScalarField solve_policy_evaluation(const LinearOperatorSystem& sys, const SolverOptions& opt = {},
                                           SolveReport* report = nullptr) {
  const SparseMatrix& A = sys.matrix;
  const Eigen::VectorXd& b = sys.rhs;
  SolveReport rep;
  Eigen::VectorXd x;
  bool done = false;
  if (sys.grid.dim == 1) {
    try {
      x = detail::tridiagonal_solve(A, b);
      rep.method = "banded";
      rep.relative_residual = detail::relative_residual(A, x, b);
      rep.residual_history.push_back(rep.relative_residual);
      done = std::isfinite(rep.relative_residual) && rep.relative_residual <= opt.rel_tol;
    } catch (const SolverError&) {
      rep.residual_history.push_back(std::numeric_limits<double>::infinity());
    }
  } else {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> it;
    it.setTolerance(opt.krylov_tol);
    it.setMaxIterations(opt.max_krylov_iters);
    it.compute(A);
    x = it.solve(b);
    rep.method = "bicgstab";
    rep.iterations = static_cast<int>(it.iterations());
    rep.relative_residual = detail::relative_residual(A, x, b);
    rep.residual_history.push_back(rep.relative_residual);
    done = it.info() == Eigen::Success && std::isfinite(rep.relative_residual) && rep.relative_residual <= opt.rel_tol;
  }
  if (!done) {
    bool ok = false;
    x = detail::sparse_lu_solve(A, b, ok);
    rep.method = "sparse-lu";
    rep.relative_residual = ok ? detail::relative_residual(A, x, b) : std::numeric_limits<double>::infinity();
    rep.residual_history.push_back(rep.relative_residual);
    if (!ok || !(rep.relative_residual <= opt.rel_tol))
      throw SolverError("linear solve failed: relative residual " + std::to_string(rep.relative_residual),
                        rep.residual_history);
  }
  if (report) *report = rep;
  return ScalarField(sys.grid, std::vector<double>(x.data(), x.data() + x.size()));
}

/// Coordinate-format dump: one "row col value" line per stored entry.
inline void write_matrix_coo(const std::filesystem::path& path, const LinearOperatorSystem& sys) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.precision(17);
  for (int r = 0; r < sys.matrix.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(sys.matrix, r); it; ++it) os << r << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace entpia
