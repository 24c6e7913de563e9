#ifndef RISKTREE_SIMPLEX_HPP_
#define RISKTREE_SIMPLEX_HPP_

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <vector>

namespace risktree {

enum class LpStatus { Optimal, Infeasible, Unbounded };

template <typename Scalar>
struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Scalar objective = Scalar(0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
};

template <typename Scalar>
struct LpTolerances {
  Scalar pivot = Scalar(1e-11);
  Scalar feasibility = Scalar(1e-9);
};

/// Dense two-phase tableau simplex with Bland's rule for
///   min c'x  subject to  A x = b,  x >= 0.
/// Meant for the small problems in this library (a few hundred columns);
/// Bland's rule keeps degenerate problems from cycling.
template <typename Scalar>
LpResult<Scalar> solve_standard_lp(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& c,
                                   LpTolerances<Scalar> tol = {}) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  const Eigen::Index width = n + m + 1;

  // Rows 0..m-1 hold constraints, row m holds the objective (reduced costs).
  Mat tab = Mat::Zero(m + 1, width);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) {
    const Scalar sign = b[r] < Scalar(0) ? Scalar(-1) : Scalar(1);
    tab.row(r).head(n) = sign * A.row(r);
    tab(r, n + r) = Scalar(1);
    tab(r, width - 1) = sign * b[r];
    basis[static_cast<std::size_t>(r)] = n + r;
  }

  auto pivot = [&](Eigen::Index row, Eigen::Index col) {
    tab.row(row) /= tab(row, col);
    for (Eigen::Index r = 0; r <= m; ++r) {
      if (r == row) continue;
      const Scalar f = tab(r, col);
      if (f != Scalar(0)) tab.row(r) -= f * tab.row(row);
    }
    basis[static_cast<std::size_t>(row)] = col;
  };

  // Returns false when the problem is unbounded in the current phase.
  auto iterate = [&](Eigen::Index allowed) {
    for (;;) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (tab(m, j) < -tol.pivot) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index r = 0; r < m; ++r) {
        const Scalar a = tab(r, enter);
        if (a <= tol.pivot) continue;
        const Scalar ratio = tab(r, width - 1) / a;
        if (leave < 0 || ratio < best - tol.pivot) {
          leave = r;
          best = ratio;
        } else if (ratio <= best + tol.pivot &&
                   basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(leave)]) {
          leave = r;
          if (ratio < best) best = ratio;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  };

  // Phase I: minimise the sum of artificials.
  for (Eigen::Index r = 0; r < m; ++r) tab.row(m) -= tab.row(r);
  for (Eigen::Index r = 0; r < m; ++r) tab(m, n + r) = Scalar(0);
  iterate(n + m);

  LpResult<Scalar> out;
  if (-tab(m, width - 1) > tol.feasibility) {
    out.status = LpStatus::Infeasible;
    return out;
  }

  for (Eigen::Index r = 0; r < m; ++r) {
    if (basis[static_cast<std::size_t>(r)] < n) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(tab(r, j)) > tol.pivot) {
        pivot(r, j);
        break;
      }
    }
  }

  // Phase II.
  tab.row(m).setZero();
  tab.row(m).head(n) = c.transpose();
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index j = basis[static_cast<std::size_t>(r)];
    if (j < n && tab(m, j) != Scalar(0)) tab.row(m) -= tab(m, j) * tab.row(r);
  }
  if (!iterate(n)) {
    out.status = LpStatus::Unbounded;
    out.objective = -std::numeric_limits<Scalar>::infinity();
    return out;
  }

  out.status = LpStatus::Optimal;
  out.x = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index j = basis[static_cast<std::size_t>(r)];
    if (j < n) out.x[j] = tab(r, width - 1);
  }
  out.objective = c.dot(out.x);
  return out;
}

}  // namespace risktree

#endif  // RISKTREE_SIMPLEX_HPP_
