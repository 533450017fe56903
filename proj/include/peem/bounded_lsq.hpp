#pragma once

// Non-negative linear least squares: min ||A x - b||^2 subject to x >= 0.
//
// Lawson-Hanson active-set method on a column-normalised copy of A. Columns
// that are identically zero cannot be identified; they are pinned to 0 and
// reported. Unconstrained subproblems are solved with a complete orthogonal
// decomposition so collinear passive sets still yield the minimum-norm
// solution.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "peem/errors.hpp"

namespace peem {

struct BoundedLsqOptions {
  // Stopping threshold on the normalised gradient (dual) of the scaled problem.
  double tolerance = 1e-10;
  std::size_t max_iterations = 500;
};

struct BoundedLsqResult {
  Eigen::VectorXd x;
  double objective = 0.0;  // ||A x - b||^2 at the returned x
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<Eigen::Index> zero_columns;
};

inline BoundedLsqResult solve_nonnegative_lsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                              const BoundedLsqOptions& options = {}) {
  using Eigen::Index;
  if (a.rows() != b.size()) throw PreconditionError("design matrix and target have different row counts");
  const Index n = a.cols();

  BoundedLsqResult result;
  result.x = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd scale(n);
  std::vector<bool> usable(static_cast<std::size_t>(n), true);
  for (Index j = 0; j < n; ++j) {
    scale(j) = a.col(j).norm();
    if (!(scale(j) > 0.0) || !std::isfinite(scale(j))) {
      usable[static_cast<std::size_t>(j)] = false;
      result.zero_columns.push_back(j);
      scale(j) = 1.0;
    }
  }
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    result.converged = true;
    return result;
  }

  // Scaled problem: As z = bs with As = A D^-1 / |b|, bs = b / |b|, x = D^-1 z.
  Eigen::MatrixXd as = a;
  for (Index j = 0; j < n; ++j) as.col(j) /= scale(j);
  const Eigen::VectorXd bs = b / b_norm;

  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);

  auto passive_indices = [&] {
    std::vector<Index> idx;
    for (Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    return idx;
  };

  auto solve_passive = [&](const std::vector<Index>& idx) {
    Eigen::MatrixXd sub(as.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Index>(k)) = as.col(idx[k]);
    Eigen::VectorXd sol = sub.completeOrthogonalDecomposition().solve(bs);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) full(idx[k]) = sol(static_cast<Index>(k));
    return full;
  };

  std::size_t iterations = 0;
  bool converged = false;
  while (iterations < options.max_iterations) {
    const Eigen::VectorXd w = as.transpose() * (bs - as * z);
    Index best = -1;
    double best_w = options.tolerance;
    for (Index j = 0; j < n; ++j) {
      if (!usable[static_cast<std::size_t>(j)] || passive[static_cast<std::size_t>(j)]) continue;
      if (w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) {
      converged = true;
      break;
    }
    passive[static_cast<std::size_t>(best)] = true;

    // Inner loop: step toward the unconstrained passive-set solution until feasible.
    while (iterations < options.max_iterations) {
      ++iterations;
      const auto idx = passive_indices();
      const Eigen::VectorXd s = solve_passive(idx);
      bool feasible = true;
      for (Index j : idx)
        if (s(j) <= 0.0) feasible = false;
      if (feasible) {
        z = s;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Index j : idx) {
        if (s(j) <= 0.0) alpha = std::min(alpha, z(j) / (z(j) - s(j)));
      }
      z += alpha * (s - z);
      for (Index j : idx) {
        if (z(j) <= std::numeric_limits<double>::epsilon() * 10.0 || (s(j) <= 0.0 && z(j) <= 0.0)) {
          z(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        }
      }
    }
  }

  for (Index j = 0; j < n; ++j) result.x(j) = std::max(0.0, z(j)) / scale(j) * b_norm;
  result.objective = (a * result.x - b).squaredNorm();
  result.iterations = iterations;
  result.converged = converged;
  return result;
}

}  // namespace peem
