#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "strobe/error.hpp"

namespace strobe {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

struct NnlsOptions {
  std::size_t max_iterations = 0;  // 0 = 10 * number of columns
  double tolerance = 1e-10;        // on the gradient, relative to max |A^T b|
};

struct NnlsResult {
  Eigen::VectorXd x;
  std::size_t iterations = 0;
  double residual_norm = 0.0;
  double kkt_violation = 0.0;  // relative, see nnls_kkt_violation
  std::size_t passive = 0;     // number of strictly positive components
};

// Largest violation of the NNLS optimality conditions, relative to max |A^T b|:
// w = A^T (b - A x) must be <= 0 where x = 0 and = 0 where x > 0.
inline double nnls_kkt_violation(const SparseMatrix& A, const Eigen::VectorXd& b, const Eigen::VectorXd& x) {
  const Eigen::VectorXd w = A.transpose() * (b - A * x);
  const double scale = (A.transpose() * b).cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double v = x[j] > 0.0 ? std::fabs(w[j]) : std::max(0.0, w[j]);
    worst = std::max(worst, v);
  }
  return worst / scale;
}

namespace detail {

// Cholesky factor of the Gram matrix of the passive columns, stored as packed
// rows, with O(p^2) column append and delete.
class GramCholesky {
 public:
  std::size_t size() const { return rows_.size(); }

  // Appends a column with cross products `g` against the current set and
  // squared norm `d`. Returns false (and leaves the factor alone) when the
  // column is numerically dependent on the current set.
  bool append(const std::vector<double>& g, double d) {
    const std::size_t p = rows_.size();
    std::vector<double> row(p + 1);
    double ss = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      double v = g[i];
      const auto& ri = rows_[i];
      for (std::size_t k = 0; k < i; ++k) v -= ri[k] * row[k];
      v /= ri[i];
      row[i] = v;
      ss += v * v;
    }
    const double diag2 = d - ss;
    if (!(diag2 > 1e-12 * d)) return false;
    row[p] = std::sqrt(diag2);
    rows_.push_back(std::move(row));
    return true;
  }

  // Removes position k and restores triangularity with Givens rotations.
  void remove(std::size_t k) {
    rows_.erase(rows_.begin() + static_cast<std::ptrdiff_t>(k));
    const std::size_t p = rows_.size();
    for (std::size_t c = k; c < p; ++c) {
      const double a = rows_[c][c];
      const double b = rows_[c][c + 1];
      const double r = std::hypot(a, b);
      const double cs = a / r;
      const double sn = b / r;
      for (std::size_t i = c; i < p; ++i) {
        const double u = rows_[i][c];
        const double v = rows_[i][c + 1];
        rows_[i][c] = cs * u + sn * v;
        rows_[i][c + 1] = -sn * u + cs * v;
      }
      rows_[c].resize(c + 1);
    }
  }

  // Solves L L^T z = rhs.
  std::vector<double> solve(std::vector<double> rhs) const {
    const std::size_t p = rows_.size();
    for (std::size_t i = 0; i < p; ++i) {
      double v = rhs[i];
      for (std::size_t k = 0; k < i; ++k) v -= rows_[i][k] * rhs[k];
      rhs[i] = v / rows_[i][i];
    }
    for (std::size_t k = p; k-- > 0;) {
      rhs[k] /= rows_[k][k];
      for (std::size_t i = 0; i < k; ++i) rhs[i] -= rows_[k][i] * rhs[k];
    }
    return rhs;
  }

 private:
  std::vector<std::vector<double>> rows_;
};

}  // namespace detail

// Lawson-Hanson active-set NNLS, min ||A x - b|| subject to x >= 0.
inline NnlsResult solve_nnls(const SparseMatrix& A, const Eigen::VectorXd& b, const NnlsOptions& options = {}) {
  detail::require(A.rows() == b.size(), "solve_nnls: row count of A and length of b differ");
  const auto n = static_cast<std::size_t>(A.cols());
  const std::size_t cap = options.max_iterations > 0 ? options.max_iterations : 10 * std::max<std::size_t>(n, 1);
  NnlsResult out;
  out.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const Eigen::VectorXd atb = A.transpose() * b;
  const double scale = n > 0 ? atb.cwiseAbs().maxCoeff() : 0.0;
  if (scale == 0.0) {
    out.residual_norm = b.norm();
    return out;
  }
  const double tol = options.tolerance * scale;

  std::vector<double> sq_norm(n);
  for (std::size_t j = 0; j < n; ++j) sq_norm[j] = A.col(static_cast<Eigen::Index>(j)).squaredNorm();

  std::vector<std::size_t> passive;
  std::vector<char> in_passive(n, 0), blocked(n, 0);
  detail::GramCholesky chol;
  Eigen::VectorXd& x = out.x;
  Eigen::VectorXd dense_col = Eigen::VectorXd::Zero(A.rows());

  auto gram_with = [&](std::size_t j) {
    for (SparseMatrix::InnerIterator it(A, static_cast<Eigen::Index>(j)); it; ++it) dense_col[it.row()] = it.value();
    std::vector<double> g(passive.size());
    for (std::size_t i = 0; i < passive.size(); ++i) {
      double v = 0.0;
      for (SparseMatrix::InnerIterator it(A, static_cast<Eigen::Index>(passive[i])); it; ++it) v += it.value() * dense_col[it.row()];
      g[i] = v;
    }
    for (SparseMatrix::InnerIterator it(A, static_cast<Eigen::Index>(j)); it; ++it) dense_col[it.row()] = 0.0;
    return g;
  };
  auto drop = [&](std::size_t pos) {
    in_passive[passive[pos]] = 0;
    x[static_cast<Eigen::Index>(passive[pos])] = 0.0;
    passive.erase(passive.begin() + static_cast<std::ptrdiff_t>(pos));
    chol.remove(pos);
    std::fill(blocked.begin(), blocked.end(), 0);
  };

  while (true) {
    Eigen::VectorXd r = b;
    for (std::size_t p : passive) r -= A.col(static_cast<Eigen::Index>(p)) * x[static_cast<Eigen::Index>(p)];
    const Eigen::VectorXd w = A.transpose() * r;
    std::size_t best = n;
    double best_w = tol;
    for (std::size_t j = 0; j < n; ++j) {
      if (!in_passive[j] && !blocked[j] && w[static_cast<Eigen::Index>(j)] > best_w) {
        best_w = w[static_cast<Eigen::Index>(j)];
        best = j;
      }
    }
    if (best == n) {
      out.residual_norm = r.norm();
      break;
    }
    if (++out.iterations > cap) {
      throw NumericalError("solve_nnls: no convergence after " + std::to_string(cap) +
                           " iterations, residual norm " + std::to_string(r.norm()));
    }
    if (!chol.append(gram_with(best), sq_norm[best])) {
      blocked[best] = 1;
      continue;
    }
    passive.push_back(best);
    in_passive[best] = 1;

    bool first_pass = true;
    while (true) {
      std::vector<double> rhs(passive.size());
      for (std::size_t i = 0; i < passive.size(); ++i) rhs[i] = atb[static_cast<Eigen::Index>(passive[i])];
      const std::vector<double> z = chol.solve(std::move(rhs));
      if (first_pass && z.back() <= 0.0) {
        // Rounding made the entering column useless; undo and exclude it.
        blocked[best] = 1;
        in_passive[best] = 0;
        passive.pop_back();
        chol.remove(passive.size());
        break;
      }
      first_pass = false;
      double alpha = std::numeric_limits<double>::infinity();
      std::size_t hit = passive.size();
      for (std::size_t i = 0; i < passive.size(); ++i) {
        if (z[i] <= 0.0) {
          const double xi = x[static_cast<Eigen::Index>(passive[i])];
          const double a = xi / (xi - z[i]);
          if (a < alpha) {
            alpha = a;
            hit = i;
          }
        }
      }
      if (hit == passive.size()) {
        for (std::size_t i = 0; i < passive.size(); ++i) x[static_cast<Eigen::Index>(passive[i])] = z[i];
        break;
      }
      for (std::size_t i = 0; i < passive.size(); ++i) {
        auto& xi = x[static_cast<Eigen::Index>(passive[i])];
        xi += alpha * (z[i] - xi);
      }
      x[static_cast<Eigen::Index>(passive[hit])] = 0.0;
      for (std::size_t i = passive.size(); i-- > 0;) {
        if (x[static_cast<Eigen::Index>(passive[i])] <= 0.0) drop(i);
      }
    }
  }
  out.passive = passive.size();
  out.kkt_violation = nnls_kkt_violation(A, b, x);
  return out;
}

}  // namespace strobe
