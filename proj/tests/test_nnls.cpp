#include <gtest/gtest.h>

#include <random>

#include "strobe/nnls.hpp"

using namespace strobe;

namespace {

SparseMatrix random_matrix(int rows, int cols, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Triplet<double>> t;
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      if (u(rng) < density) t.emplace_back(r, c, u(rng) - 0.3);
    }
  }
  SparseMatrix a(rows, cols);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

// Exhaustive oracle for tiny problems: the optimum is the unconstrained
// least-squares solution on some passive set that is feasible and satisfies KKT.
double best_residual(const SparseMatrix& a, const Eigen::VectorXd& b) {
  const Eigen::MatrixXd d = a;
  const int n = static_cast<int>(d.cols());
  double best = b.norm();
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> idx;
    for (int j = 0; j < n; ++j) {
      if (mask & (1 << j)) idx.push_back(j);
    }
    Eigen::MatrixXd sub(d.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = d.col(idx[k]);
    const Eigen::VectorXd z = sub.completeOrthogonalDecomposition().solve(b);
    if ((z.array() >= 0).all()) best = std::min(best, (sub * z - b).norm());
  }
  return best;
}

}  // namespace

TEST(Nnls, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const SparseMatrix a = random_matrix(9, 6, 0.6, rng);
    Eigen::VectorXd b(9);
    for (int i = 0; i < 9; ++i) b[i] = g(rng);
    const NnlsResult r = solve_nnls(a, b);
    EXPECT_TRUE((r.x.array() >= 0).all());
    EXPECT_NEAR(r.residual_norm, best_residual(a, b), 1e-9 * (1 + b.norm())) << "trial " << trial;
  }
}

TEST(Nnls, SatisfiesKktOnLargerProblems) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const SparseMatrix a = random_matrix(120, 300, 0.05, rng);
    Eigen::VectorXd b(120);
    for (int i = 0; i < 120; ++i) b[i] = u(rng);
    const NnlsResult r = solve_nnls(a, b);
    EXPECT_TRUE((r.x.array() >= 0).all());
    EXPECT_LT(r.kkt_violation, 1e-9);
    EXPECT_NEAR(r.kkt_violation, nnls_kkt_violation(a, b, r.x), 1e-15);
  }
}

TEST(Nnls, RecoversNonNegativeSparseSolutionExactly) {
  std::mt19937_64 rng(3);
  const SparseMatrix a = random_matrix(60, 40, 0.3, rng);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(40);
  x[3] = 2.0;
  x[17] = 0.5;
  x[31] = 1.25;
  const Eigen::VectorXd b = a * x;
  const NnlsResult r = solve_nnls(a, b);
  EXPECT_LT((r.x - x).norm(), 1e-9);
  EXPECT_LE(r.residual_norm, 1e-9);
}

TEST(Nnls, ZeroRightHandSide) {
  std::mt19937_64 rng(4);
  const SparseMatrix a = random_matrix(10, 5, 0.5, rng);
  const NnlsResult r = solve_nnls(a, Eigen::VectorXd::Zero(10));
  EXPECT_EQ(r.x.norm(), 0.0);
}

TEST(Nnls, DimensionMismatchRejected) {
  SparseMatrix a(3, 2);
  EXPECT_THROW(solve_nnls(a, Eigen::VectorXd::Zero(4)), ConfigError);
}
