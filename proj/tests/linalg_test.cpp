#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "saleval/linalg.hpp"
#include "saleval/metrics.hpp"

using namespace saleval;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> d;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = d(eng);
  return m;
}

// Second route: Eigen's tridiagonal QR solver.
Matrix eigen_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

}  // namespace

TEST(Jacobi, DiagonalizesRandomSymmetric) {
  Matrix b = random_matrix(20, 20, 1);
  Matrix a = b + b.transpose();
  const auto e = jacobi_eigen(a);
  const Matrix recon = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  EXPECT_LT(rel(recon, a), 1e-12);
  EXPECT_LT((e.vectors.transpose() * e.vectors - Matrix::Identity(20, 20)).norm(), 1e-12);

  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  Vector mine = e.values;
  std::sort(mine.data(), mine.data() + mine.size());
  EXPECT_LT((mine - es.eigenvalues()).norm(), 1e-10 * es.eigenvalues().norm());
}

TEST(Jacobi, ZeroMatrix) {
  const auto e = jacobi_eigen(Matrix::Zero(4, 4));
  EXPECT_EQ(e.values, Vector::Zero(4));
}

TEST(SqrtPsd, Identity) {
  EXPECT_EQ(sqrt_psd(Matrix::Identity(5, 5)), Matrix::Identity(5, 5));
}

TEST(SqrtPsd, Diagonal) {
  Matrix m = Vector(Eigen::Vector2d(4, 9)).asDiagonal();
  const Matrix s = sqrt_psd(m);
  EXPECT_NEAR(s(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(s(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(s(0, 1), 0.0, 1e-14);
}

class SqrtPsdRandom : public ::testing::TestWithParam<int> {};

TEST_P(SqrtPsdRandom, ReconstructsAndMatchesEigenSolver) {
  const int n = GetParam();
  for (int rank_def = 0; rank_def < 2; ++rank_def) {
    const Eigen::Index rows = rank_def ? std::max(1, n / 2) : n;
    const Matrix b = random_matrix(rows, n, 100 + n + rank_def);
    const Matrix a = b.transpose() * b;
    const Matrix s = sqrt_psd(a);
    EXPECT_LE(rel(s * s, a), 1e-8) << "n=" << n << " rank_deficient=" << rank_def;
    EXPECT_EQ(max_asymmetry(s), 0.0);
    EXPECT_LE(rel(s, eigen_sqrt(a)), 1e-7) << "n=" << n << " rank_deficient=" << rank_def;
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, SqrtPsdRandom, ::testing::Values(1, 2, 3, 8, 32, 64, 128));

TEST(SqrtPsd, RejectsAsymmetric) {
  Matrix m(2, 2);
  m << 1, 0.5, 0.4, 1;
  try {
    sqrt_psd(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSymmetric);
  }
}

TEST(SqrtPsd, RejectsIndefinite) {
  Matrix m(2, 2);
  m << 1, 0, 0, -0.5;
  try {
    sqrt_psd(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IndefiniteMatrix);
  }
}

TEST(SqrtPsd, ClampsRoundoffNegatives) {
  Matrix m(2, 2);
  m << 1, 0, 0, -1e-9;
  const Matrix s = sqrt_psd(m);
  EXPECT_EQ(s(1, 1), 0.0);
}

TEST(SolveSymmetric, MatchesQr) {
  const Matrix b = random_matrix(12, 6, 5);
  const Matrix a = b.transpose() * b;
  const Vector rhs = random_matrix(6, 1, 6);
  const Vector x = solve_symmetric(a, rhs);
  const Vector oracle = a.colPivHouseholderQr().solve(rhs);
  EXPECT_LT((x - oracle).norm() / oracle.norm(), 1e-10);
}

TEST(SolveSymmetric, SingularThrows) {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 0) = 1;
  a(1, 1) = 1;
  try {
    solve_symmetric(a, Vector::Ones(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularRegression);
  }
}
