#pragma once

// Symmetric eigendecomposition by cyclic Jacobi rotations and the PSD matrix
// square root built on it. Eigen supplies storage and products only.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "saleval/error.hpp"

namespace saleval {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SymmetricEigen {
  Vector values;   // unsorted, matching columns of `vectors`
  Matrix vectors;  // orthonormal columns
  int sweeps = 0;
};

inline double max_asymmetry(const Matrix& m) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
  return worst;
}

/// Cyclic Jacobi: sweeps over all (p, q) pairs until the off-diagonal
/// Frobenius norm falls below tol * ||A||_F.
inline SymmetricEigen jacobi_eigen(const Matrix& input, double tol = 1e-12, int max_sweeps = 100) {
  require(input.rows() == input.cols(), ErrorKind::DimensionMismatch, "jacobi_eigen needs a square matrix");
  const Eigen::Index n = input.rows();
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = a.norm();
  SymmetricEigen out;
  if (scale == 0.0) {
    out.values = Vector::Zero(n);
    out.vectors = v;
    return out;
  }
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(s);
  };
  int sweep = 0;
  for (; sweep < max_sweeps && off_norm() > tol * scale; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  out.values = a.diagonal();
  out.vectors = std::move(v);
  out.sweeps = sweep;
  return out;
}

/// Symmetric S with S*S = M for symmetric positive semidefinite M.
/// Eigenvalues in [-1e-6, 0) are treated as round-off and clamped to zero.
inline Matrix sqrt_psd(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorKind::DimensionMismatch, "sqrt_psd needs a square matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require(max_asymmetry(m) <= 1e-8 * scale, ErrorKind::NotSymmetric,
          "asymmetry " + std::to_string(max_asymmetry(m)));
  const auto eig = jacobi_eigen(m);
  Vector root(eig.values.size());
  for (Eigen::Index i = 0; i < root.size(); ++i) {
    const double lambda = eig.values(i);
    require(lambda >= -1e-6, ErrorKind::IndefiniteMatrix, "eigenvalue " + std::to_string(lambda));
    root(i) = std::sqrt(std::max(lambda, 0.0));
  }
  Matrix s = eig.vectors * root.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (s + s.transpose());
}

/// Solves the symmetric system A x = b; a numerically singular A raises
/// SingularRegression.
inline Vector solve_symmetric(const Matrix& a, const Vector& b) {
  Eigen::LDLT<Matrix> ldlt(a);
  const auto d = ldlt.vectorD().cwiseAbs();
  require(ldlt.info() == Eigen::Success && d.minCoeff() > 1e-12 * std::max(1.0, d.maxCoeff()),
          ErrorKind::SingularRegression, "normal equations are singular");
  return ldlt.solve(b);
}

}  // namespace saleval
