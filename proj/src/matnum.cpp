#include "stealthsim/matnum.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

namespace stealthsim {

namespace {

constexpr double kDivergenceNorm = 1e150;

std::string shape(const Matrix& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

// One filter-recursion step X -> F X F^T - F X H^T (H X H^T + R)^{-1} H X F^T + Q.
Matrix dare_step(const Matrix& F, const Matrix& H, const Matrix& Q,
                 const Matrix& R, const Matrix& X) {
  const Matrix HXHR = H * X * H.transpose() + R;
  Eigen::LDLT<Matrix> ldlt(symmetrize(HXHR));
  if (ldlt.info() != Eigen::Success) {
    throw NonConvergence("dare: innovation block H X H^T + R is not factorable");
  }
  const Matrix FXHt = F * X * H.transpose();
  const Matrix next = F * X * F.transpose() -
                      FXHt * ldlt.solve(FXHt.transpose()) + Q;
  return symmetrize(next);
}

}  // namespace

double spectral_radius(const Matrix& M) {
  if (M.rows() == 0) return 0.0;
  if (M.rows() != M.cols()) {
    throw DimensionMismatch("spectral_radius: matrix must be square, got " + shape(M));
  }
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

bool is_symmetric(const Matrix& M, double rel_tol) {
  if (M.rows() != M.cols()) return false;
  const double scale = std::max(1.0, M.norm());
  return (M - M.transpose()).norm() <= rel_tol * scale;
}

Matrix solve_dare(const Matrix& F, const Matrix& H, const Matrix& Q,
                  const Matrix& R, const SolverOptions& opts) {
  const auto n = F.rows();
  const auto m = H.rows();
  if (F.cols() != n) throw DimensionMismatch("dare: F must be square, got " + shape(F));
  if (H.cols() != n) throw DimensionMismatch("dare: H is " + shape(H) + ", expected cols " + std::to_string(n));
  if (Q.rows() != n || Q.cols() != n) throw DimensionMismatch("dare: Q is " + shape(Q));
  if (R.rows() != m || R.cols() != m) throw DimensionMismatch("dare: R is " + shape(R));

  Matrix X = symmetrize(Q);
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Matrix next = dare_step(F, H, Q, R, X);
    const double denom = std::max(1.0, X.norm());
    const double rel = (next - X).norm() / denom;
    X = next;
    if (!X.allFinite() || X.norm() > kDivergenceNorm) {
      throw NonConvergence("dare: iteration diverged");
    }
    if (rel <= opts.tolerance) return X;
  }
  throw NonConvergence("dare: no convergence after " +
                       std::to_string(opts.max_iterations) + " iterations");
}

double dare_residual(const Matrix& F, const Matrix& H, const Matrix& Q,
                     const Matrix& R, const Matrix& X) {
  const Matrix next = dare_step(F, H, Q, R, X);
  return (next - X).norm() / std::max(1.0, X.norm());
}

Matrix solve_dlyap(const Matrix& F, const Matrix& Q, const SolverOptions& opts) {
  const auto n = F.rows();
  if (F.cols() != n) throw DimensionMismatch("dlyap: F must be square, got " + shape(F));
  if (Q.rows() != n || Q.cols() != n) {
    throw DimensionMismatch("dlyap: Q is " + shape(Q) + ", expected " + shape(F));
  }

  Matrix S = symmetrize(Q);
  Matrix M = F;
  // Doubling: after j rounds S holds sum_{k < 2^j} F^k Q F^k^T and M = F^(2^j).
  // For a Schur-stable F the update term vanishes geometrically; otherwise the
  // iterates blow up and the guard below reports instability.
  const int cap = std::min(opts.max_iterations, 512);
  for (int it = 0; it < cap; ++it) {
    const Matrix term = M * S * M.transpose();
    S = symmetrize(S + term);
    M = M * M;
    if (!S.allFinite() || !M.allFinite() || S.norm() > kDivergenceNorm ||
        M.norm() > kDivergenceNorm) {
      throw NonConvergence("dlyap: iteration diverged (F is not Schur stable)");
    }
    if (term.norm() <= opts.tolerance * std::max(1.0, S.norm()) &&
        M.norm() < 1.0) {
      const double res = (F * S * F.transpose() + Q - S).norm() /
                         std::max(1.0, S.norm());
      if (res <= 100 * opts.tolerance) return S;
    }
  }
  throw NonConvergence("dlyap: no convergence (spectral radius likely >= 1)");
}

Matrix pseudoinverse(const Matrix& M, double rel_tol) {
  if (M.rows() == 0 || M.cols() == 0) return Matrix::Zero(M.cols(), M.rows());
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = rel_tol * sv(0);
  Vector inv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix psd_project(const Matrix& M) {
  if (M.rows() != M.cols()) {
    throw DimensionMismatch("psd_project: matrix must be square, got " + shape(M));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M));
  if (es.info() != Eigen::Success) {
    throw NonConvergence("psd_project: eigendecomposition failed");
  }
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * lam.asDiagonal() *
                    es.eigenvectors().transpose());
}

Matrix chol_factor(const Matrix& Sigma) {
  if (!is_symmetric(Sigma)) {
    throw NotSymmetric("chol_factor: matrix is not symmetric (" + shape(Sigma) + ")");
  }
  const Matrix S = symmetrize(Sigma);
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() == Eigen::Success) {
    return Matrix(llt.matrixL());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success) {
    throw NonConvergence("chol_factor: eigendecomposition failed");
  }
  const Vector lam = es.eigenvalues();
  const double floor = -1e-9 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (lam.minCoeff() < floor) {
    throw NotSymmetric("chol_factor: matrix is not positive semidefinite (min eigenvalue " +
                       std::to_string(lam.minCoeff()) + ")");
  }
  return es.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace stealthsim
