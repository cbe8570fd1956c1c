#pragma once

#include <Eigen/Dense>

#include "stealthsim/errors.hpp"

namespace stealthsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

// Largest absolute eigenvalue. Zero for an empty matrix.
double spectral_radius(const Matrix& M);

// Symmetric part (M + M^T)/2.
Matrix symmetrize(const Matrix& M);

bool is_symmetric(const Matrix& M, double rel_tol = 1e-9);

// Stabilizing solution X of the filter-form discrete Riccati equation
//   X = F X F^T - F X H^T (H X H^T + R)^{-1} H X F^T + Q
// by the plain fixed-point recursion started from X = Q, each iterate
// symmetrized, stopping when the relative residual drops below
// opts.tolerance. Throws NonConvergence if the cap is reached or the
// iteration diverges, DimensionMismatch on inconsistent shapes.
Matrix solve_dare(const Matrix& F, const Matrix& H, const Matrix& Q,
                  const Matrix& R, const SolverOptions& opts = {});

// Residual ||X - f(X)||_F / max(1, ||X||_F) of the same recursion; lets
// callers audit a solution without re-solving.
double dare_residual(const Matrix& F, const Matrix& H, const Matrix& Q,
                     const Matrix& R, const Matrix& X);

// Solution S of S = F S F^T + Q by a doubling fixed-point iteration.
// Convergence doubles as the stability check: a spectral radius >= 1 shows
// up as divergence and throws NonConvergence.
Matrix solve_dlyap(const Matrix& F, const Matrix& Q,
                   const SolverOptions& opts = {});

// Moore-Penrose pseudoinverse via SVD; singular values below
// rel_tol * sigma_max are treated as zero.
Matrix pseudoinverse(const Matrix& M, double rel_tol = 1e-9);

// Nearest symmetric PSD matrix: symmetrize, eigendecompose, clamp negative
// eigenvalues to zero.
Matrix psd_project(const Matrix& M);

// Factor G with G G^T = Sigma. Cholesky when Sigma is positive definite,
// eigendecomposition square root otherwise (so exactly singular covariances
// still factor). Throws NotSymmetric if Sigma is not symmetric, or has an
// eigenvalue below -1e-9 * max(1, |lambda|_max).
Matrix chol_factor(const Matrix& Sigma);

}  // namespace stealthsim
