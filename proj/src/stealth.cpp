#include "stealthsim/stealth.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "stealthsim/errors.hpp"

namespace stealthsim {

namespace {

double log_det_pd(const Matrix& M, const char* what) {
  Eigen::LDLT<Matrix> ldlt(symmetrize(M));
  if (ldlt.info() != Eigen::Success) {
    throw SingularCovariance(std::string(what) + ": factorization failed");
  }
  const auto& d = ldlt.vectorD();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) <= 0.0) {
      throw SingularCovariance(std::string(what) + ": matrix is not positive definite");
    }
    sum += std::log(d(i));
  }
  return sum;
}

Matrix pd_inverse(const Matrix& M, const char* what) {
  Eigen::LDLT<Matrix> ldlt(symmetrize(M));
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
    throw SingularCovariance(std::string(what) + ": matrix is not positive definite");
  }
  return ldlt.solve(Matrix::Identity(M.rows(), M.cols()));
}

}  // namespace

double delta_bar(double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("delta_bar: gamma must be >= 0");
  if (gamma == 0.0) return 1.0;
  const double c = 2.0 * gamma + 1.0;
  auto g = [c](double x) { return x - std::log(x) - c; };
  double lo = 1.0;
  double hi = c + 1.0 + std::max(0.0, std::log(c + 1.0));
  for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  double x = hi;  // Newton from above: g is convex increasing on x > 1
  for (int it = 0; it < 3; ++it) {
    const double step = g(x) / (1.0 - 1.0 / x);
    x -= step;
    if (x <= 1.0) {
      x = hi;
      break;
    }
  }
  return x;
}

double delta_bar_slope(double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("delta_bar_slope: gamma must be >= 0");
  if (gamma == 0.0) return std::numeric_limits<double>::infinity();
  const double d = delta_bar(gamma);
  return 2.0 * d / (d - 1.0);
}

ConverseBound converse_bound(double eps, const KalmanDesign& design, int ny) {
  if (eps < 0.0) throw std::invalid_argument("converse_bound: eps must be >= 0");
  if (ny <= 0) throw DimensionMismatch("converse_bound: ny must be positive");
  ConverseBound out;
  out.baseline = design.baseline_mse;
  out.excess = ny * (delta_bar(eps / ny) - 1.0);
  out.bound = out.baseline + out.excess;
  return out;
}

double kld_rate_iid_scaled(double alpha, int ny) {
  if (alpha <= 0.0) {
    throw std::invalid_argument("kld_rate_iid_scaled: alpha must be > 0");
  }
  if (ny <= 0) throw DimensionMismatch("kld_rate_iid_scaled: ny must be positive");
  return 0.5 * ny * (alpha - 1.0 - std::log(alpha));
}

double gaussian_sequence_kld(const std::vector<Matrix>& marginals,
                             const std::vector<Matrix>& residuals,
                             const Matrix& Sigma_z) {
  if (marginals.size() != residuals.size()) {
    throw DimensionMismatch("gaussian_sequence_kld: marginal/residual count mismatch");
  }
  const auto ny = Sigma_z.rows();
  const Matrix Sz_inv = pd_inverse(Sigma_z, "gaussian_sequence_kld");
  const double logdet_Sz = log_det_pd(Sigma_z, "gaussian_sequence_kld");
  double total = 0.0;
  for (std::size_t k = 0; k < marginals.size(); ++k) {
    if (marginals[k].rows() != ny || residuals[k].rows() != ny) {
      throw DimensionMismatch("gaussian_sequence_kld: covariance size mismatch");
    }
    const double tr = (marginals[k] * Sz_inv).trace();
    const double logdet_R = log_det_pd(residuals[k], "gaussian_sequence_kld");
    total += 0.5 * (tr - static_cast<double>(ny) - (logdet_R - logdet_Sz));
  }
  return total;
}

KldDecomposition empirical_kld_decomposition(
    const std::vector<std::vector<Vector>>& runs, const Matrix& Sigma_z,
    int max_lag) {
  const auto ny = Sigma_z.rows();
  if (max_lag < 1) throw std::invalid_argument("empirical_kld_decomposition: max_lag must be >= 1");
  if (runs.size() < 100) {
    throw InsufficientSamples("empirical_kld_decomposition: need at least 100 runs, got " +
                              std::to_string(runs.size()));
  }
  for (const auto& run : runs) {
    if (static_cast<int>(run.size()) < 10 * max_lag) {
      throw InsufficientSamples(
          "empirical_kld_decomposition: each segment needs at least 10 * max_lag steps");
    }
  }

  const Matrix Sz_inv = pd_inverse(Sigma_z, "empirical_kld_decomposition");
  const double logdet_Sz = log_det_pd(Sigma_z, "empirical_kld_decomposition");

  Matrix S = Matrix::Zero(ny, ny);
  long n_total = 0;
  for (const auto& run : runs) {
    for (const auto& z : run) {
      if (z.size() != ny) {
        throw DimensionMismatch("empirical_kld_decomposition: innovation size mismatch");
      }
      S.noalias() += z * z.transpose();
      ++n_total;
    }
  }
  S /= static_cast<double>(n_total);
  S = symmetrize(S);

  KldDecomposition out;
  out.marginal_rate = 0.5 * ((S * Sz_inv).trace() - static_cast<double>(ny) -
                             (log_det_pd(S, "empirical_kld_decomposition") - logdet_Sz));

  const auto L = static_cast<Eigen::Index>(max_lag);
  const auto dx = ny * L;
  Matrix Sxx = Matrix::Zero(dx, dx);
  Matrix Sxy = Matrix::Zero(dx, ny);
  Matrix Syy = Matrix::Zero(ny, ny);
  Vector x(dx);
  long n_reg = 0;
  for (const auto& run : runs) {
    const auto T = static_cast<Eigen::Index>(run.size());
    for (Eigen::Index t = L; t < T; ++t) {
      for (Eigen::Index l = 0; l < L; ++l) {
        x.segment(l * ny, ny) = run[t - 1 - l];
      }
      Sxx.noalias() += x * x.transpose();
      Sxy.noalias() += x * run[t].transpose();
      Syy.noalias() += run[t] * run[t].transpose();
      ++n_reg;
    }
  }
  Sxx /= static_cast<double>(n_reg);
  Sxy /= static_cast<double>(n_reg);
  Syy /= static_cast<double>(n_reg);

  // Tiny relative ridge keeps the normal equations solvable when regressors
  // are numerically collinear; the bias is far below estimator noise.
  const double ridge = 1e-10 * Sxx.trace() / static_cast<double>(dx);
  Sxx += ridge * Matrix::Identity(dx, dx);
  Eigen::LDLT<Matrix> ldlt(symmetrize(Sxx));
  if (ldlt.info() != Eigen::Success) {
    throw SingularCovariance("empirical_kld_decomposition: regressor moment matrix is singular");
  }
  const Matrix theta = ldlt.solve(Sxy);
  const Matrix Sres = symmetrize(Syy - Sxy.transpose() * theta);

  out.mi_rate = 0.5 * (log_det_pd(Syy, "empirical_kld_decomposition") -
                       log_det_pd(Sres, "empirical_kld_decomposition"));
  out.total_rate = out.marginal_rate + out.mi_rate;
  out.samples = n_reg;
  return out;
}

}  // namespace stealthsim
