#pragma once

#include <vector>

#include "stealthsim/kalman.hpp"
#include "stealthsim/matnum.hpp"

namespace stealthsim {

// Unique solution x >= 1 of x = 2*gamma + 1 + ln x. Strictly increasing in
// gamma, delta_bar(0) = 1. Bisection plus Newton polish; residual stays
// below 1e-12. Throws std::invalid_argument for gamma < 0.
double delta_bar(double gamma);

// Analytic derivative d delta_bar / d gamma = 2*delta_bar/(delta_bar - 1).
// Strictly greater than 2 and decreasing toward 2 as gamma grows; infinite
// at gamma = 0.
double delta_bar_slope(double gamma);

struct ConverseBound {
  double bound = 0.0;     // baseline + excess
  double baseline = 0.0;  // tr(P W)
  double excess = 0.0;    // ny * (delta_bar(eps/ny) - 1)
};

// Largest quadratic estimation-error level any attacker can force while
// keeping its innovation-stream KL divergence rate at most eps.
ConverseBound converse_bound(double eps, const KalmanDesign& design, int ny);

// KL divergence rate of iid N(0, alpha * Sigma) from iid N(0, Sigma):
// (ny/2) * (alpha - 1 - ln alpha). Throws std::invalid_argument unless
// alpha > 0.
double kld_rate_iid_scaled(double alpha, int ny);

// Total KL divergence of a zero-mean Gaussian sequence from iid N(0, Sigma_z),
// given per-step marginal covariances and one-step-ahead residual (conditional)
// covariances. Residuals must be positive definite.
double gaussian_sequence_kld(const std::vector<Matrix>& marginals,
                             const std::vector<Matrix>& residuals,
                             const Matrix& Sigma_z);

struct KldDecomposition {
  double marginal_rate = 0.0;  // per-step KLD of the pooled marginal
  double mi_rate = 0.0;        // temporal-dependence (mutual information) part
  double total_rate = 0.0;     // marginal_rate + mi_rate
  long samples = 0;            // regression samples behind the mi estimate
};

// Plug-in estimate of the innovation KLD rate from simulated runs
// (post burn-in segments, one inner vector per run). The marginal part uses
// the pooled zero-mean second moment; the dependence part fits a pooled
// linear predictor on max_lag past innovations and compares target and
// residual covariance determinants. Requires at least 100 runs and segments
// of at least 10 * max_lag steps (InsufficientSamples otherwise).
KldDecomposition empirical_kld_decomposition(
    const std::vector<std::vector<Vector>>& runs, const Matrix& Sigma_z,
    int max_lag);

}  // namespace stealthsim
