#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stealthsim/sim.hpp"

namespace stealthsim {

enum class DetectorKind { llr, chi_square };

struct DetectorSpec {
  DetectorKind kind = DetectorKind::llr;
  double delta = 0.1;  // miss-probability budget used to calibrate thresholds
  Matrix Sigma_tilde;  // attacked innovation marginal covariance (llr only)
};

// Stationary marginal covariance of the attacked innovations implied by a
// plan: Sigma_z plus the plan's additive part.
Matrix attacked_innovation_cov(const StateSpaceModel& m, const KalmanDesign& d,
                               const AttackSelection& attack);

// Log-likelihood ratio of N(0, Sigma_tilde) against N(0, Sigma_z) for an
// innovation window, treating steps as independent.
double llr_statistic(const std::vector<Vector>& window, const Matrix& Sigma_z,
                     const Matrix& Sigma_tilde);

// Energy statistic sum z^T Sigma_z^{-1} z over the window.
double chi_square_statistic(const std::vector<Vector>& window,
                            const Matrix& Sigma_z);

struct RocRow {
  int horizon = 0;
  double threshold = 0.0;
  double p_false = 0.0;
  double p_detect = 0.0;
};

struct DetectorReport {
  std::vector<RocRow> rows;
  double exponent = 0.0;   // least-squares slope of -ln p_false vs horizon
  double intercept = 0.0;
  int usable_points = 0;   // horizons with at least 10 false alarms
  int trials = 0;
};

// Empirical ROC of a prefix test: `trials` attack-free and `trials` attacked
// runs are simulated with common plant randomness; at each horizon the
// threshold is the empirical H1 quantile that keeps the miss probability
// within delta, and the false-alarm probability is read off the attack-free
// statistics. The decay exponent is fit only over horizons with at least 10
// false-alarm events; fewer than 2 such horizons raises ExponentUnfittable.
DetectorReport estimate_roc(const StateSpaceModel& m, const KalmanDesign& d,
                            const AttackSelection& attack,
                            const DetectorSpec& spec,
                            const std::vector<int>& horizons, int trials,
                            std::uint64_t master_seed, int jobs);

void write_roc_csv(const std::string& path, const DetectorReport& report);

}  // namespace stealthsim
