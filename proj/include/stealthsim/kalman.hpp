#pragma once

#include "stealthsim/matnum.hpp"
#include "stealthsim/model.hpp"

namespace stealthsim {

// Steady-state (one-step predictor) Kalman filter
//   xhat_{k+1} = A xhat_k + B u_k + K z_k,   z_k = y_k - C xhat_k.
struct KalmanDesign {
  Matrix P;        // prediction error covariance (stabilizing DARE solution)
  Matrix Sigma_z;  // innovation covariance C P C^T + Sigma_v
  Matrix K;        // gain A P C^T Sigma_z^{-1}
  Matrix W;        // quadratic weight C^T Sigma_z^{-1} C
  double baseline_mse = 0.0;  // tr(P W), the no-attack value of the metric
};

KalmanDesign design_filter(const StateSpaceModel& m,
                           const SolverOptions& opts = {1e-12, 20000});

// Residual of the filter Riccati recursion at the designed P.
double filter_dare_residual(const StateSpaceModel& m, const KalmanDesign& d);

struct FilterState {
  Vector xhat;
};

FilterState make_filter_state(const StateSpaceModel& m);

// Advance one step: consumes y_k and u_k, returns the innovation z_k, and
// moves xhat to time k+1.
Vector filter_step(const StateSpaceModel& m, const KalmanDesign& d,
                   FilterState* state, const Vector& y, const Vector& u);

}  // namespace stealthsim
