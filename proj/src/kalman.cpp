#include "stealthsim/kalman.hpp"

#include "stealthsim/errors.hpp"

namespace stealthsim {

KalmanDesign design_filter(const StateSpaceModel& m, const SolverOptions& opts) {
  validate_model(m);
  KalmanDesign d;
  d.P = solve_dare(m.A, m.C, m.Sigma_w, m.Sigma_v, opts);
  d.Sigma_z = symmetrize(m.C * d.P * m.C.transpose() + m.Sigma_v);
  Eigen::LDLT<Matrix> ldlt(d.Sigma_z);
  if (ldlt.info() != Eigen::Success ||
      ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, d.Sigma_z.norm())) {
    throw SingularCovariance("design_filter: innovation covariance is singular");
  }
  d.K = m.A * d.P * m.C.transpose() *
        ldlt.solve(Matrix::Identity(m.ny(), m.ny()));
  d.W = symmetrize(m.C.transpose() *
                   ldlt.solve(Matrix::Identity(m.ny(), m.ny())) * m.C);
  d.baseline_mse = (d.P * d.W).trace();
  return d;
}

double filter_dare_residual(const StateSpaceModel& m, const KalmanDesign& d) {
  return dare_residual(m.A, m.C, m.Sigma_w, m.Sigma_v, d.P);
}

FilterState make_filter_state(const StateSpaceModel& m) {
  return FilterState{Vector::Zero(m.nx())};
}

Vector filter_step(const StateSpaceModel& m, const KalmanDesign& d,
                   FilterState* state, const Vector& y, const Vector& u) {
  if (y.size() != m.ny() || u.size() != m.nu() || state->xhat.size() != m.nx()) {
    throw DimensionMismatch("filter_step: bad vector sizes");
  }
  const Vector z = y - m.C * state->xhat;
  state->xhat = m.A * state->xhat + m.B * u + d.K * z;
  return z;
}

}  // namespace stealthsim
