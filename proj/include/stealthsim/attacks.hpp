#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "stealthsim/kalman.hpp"
#include "stealthsim/matnum.hpp"
#include "stealthsim/model.hpp"

namespace stealthsim {

// Receding-horizon right inverse of the triple (F, B, C): at each step it
// receives the output target for d steps ahead (d = relative delay), solves
// the pending d-step window by a minimal-norm pseudoinverse solve, commits
// the first input block, and advances its internal model copy. When the
// window equations stay consistent (which the rank structure guarantees along
// trajectories of this very recursion), the realized output matches the
// target sequence exactly from step d+1 on.
//
// The committed input is affine in the internal state and the pending
// targets:  phi_k = -G ehat_k + sum_j H_j s_{k+j}.  G and the H_j are exposed
// so bounded re-realizations of the same recursion can reuse them.
class DelayedRightInverse {
 public:
  DelayedRightInverse(const Matrix& F, const Matrix& B, const Matrix& C);

  int delay() const { return delay_; }
  const Matrix& state_gain() const { return state_gain_; }
  const std::vector<Matrix>& target_gains() const { return target_gains_; }
  const Vector& state() const { return state_; }

  // Feed the target for output time (current step + delay); returns the
  // input committed for the current step and advances the internal state.
  Vector step(const Vector& next_target);
  void reset();

 private:
  Matrix F_, B_, C_;
  int delay_ = 0;
  Matrix window_pinv_;                // pseudoinverse of the d-step window map
  std::vector<Matrix> cf_powers_;     // C F^j, j = 1..d
  Matrix state_gain_;                 // G
  std::vector<Matrix> target_gains_;  // H_j, j = 1..d
  Vector state_;
  std::deque<Vector> pending_;        // targets s_{k+1} .. s_{k+d-1}
};

// Additive actuation attack that drives the filter innovation to
// z~_k = z_k + zeta_k with zeta iid N(0, (delta_bar(eps/ny) - 1) Sigma_z),
// realized through a right inverse of the estimation-error dynamics
// (A - K C, B, C). Achieves the converse bound with equality in the limit.
struct AttackPlanA1 {
  double eps = 0.0;
  std::uint64_t seed = 0;
  int delay = 0;
  Matrix zeta_cov;
  Matrix F, B, C;      // error-system triple the runtime inverts
  Matrix state_gain;   // G of the inverse
  Matrix target_gain;  // [H_1 ... H_d] stacked column-wise (nu x d*ny)
};

AttackPlanA1 design_a1(const StateSpaceModel& m, const KalmanDesign& d,
                       double eps, std::uint64_t seed);

// Per-run evaluator for plan A1. The inverse recursion is evaluated along
// its bounded solution: the dynamics F - B G are split into stable and
// anti-stable invariant subspaces and the anti-stable coordinates are
// integrated backward in time over the pre-drawn target sequence (plants
// with zeros outside the unit circle make the naive forward recursion
// explode; the bounded solution realizes the same input law). The actual
// inverse state then differs from the bounded reference only by a
// homogeneous term contracting at the filter rate, which the burn-in
// absorbs.
class A1Runtime {
 public:
  A1Runtime(const AttackPlanA1& plan, int horizon, std::mt19937_64 rng);

  // u -> u + phi_k for the current step.
  Vector next(const Vector& u);
  const std::vector<Vector>& injected_inputs() const { return phi_; }
  // Designed innovation offsets s_1..s_T (zero over the first `delay` steps).
  const std::vector<Vector>& targets() const { return targets_; }

 private:
  std::vector<Vector> phi_;
  std::vector<Vector> targets_;
  std::size_t index_ = 0;
};

// Additive actuation attack built from a fictitious feedback loop: an
// auxiliary state e~ driven by designed noise zeta through the cheap-control
// closed loop F - B L. Evaluable in closed form, reaching a predictable
// (eps, error) operating point strictly inside the converse bound.
struct AttackPlanA2 {
  double eps = 0.0;
  double alpha = 0.0;  // amplitude found by bisection on the predicted eps
  std::uint64_t seed = 0;
  Matrix F, B;         // error-system pieces used by the runtime
  Matrix L;            // cheap-control feedback gain
  Matrix Sigma_zeta;   // designed driving covariance (alpha^2 * unit shaping)
  Matrix S;            // auxiliary-filter prediction covariance
  Matrix Sigma_e;      // stationary covariance of e~
  double predicted_eps = 0.0;
  double predicted_pw = 0.0;
  double shaping_mismatch = 0.0;  // ||C Sigma_e C^T - alpha^2 Sigma_z|| rel.
};

struct A2Prediction {
  double eps = 0.0;
  double pw = 0.0;
  Matrix S;
  Matrix Sigma_e;
};

// Feedback gain L minimizing the state cost x^T W x with vanishing input
// penalty, computed by solving the control Riccati equation along a
// decreasing penalty schedule until L stops moving.
Matrix cheap_lqg_gain(const Matrix& F, const Matrix& B, const Matrix& W,
                      const std::vector<double>& eta_schedule = {1e-2, 1e-4,
                                                                 1e-6, 1e-8},
                      double stop_tol = 1e-6,
                      const SolverOptions& opts = {1e-12, 20000});

// Driving covariance that shapes C e~ toward alpha^2 Sigma_z: the PSD
// projection of B^+ (M0 - F_L M0 F_L^T) B^+^T with M0 = C^+ Sigma_z C^+^T,
// scaled by alpha^2.
Matrix sigma_zeta_shaping(const Matrix& F_L, const Matrix& B, const Matrix& C,
                          const Matrix& Sigma_z, double alpha);

// Closed-form operating point of plan A2 for a given driving covariance.
// Throws UnstableClosedLoop if F_L is not Schur stable.
A2Prediction predict_a2(const Matrix& F_L, const Matrix& B, const Matrix& C,
                        const Matrix& Sigma_z, const Matrix& W,
                        const Matrix& Sigma_zeta, double baseline_mse,
                        const SolverOptions& opts = {1e-12, 20000});

double predicted_eps_a2(const Matrix& F_L, const Matrix& B, const Matrix& C,
                        const Matrix& Sigma_z, const Matrix& W,
                        const Matrix& Sigma_zeta);
double predicted_pw_a2(const Matrix& Sigma_e, const KalmanDesign& design);

// Bisection on the amplitude alpha so the predicted eps matches the target
// within tol. Throws NoBracket if the target is not positive or cannot be
// bracketed.
double solve_alpha(const Matrix& F_L, const Matrix& B, const Matrix& C,
                   const Matrix& Sigma_z, const Matrix& W,
                   const Matrix& Sigma_zeta_unit, double eps_target,
                   double tol = 1e-6);

AttackPlanA2 design_a2(const StateSpaceModel& m, const KalmanDesign& d,
                       double eps, std::uint64_t seed);

class A2Runtime {
 public:
  A2Runtime(const AttackPlanA2& plan, std::mt19937_64 rng);

  // u -> u + L e~_k - zeta_k; advances e~.
  Vector next(const Vector& u);
  const Vector& aux_state() const { return e_; }

 private:
  const AttackPlanA2* plan_;
  Matrix FL_, zeta_factor_;
  Vector e_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_;
};

// Plan files: one [attack_plan] stanza, scalars plus inline matrices.
void save_plan(const std::string& path, const AttackPlanA1& plan);
void save_plan(const std::string& path, const AttackPlanA2& plan);
std::variant<AttackPlanA1, AttackPlanA2> load_plan(const std::string& path);

}  // namespace stealthsim
