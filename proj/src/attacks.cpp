#include "stealthsim/attacks.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cerrno>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <stdexcept>

#include "stealthsim/errors.hpp"
#include "stealthsim/stealth.hpp"
#include "stealthsim/textio.hpp"

namespace stealthsim {

namespace {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

double log_det_pd(const Matrix& M, const char* what) {
  Eigen::LDLT<Matrix> ldlt(symmetrize(M));
  if (ldlt.info() != Eigen::Success) {
    throw SingularCovariance(std::string(what) + ": factorization failed");
  }
  const auto& d = ldlt.vectorD();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) <= 0.0) {
      throw SingularCovariance(std::string(what) + ": matrix not positive definite");
    }
    sum += std::log(d(i));
  }
  return sum;
}

Vector gaussian_vector(Eigen::Index n, std::mt19937_64* rng,
                       std::normal_distribution<double>* dist) {
  Vector g(n);
  for (Eigen::Index i = 0; i < n; ++i) g(i) = (*dist)(*rng);
  return g;
}

std::uint64_t parse_seed(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ParseError("empty seed field");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw ParseError("not a seed: '" + t + "'");
  }
  return v;
}

}  // namespace

DelayedRightInverse::DelayedRightInverse(const Matrix& F, const Matrix& B,
                                         const Matrix& C)
    : F_(F), B_(B), C_(C) {
  const auto inv = check_right_invertible(F, B, C);
  if (!inv.right_invertible) {
    throw NotRightInvertible("delayed right inverse: system is not right invertible");
  }
  delay_ = inv.relative_delay;
  const auto nu = B.cols();
  const auto ny = C.rows();
  const int d = delay_;

  const auto marks = markov_params(F, B, C, d);
  Matrix T = Matrix::Zero(d * ny, d * nu);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      T.block(i * ny, j * nu, ny, nu) = marks[i - j];
    }
  }
  window_pinv_ = pseudoinverse(T);

  cf_powers_.clear();
  Matrix CFj = C;
  for (int j = 1; j <= d; ++j) {
    CFj = CFj * F;
    cf_powers_.push_back(CFj);
  }

  const Matrix first_block = window_pinv_.topRows(nu);
  target_gains_.clear();
  state_gain_ = Matrix::Zero(nu, F.rows());
  for (int j = 1; j <= d; ++j) {
    const Matrix Hj = first_block.middleCols((j - 1) * ny, ny);
    target_gains_.push_back(Hj);
    state_gain_ += Hj * cf_powers_[j - 1];
  }
  reset();
}

void DelayedRightInverse::reset() {
  state_ = Vector::Zero(F_.rows());
  pending_.assign(delay_ - 1, Vector::Zero(C_.rows()));
}

Vector DelayedRightInverse::step(const Vector& next_target) {
  if (next_target.size() != C_.rows()) {
    throw DimensionMismatch("delayed right inverse: target has wrong size");
  }
  pending_.push_back(next_target);
  Vector phi = -state_gain_ * state_;
  for (int j = 0; j < delay_; ++j) phi += target_gains_[j] * pending_[j];
  state_ = F_ * state_ + B_ * phi;
  pending_.pop_front();
  return phi;
}

AttackPlanA1 design_a1(const StateSpaceModel& m, const KalmanDesign& d,
                       double eps, std::uint64_t seed) {
  if (eps < 0.0) throw std::invalid_argument("design_a1: eps must be >= 0");
  AttackPlanA1 plan;
  plan.eps = eps;
  plan.seed = seed;
  plan.F = m.A - d.K * m.C;
  plan.B = m.B;
  plan.C = m.C;
  DelayedRightInverse inv(plan.F, plan.B, plan.C);
  plan.delay = inv.delay();
  plan.state_gain = inv.state_gain();
  plan.target_gain = Matrix::Zero(m.nu(), plan.delay * m.ny());
  for (int j = 0; j < plan.delay; ++j) {
    plan.target_gain.middleCols(j * m.ny(), m.ny()) = inv.target_gains()[j];
  }
  const double scale = delta_bar(eps / m.ny()) - 1.0;
  plan.zeta_cov = scale * d.Sigma_z;
  return plan;
}

A1Runtime::A1Runtime(const AttackPlanA1& plan, int horizon, std::mt19937_64 rng) {
  if (horizon <= 0) throw std::invalid_argument("A1Runtime: horizon must be positive");
  const auto nx = plan.F.rows();
  const auto nu = plan.B.cols();
  const auto ny = plan.C.rows();
  const int d = plan.delay;
  std::vector<Matrix> H(d);
  for (int j = 0; j < d; ++j) H[j] = plan.target_gain.middleCols(j * ny, ny);
  const Matrix& G = plan.state_gain;
  const Matrix Phi = plan.F - plan.B * G;

  Eigen::EigenSolver<Matrix> es(Phi);
  if (es.info() != Eigen::Success) {
    throw NonConvergence("A1Runtime: eigendecomposition of inverse dynamics failed");
  }
  std::vector<int> unstable;
  for (Eigen::Index i = 0; i < nx; ++i) {
    if (std::abs(es.eigenvalues()(i)) > 1.0 + 1e-9) unstable.push_back(static_cast<int>(i));
  }
  const int q = static_cast<int>(unstable.size());
  // Anti-stable coordinates need a tail beyond the horizon so the backward
  // sweep has forgotten its truncated boundary by the time it reaches the
  // recorded window.
  const int ext = q > 0 ? 200 : 0;
  const int total = horizon + ext;

  // Target sequence: zero for the first d output times (the inverse cannot
  // affect them), then the designed disturbance.
  const Matrix zeta_factor = chol_factor(plan.zeta_cov);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<Vector> s(total + d + 1);
  for (int tau = 1; tau <= total + d; ++tau) {
    if (tau <= d) {
      s[tau] = Vector::Zero(ny);
    } else {
      s[tau] = zeta_factor * gaussian_vector(ny, &rng, &dist);
    }
  }

  std::vector<Vector> w_in(total + 1);
  for (int k = 1; k <= total; ++k) {
    Vector w = Vector::Zero(nu);
    for (int j = 1; j <= d; ++j) w += H[j - 1] * s[k + j];
    w_in[k] = w;
  }

  std::vector<Vector> eref(total + 1);
  if (q == 0) {
    Vector x = Vector::Zero(nx);
    for (int k = 1; k <= total; ++k) {
      eref[k] = x;
      x = Phi * x + plan.B * w_in[k];
    }
  } else {
    const CMatrix V = es.eigenvectors();
    CMatrix Ur(nx, q);
    for (int i = 0; i < q; ++i) Ur.col(i) = V.col(unstable[i]);

    Eigen::EigenSolver<Matrix> esl(Matrix(Phi.transpose()));
    if (esl.info() != Eigen::Success) {
      throw NonConvergence("A1Runtime: left eigendecomposition failed");
    }
    CMatrix Ul(nx, q);
    std::vector<bool> used(nx, false);
    for (int i = 0; i < q; ++i) {
      const auto lam = es.eigenvalues()(unstable[i]);
      int best = -1;
      double best_dist = 0.0;
      for (Eigen::Index j = 0; j < nx; ++j) {
        if (used[j]) continue;
        const double dist_j = std::abs(esl.eigenvalues()(j) - lam);
        if (best < 0 || dist_j < best_dist) {
          best = static_cast<int>(j);
          best_dist = dist_j;
        }
      }
      used[best] = true;
      Ul.col(i) = esl.eigenvectors().col(best);
    }

    const CMatrix Mq = Ul.adjoint() * Ur;
    Eigen::FullPivLU<CMatrix> mq_lu(Mq);
    if (!mq_lu.isInvertible()) {
      throw NonConvergence("A1Runtime: inverse-dynamics subspace split failed");
    }
    const CMatrix Lam = mq_lu.solve(Ul.adjoint() * Phi * Ur);
    const CMatrix Inj = mq_lu.solve(Ul.adjoint() * plan.B.cast<std::complex<double>>());
    const Matrix Pu = (Ur * mq_lu.solve(Ul.adjoint())).real();
    Eigen::FullPivLU<CMatrix> lam_lu(Lam);
    if (!lam_lu.isInvertible()) {
      throw NonConvergence("A1Runtime: anti-stable block is singular");
    }

    std::vector<CVector> c(total + 2, CVector::Zero(q));
    for (int k = total; k >= 1; --k) {
      c[k] = lam_lu.solve(c[k + 1] - Inj * w_in[k].cast<std::complex<double>>());
    }
    Vector xs = Vector::Zero(nx);
    for (int k = 1; k <= total; ++k) {
      eref[k] = xs + (Ur * c[k]).real();
      Vector nxt = Phi * xs + plan.B * w_in[k];
      xs = nxt - Pu * nxt;  // keep the forward sweep out of the anti-stable subspace
    }
  }

  phi_.resize(horizon);
  for (int k = 1; k <= horizon; ++k) {
    phi_[k - 1] = -G * eref[k] + w_in[k];
  }
  targets_.assign(s.begin() + 1, s.begin() + horizon + 1);
}

Vector A1Runtime::next(const Vector& u) {
  if (index_ >= phi_.size()) {
    throw DimensionMismatch("A1Runtime: stepped past the prepared horizon");
  }
  const Vector& phi = phi_[index_++];
  if (u.size() != phi.size()) {
    throw DimensionMismatch("A1Runtime: input has wrong size");
  }
  return u + phi;
}

Matrix cheap_lqg_gain(const Matrix& F, const Matrix& B, const Matrix& W,
                      const std::vector<double>& eta_schedule, double stop_tol,
                      const SolverOptions& opts) {
  if (eta_schedule.empty()) {
    throw std::invalid_argument("cheap_lqg_gain: empty penalty schedule");
  }
  const auto nu = B.cols();
  Matrix L_prev;
  Matrix L;
  for (const double eta : eta_schedule) {
    if (eta <= 0.0) throw std::invalid_argument("cheap_lqg_gain: penalties must be > 0");
    const Matrix R = eta * Matrix::Identity(nu, nu);
    const Matrix T = solve_dare(F.transpose(), B.transpose(), W, R, opts);
    const Matrix BtTB = B.transpose() * T * B + R;
    Eigen::LDLT<Matrix> ldlt(symmetrize(BtTB));
    if (ldlt.info() != Eigen::Success) {
      throw NonConvergence("cheap_lqg_gain: input block not factorable");
    }
    L = ldlt.solve(B.transpose() * T * F);
    if (L_prev.size() > 0) {
      const double rel = (L - L_prev).norm() / std::max(1.0, L_prev.norm());
      if (rel <= stop_tol) return L;
    }
    L_prev = L;
  }
  return L;
}

Matrix sigma_zeta_shaping(const Matrix& F_L, const Matrix& B, const Matrix& C,
                          const Matrix& Sigma_z, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("sigma_zeta_shaping: alpha must be >= 0");
  const Matrix Cp = pseudoinverse(C);
  const Matrix Bp = pseudoinverse(B);
  const Matrix M0 = Cp * Sigma_z * Cp.transpose();
  const Matrix delta = M0 - F_L * M0 * F_L.transpose();
  return (alpha * alpha) * psd_project(Bp * delta * Bp.transpose());
}

A2Prediction predict_a2(const Matrix& F_L, const Matrix& B, const Matrix& C,
                        const Matrix& Sigma_z, const Matrix& W,
                        const Matrix& Sigma_zeta, double baseline_mse,
                        const SolverOptions& opts) {
  const Matrix Q = symmetrize(B * Sigma_zeta * B.transpose());
  A2Prediction out;
  try {
    out.Sigma_e = solve_dlyap(F_L, Q, opts);
  } catch (const NonConvergence&) {
    throw UnstableClosedLoop("predict_a2: F - B L is not Schur stable");
  }
  out.S = solve_dare(F_L, C, Q, Sigma_z, opts);
  const Matrix Rinf = symmetrize(C * out.S * C.transpose() + Sigma_z);
  const double logdet_gain =
      log_det_pd(Rinf, "predict_a2") - log_det_pd(Sigma_z, "predict_a2");
  const double tr_term = (out.Sigma_e * W).trace();
  out.eps = 0.5 * tr_term - 0.5 * logdet_gain;
  out.pw = baseline_mse + tr_term;
  return out;
}

double predicted_eps_a2(const Matrix& F_L, const Matrix& B, const Matrix& C,
                        const Matrix& Sigma_z, const Matrix& W,
                        const Matrix& Sigma_zeta) {
  return predict_a2(F_L, B, C, Sigma_z, W, Sigma_zeta, 0.0).eps;
}

double predicted_pw_a2(const Matrix& Sigma_e, const KalmanDesign& design) {
  return design.baseline_mse + (Sigma_e * design.W).trace();
}

double solve_alpha(const Matrix& F_L, const Matrix& B, const Matrix& C,
                   const Matrix& Sigma_z, const Matrix& W,
                   const Matrix& Sigma_zeta_unit, double eps_target,
                   double tol) {
  if (eps_target <= 0.0) {
    throw NoBracket("solve_alpha: target divergence rate must be positive");
  }
  auto f = [&](double alpha) {
    const Matrix sz = (alpha * alpha) * Sigma_zeta_unit;
    return predicted_eps_a2(F_L, B, C, Sigma_z, W, sz);
  };
  double hi = 1.0;
  double fhi = f(hi);
  int doublings = 0;
  while (fhi < eps_target) {
    hi *= 2.0;
    if (++doublings > 60) {
      throw NoBracket("solve_alpha: could not bracket the target rate");
    }
    fhi = f(hi);
  }
  if (std::abs(fhi - eps_target) <= tol) return hi;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm - eps_target) <= tol) return mid;
    (fm < eps_target ? lo : hi) = mid;
  }
  throw NonConvergence("solve_alpha: bisection failed to reach tolerance");
}

AttackPlanA2 design_a2(const StateSpaceModel& m, const KalmanDesign& d,
                       double eps, std::uint64_t seed) {
  AttackPlanA2 plan;
  plan.eps = eps;
  plan.seed = seed;
  plan.F = m.A - d.K * m.C;
  plan.B = m.B;
  plan.L = cheap_lqg_gain(plan.F, plan.B, d.W);
  const Matrix FL = plan.F - plan.B * plan.L;
  const Matrix unit = sigma_zeta_shaping(FL, plan.B, m.C, d.Sigma_z, 1.0);
  plan.alpha = solve_alpha(FL, plan.B, m.C, d.Sigma_z, d.W, unit, eps);
  plan.Sigma_zeta = (plan.alpha * plan.alpha) * unit;
  const auto pred = predict_a2(FL, plan.B, m.C, d.Sigma_z, d.W,
                               plan.Sigma_zeta, d.baseline_mse);
  plan.S = pred.S;
  plan.Sigma_e = pred.Sigma_e;
  plan.predicted_eps = pred.eps;
  plan.predicted_pw = pred.pw;
  const Matrix target = (plan.alpha * plan.alpha) * d.Sigma_z;
  plan.shaping_mismatch =
      (m.C * plan.Sigma_e * m.C.transpose() - target).norm() / target.norm();
  return plan;
}

A2Runtime::A2Runtime(const AttackPlanA2& plan, std::mt19937_64 rng)
    : plan_(&plan),
      FL_(plan.F - plan.B * plan.L),
      zeta_factor_(chol_factor(plan.Sigma_zeta)),
      e_(Vector::Zero(plan.F.rows())),
      rng_(rng),
      gauss_(0.0, 1.0) {}

Vector A2Runtime::next(const Vector& u) {
  if (u.size() != plan_->B.cols()) {
    throw DimensionMismatch("A2Runtime: input has wrong size");
  }
  const Vector zeta = zeta_factor_ * gaussian_vector(zeta_factor_.cols(), &rng_, &gauss_);
  const Vector out = u + plan_->L * e_ - zeta;
  e_ = FL_ * e_ + plan_->B * zeta;
  return out;
}

void save_plan(const std::string& path, const AttackPlanA1& plan) {
  Stanza st;
  st.name = "attack_plan";
  st.scalars["kind"] = "a1";
  st.scalars["eps"] = format_double(plan.eps);
  st.scalars["seed"] = std::to_string(plan.seed);
  st.scalars["delay"] = std::to_string(plan.delay);
  st.matrices["zeta_cov"] = plan.zeta_cov;
  st.matrices["F"] = plan.F;
  st.matrices["B"] = plan.B;
  st.matrices["C"] = plan.C;
  st.matrices["state_gain"] = plan.state_gain;
  st.matrices["target_gain"] = plan.target_gain;
  write_stanzas(path, {st});
}

void save_plan(const std::string& path, const AttackPlanA2& plan) {
  Stanza st;
  st.name = "attack_plan";
  st.scalars["kind"] = "a2";
  st.scalars["eps"] = format_double(plan.eps);
  st.scalars["alpha"] = format_double(plan.alpha);
  st.scalars["seed"] = std::to_string(plan.seed);
  st.scalars["predicted_eps"] = format_double(plan.predicted_eps);
  st.scalars["predicted_pw"] = format_double(plan.predicted_pw);
  st.scalars["shaping_mismatch"] = format_double(plan.shaping_mismatch);
  st.matrices["F"] = plan.F;
  st.matrices["B"] = plan.B;
  st.matrices["L"] = plan.L;
  st.matrices["Sigma_zeta"] = plan.Sigma_zeta;
  st.matrices["S"] = plan.S;
  st.matrices["Sigma_e"] = plan.Sigma_e;
  write_stanzas(path, {st});
}

std::variant<AttackPlanA1, AttackPlanA2> load_plan(const std::string& path) {
  const auto stanzas = parse_stanzas(path);
  const Stanza& st = find_stanza(stanzas, "attack_plan");
  const std::string kind = st.scalar("kind");
  if (kind == "a1") {
    AttackPlanA1 p;
    p.eps = st.scalar_double("eps");
    p.seed = parse_seed(st.scalar("seed"));
    p.delay = static_cast<int>(st.scalar_long("delay"));
    p.zeta_cov = st.matrix("zeta_cov");
    p.F = st.matrix("F");
    p.B = st.matrix("B");
    p.C = st.matrix("C");
    p.state_gain = st.matrix("state_gain");
    p.target_gain = st.matrix("target_gain");
    return p;
  }
  if (kind == "a2") {
    AttackPlanA2 p;
    p.eps = st.scalar_double("eps");
    p.alpha = st.scalar_double("alpha");
    p.seed = parse_seed(st.scalar("seed"));
    p.predicted_eps = st.scalar_double("predicted_eps");
    p.predicted_pw = st.scalar_double("predicted_pw");
    p.shaping_mismatch = st.scalar_double("shaping_mismatch");
    p.F = st.matrix("F");
    p.B = st.matrix("B");
    p.L = st.matrix("L");
    p.Sigma_zeta = st.matrix("Sigma_zeta");
    p.S = st.matrix("S");
    p.Sigma_e = st.matrix("Sigma_e");
    return p;
  }
  throw ParseError("attack plan: unknown kind '" + kind + "'");
}

}  // namespace stealthsim
