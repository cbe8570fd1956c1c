#include "stealthsim/sim.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include "stealthsim/errors.hpp"
#include "stealthsim/stealth.hpp"
#include "stealthsim/textio.hpp"

namespace stealthsim {

namespace {

constexpr double kOverflowLimit = 1e280;

Matrix pd_inverse(const Matrix& M, const char* what) {
  Eigen::LDLT<Matrix> ldlt(symmetrize(M));
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
    throw SingularCovariance(std::string(what) + ": matrix is not positive definite");
  }
  return ldlt.solve(Matrix::Identity(M.rows(), M.cols()));
}

void check_config(const ExperimentConfig& cfg) {
  if (cfg.runs < 1) throw std::invalid_argument("experiment: runs must be >= 1");
  if (cfg.horizon < 1) throw std::invalid_argument("experiment: horizon must be >= 1");
  if (cfg.burn_in < 0 || cfg.burn_in >= cfg.horizon) {
    throw std::invalid_argument("experiment: need 0 <= burn_in < horizon");
  }
  if (cfg.jobs < 1) throw std::invalid_argument("experiment: jobs must be >= 1");
}

}  // namespace

std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t run_index,
                            std::uint32_t tag) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(master_seed & 0xffffffffu),
      static_cast<std::uint32_t>(master_seed >> 32),
      static_cast<std::uint32_t>(run_index & 0xffffffffu),
      static_cast<std::uint32_t>(run_index >> 32),
      tag,
  };
  return std::mt19937_64(seq);
}

TrajectoryRecord run_closed_loop(const StateSpaceModel& m,
                                 const KalmanDesign& d,
                                 const AttackSelection& attack,
                                 const ExperimentConfig& cfg,
                                 std::uint64_t run_index) {
  check_config(cfg);
  if (attack.a1 && attack.a2) {
    throw std::invalid_argument("run_closed_loop: at most one attack plan");
  }
  const bool feedback = cfg.feedback_gain.size() > 0;
  if (feedback && (cfg.feedback_gain.rows() != m.nu() ||
                   cfg.feedback_gain.cols() != m.nx())) {
    throw DimensionMismatch("run_closed_loop: feedback gain must be nu by nx");
  }
  const bool full = cfg.record_full_state || feedback;
  const int T = cfg.horizon;

  std::mt19937_64 plant_rng = make_stream(cfg.master_seed, run_index, 0);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto draw = [&](Eigen::Index n) {
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = dist(plant_rng);
    return g;
  };

  const Matrix Pf = chol_factor(d.P);
  const Matrix Gw = chol_factor(m.Sigma_w);
  const Matrix Gv = chol_factor(m.Sigma_v);
  const Matrix F = m.A - d.K * m.C;

  std::optional<A1Runtime> a1;
  std::optional<A2Runtime> a2;
  if (attack.a1) a1.emplace(*attack.a1, T, make_stream(cfg.master_seed, run_index, 1));
  if (attack.a2) a2.emplace(*attack.a2, make_stream(cfg.master_seed, run_index, 1));

  TrajectoryRecord rec;
  rec.run_index = run_index;
  rec.innovations.reserve(T);
  if (cfg.record_full_state) {
    rec.states.reserve(T);
    rec.outputs.reserve(T);
    rec.inputs.reserve(T);
    rec.estimates.reserve(T);
  }
  if (cfg.record_attacker_state && attack.a2) rec.attacker_aux.reserve(T);

  Vector e = Pf * draw(m.nx());  // e_1 = x_1 - xhat_1 with xhat_1 = 0
  Vector x;
  if (full) x = e;

  const Vector zero_u = Vector::Zero(m.nu());
  for (int k = 1; k <= T; ++k) {
    const Vector v = Gv * draw(m.ny());
    const Vector w = Gw * draw(m.nx());

    rec.innovations.push_back(m.C * e + v);

    Vector u = zero_u;
    if (feedback) u = -cfg.feedback_gain * (x - e);
    if (cfg.record_attacker_state && attack.a2) rec.attacker_aux.push_back(a2->aux_state());
    Vector u_att = u;
    if (a1) u_att = a1->next(u);
    if (a2) u_att = a2->next(u);
    const Vector phi = u_att - u;

    if (cfg.record_full_state) {
      rec.states.push_back(x);
      rec.outputs.push_back(m.C * x + v);
      rec.inputs.push_back(u_att);
      rec.estimates.push_back(x - e);
    }

    e = F * e + m.B * phi + w - d.K * v;
    if (full) {
      x = m.A * x + m.B * u_att + w;
      if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kOverflowLimit) {
        throw NumericOverflow("run_closed_loop: state overflow at step " +
                              std::to_string(k + 1) +
                              " (open-loop-unstable plant in full-state mode)");
      }
    }
  }
  return rec;
}

std::vector<TrajectoryRecord> simulate_ensemble(const StateSpaceModel& m,
                                                const KalmanDesign& d,
                                                const AttackSelection& attack,
                                                const ExperimentConfig& cfg) {
  check_config(cfg);
  std::vector<TrajectoryRecord> records(cfg.runs);
  const int jobs = std::min(cfg.jobs, cfg.runs);
  if (jobs == 1) {
    for (int r = 0; r < cfg.runs; ++r) {
      records[r] = run_closed_loop(m, d, attack, cfg, r);
    }
    return records;
  }

  std::atomic<int> next_run{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int r = next_run.fetch_add(1);
      if (r >= cfg.runs) return;
      try {
        records[r] = run_closed_loop(m, d, attack, cfg, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return records;
}

PwEstimate estimate_pw(const std::vector<TrajectoryRecord>& records,
                       const KalmanDesign& d, int burn_in) {
  if (records.size() < 2) {
    throw InsufficientSamples("estimate_pw: need at least 2 runs");
  }
  const auto ny = d.Sigma_z.rows();
  const Matrix Sz_inv = pd_inverse(d.Sigma_z, "estimate_pw");
  // E[z~^T Sigma_z^{-1} z~] - tr(Sigma_v Sigma_z^{-1}) equals the weighted
  // error level; the offset equals ny - tr(P W) exactly.
  const double offset = static_cast<double>(ny) - d.baseline_mse;

  std::vector<double> run_means;
  run_means.reserve(records.size());
  int samples = 0;
  for (const auto& rec : records) {
    if (static_cast<int>(rec.innovations.size()) <= burn_in) {
      throw InsufficientSamples("estimate_pw: burn_in leaves no samples");
    }
    double acc = 0.0;
    int n = 0;
    for (std::size_t k = burn_in; k < rec.innovations.size(); ++k) {
      const Vector& z = rec.innovations[k];
      acc += z.dot(Sz_inv * z);
      ++n;
    }
    samples = n;
    run_means.push_back(acc / n - offset);
  }

  PwEstimate out;
  out.runs = static_cast<int>(run_means.size());
  out.samples_per_run = samples;
  double mean = 0.0;
  for (const double v : run_means) mean += v;
  mean /= run_means.size();
  double var = 0.0;
  for (const double v : run_means) var += (v - mean) * (v - mean);
  var /= (run_means.size() - 1);
  out.value = mean;
  out.standard_error = std::sqrt(var / run_means.size());
  return out;
}

std::vector<std::vector<Vector>> innovation_segments(
    const std::vector<TrajectoryRecord>& records, int burn_in) {
  std::vector<std::vector<Vector>> segments;
  segments.reserve(records.size());
  for (const auto& rec : records) {
    if (static_cast<int>(rec.innovations.size()) <= burn_in) {
      throw InsufficientSamples("innovation_segments: burn_in leaves no samples");
    }
    segments.emplace_back(rec.innovations.begin() + burn_in,
                          rec.innovations.end());
  }
  return segments;
}

Matrix pooled_second_moment(const std::vector<TrajectoryRecord>& records,
                            int burn_in) {
  if (records.empty() || records[0].innovations.empty()) {
    throw InsufficientSamples("pooled_second_moment: no records");
  }
  const auto ny = records[0].innovations[0].size();
  Matrix S = Matrix::Zero(ny, ny);
  long n = 0;
  for (const auto& rec : records) {
    for (std::size_t k = burn_in; k < rec.innovations.size(); ++k) {
      S.noalias() += rec.innovations[k] * rec.innovations[k].transpose();
      ++n;
    }
  }
  if (n == 0) throw InsufficientSamples("pooled_second_moment: no samples");
  return symmetrize(S / static_cast<double>(n));
}

Matrix pooled_lagged_moment(const std::vector<TrajectoryRecord>& records,
                            int lag, int burn_in) {
  if (lag < 1) throw std::invalid_argument("pooled_lagged_moment: lag must be >= 1");
  if (records.empty() || records[0].innovations.empty()) {
    throw InsufficientSamples("pooled_lagged_moment: no records");
  }
  const auto ny = records[0].innovations[0].size();
  Matrix S = Matrix::Zero(ny, ny);
  long n = 0;
  for (const auto& rec : records) {
    for (std::size_t k = burn_in + lag; k < rec.innovations.size(); ++k) {
      S.noalias() += rec.innovations[k] * rec.innovations[k - lag].transpose();
      ++n;
    }
  }
  if (n == 0) throw InsufficientSamples("pooled_lagged_moment: no samples");
  return S / static_cast<double>(n);
}

double max_normalized_autocorrelation(
    const std::vector<TrajectoryRecord>& records, int lag, int burn_in) {
  const Matrix S0 = pooled_second_moment(records, burn_in);
  const Matrix Sl = pooled_lagged_moment(records, lag, burn_in);
  const Vector sd = S0.diagonal().cwiseSqrt();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < Sl.rows(); ++i) {
    for (Eigen::Index j = 0; j < Sl.cols(); ++j) {
      worst = std::max(worst, std::abs(Sl(i, j)) / (sd(i) * sd(j)));
    }
  }
  return worst;
}

SweepResult run_sweep(const StateSpaceModel& m, const KalmanDesign& d,
                      const std::string& attack_kind,
                      const std::vector<double>& eps_grid,
                      const ExperimentConfig& cfg, int kld_max_lag) {
  if (attack_kind != "a1" && attack_kind != "a2") {
    throw std::invalid_argument("run_sweep: attack kind must be 'a1' or 'a2'");
  }
  SweepResult result;
  result.attack_kind = attack_kind;
  for (const double eps : eps_grid) {
    SweepRow row;
    row.eps = eps;
    row.converse = converse_bound(eps, d, m.ny()).bound;

    AttackPlanA1 p1;
    AttackPlanA2 p2;
    AttackSelection sel;
    if (attack_kind == "a1") {
      p1 = design_a1(m, d, eps, cfg.master_seed);
      sel.a1 = &p1;
      row.predicted = row.converse;
    } else {
      p2 = design_a2(m, d, eps, cfg.master_seed);
      sel.a2 = &p2;
      row.predicted = p2.predicted_pw;
    }

    const auto records = simulate_ensemble(m, d, sel, cfg);
    const auto est = estimate_pw(records, d, cfg.burn_in);
    row.achieved = est.value;
    row.se = est.standard_error;
    if (cfg.runs >= 100) {
      const auto segments = innovation_segments(records, cfg.burn_in);
      row.kld_empirical =
          empirical_kld_decomposition(segments, d.Sigma_z, kld_max_lag).total_rate;
    } else {
      row.kld_empirical = std::numeric_limits<double>::quiet_NaN();
    }
    result.rows.push_back(row);
  }
  return result;
}

namespace {

void write_sweep_lines(std::ostream& out, const SweepResult& result,
                       const char* head, char sep) {
  out << head;
  for (const auto& r : result.rows) {
    out << format_double(r.eps) << sep << format_double(r.converse) << sep
        << format_double(r.predicted) << sep << format_double(r.achieved)
        << sep << format_double(r.se) << sep << format_double(r.kld_empirical)
        << "\n";
  }
}

}  // namespace

void write_sweep_csv(const std::string& path, const SweepResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path);
  write_sweep_lines(
      out, result,
      "eps,converse_bound,predicted_pw,achieved_pw,achieved_se,kld_rate_empirical\n",
      ',');
}

void write_sweep_dat(const std::string& path, const SweepResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path);
  write_sweep_lines(
      out, result,
      "# eps converse_bound predicted_pw achieved_pw achieved_se kld_rate_empirical\n",
      ' ');
}

}  // namespace stealthsim
