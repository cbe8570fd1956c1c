#include "stealthsim/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "stealthsim/errors.hpp"
#include "stealthsim/textio.hpp"

namespace stealthsim {

namespace {

struct PdInfo {
  Matrix inverse;
  double logdet = 0.0;
};

PdInfo pd_info(const Matrix& M, const char* what) {
  Eigen::LDLT<Matrix> ldlt(symmetrize(M));
  if (ldlt.info() != Eigen::Success) {
    throw SingularCovariance(std::string(what) + ": factorization failed");
  }
  const auto& diag = ldlt.vectorD();
  PdInfo out;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (diag(i) <= 0.0) {
      throw SingularCovariance(std::string(what) + ": matrix not positive definite");
    }
    out.logdet += std::log(diag(i));
  }
  out.inverse = ldlt.solve(Matrix::Identity(M.rows(), M.cols()));
  return out;
}

}  // namespace

Matrix attacked_innovation_cov(const StateSpaceModel& m, const KalmanDesign& d,
                               const AttackSelection& attack) {
  if (attack.a1 && attack.a2) {
    throw std::invalid_argument("attacked_innovation_cov: at most one plan");
  }
  if (attack.a1) return symmetrize(d.Sigma_z + attack.a1->zeta_cov);
  if (attack.a2) {
    return symmetrize(d.Sigma_z + m.C * attack.a2->Sigma_e * m.C.transpose());
  }
  return d.Sigma_z;
}

double llr_statistic(const std::vector<Vector>& window, const Matrix& Sigma_z,
                     const Matrix& Sigma_tilde) {
  const PdInfo h0 = pd_info(Sigma_z, "llr_statistic");
  const PdInfo h1 = pd_info(Sigma_tilde, "llr_statistic");
  const double const_term = 0.5 * (h0.logdet - h1.logdet);
  const Matrix diff = h0.inverse - h1.inverse;
  double acc = 0.0;
  for (const auto& z : window) {
    acc += const_term + 0.5 * z.dot(diff * z);
  }
  return acc;
}

double chi_square_statistic(const std::vector<Vector>& window,
                            const Matrix& Sigma_z) {
  const PdInfo h0 = pd_info(Sigma_z, "chi_square_statistic");
  double acc = 0.0;
  for (const auto& z : window) acc += z.dot(h0.inverse * z);
  return acc;
}

DetectorReport estimate_roc(const StateSpaceModel& m, const KalmanDesign& d,
                            const AttackSelection& attack,
                            const DetectorSpec& spec,
                            const std::vector<int>& horizons, int trials,
                            std::uint64_t master_seed, int jobs) {
  if (horizons.empty()) throw std::invalid_argument("estimate_roc: no horizons");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (horizons[i] < 1 || (i > 0 && horizons[i] <= horizons[i - 1])) {
      throw std::invalid_argument("estimate_roc: horizons must be increasing and positive");
    }
  }
  if (trials < 2) throw std::invalid_argument("estimate_roc: need at least 2 trials");
  if (!(spec.delta > 0.0 && spec.delta < 1.0)) {
    throw std::invalid_argument("estimate_roc: delta must be in (0, 1)");
  }
  if (!attack.a1 && !attack.a2) {
    throw std::invalid_argument("estimate_roc: an attack plan is required");
  }

  const int max_h = horizons.back();
  ExperimentConfig cfg;
  cfg.runs = trials;
  cfg.horizon = max_h;
  cfg.burn_in = 0;
  cfg.jobs = jobs;
  cfg.master_seed = master_seed;

  const AttackSelection no_attack;
  const auto h0_records = simulate_ensemble(m, d, no_attack, cfg);
  const auto h1_records = simulate_ensemble(m, d, attack, cfg);

  const PdInfo h0 = pd_info(d.Sigma_z, "estimate_roc");
  Matrix step_quad;       // quadratic form of the per-step statistic term
  double step_const = 0;  // additive constant per step
  if (spec.kind == DetectorKind::llr) {
    if (spec.Sigma_tilde.size() == 0) {
      throw std::invalid_argument("estimate_roc: llr detector needs Sigma_tilde");
    }
    const PdInfo h1 = pd_info(spec.Sigma_tilde, "estimate_roc");
    step_quad = 0.5 * (h0.inverse - h1.inverse);
    step_const = 0.5 * (h0.logdet - h1.logdet);
  } else {
    step_quad = h0.inverse;
    step_const = 0.0;
  }

  const auto n_h = horizons.size();
  auto prefix_stats = [&](const std::vector<TrajectoryRecord>& records) {
    std::vector<std::vector<double>> stats(n_h, std::vector<double>(trials));
    for (int t = 0; t < trials; ++t) {
      double acc = 0.0;
      std::size_t hi = 0;
      for (int k = 1; k <= max_h; ++k) {
        const Vector& z = records[t].innovations[k - 1];
        acc += step_const + z.dot(step_quad * z);
        if (hi < n_h && k == horizons[hi]) {
          stats[hi][t] = acc;
          ++hi;
        }
      }
    }
    return stats;
  };
  const auto s0 = prefix_stats(h0_records);
  const auto s1 = prefix_stats(h1_records);

  DetectorReport report;
  report.trials = trials;
  const int rank = static_cast<int>(std::floor(spec.delta * trials));  // miss count allowed
  for (std::size_t i = 0; i < n_h; ++i) {
    std::vector<double> h1_sorted = s1[i];
    std::sort(h1_sorted.begin(), h1_sorted.end());
    const double lambda = h1_sorted[std::min(rank, trials - 1)];
    RocRow row;
    row.horizon = horizons[i];
    row.threshold = lambda;
    long fa = 0, det = 0;
    for (int t = 0; t < trials; ++t) {
      if (s0[i][t] >= lambda) ++fa;
      if (s1[i][t] >= lambda) ++det;
    }
    row.p_false = static_cast<double>(fa) / trials;
    row.p_detect = static_cast<double>(det) / trials;
    report.rows.push_back(row);
  }

  std::vector<double> xs, ys;
  for (const auto& row : report.rows) {
    const double events = row.p_false * trials;
    if (events >= 10.0) {
      xs.push_back(row.horizon);
      ys.push_back(-std::log(row.p_false));
    }
  }
  report.usable_points = static_cast<int>(xs.size());
  if (report.usable_points < 2) {
    throw ExponentUnfittable(
        "estimate_roc: fewer than 2 horizons with at least 10 false alarms");
  }
  double xm = 0, ym = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xm += xs[i];
    ym += ys[i];
  }
  xm /= xs.size();
  ym /= ys.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xm) * (xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
  }
  report.exponent = sxy / sxx;
  report.intercept = ym - report.exponent * xm;
  return report;
}

void write_roc_csv(const std::string& path, const DetectorReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path);
  out << "horizon,threshold,p_false,p_detect\n";
  for (const auto& row : report.rows) {
    out << row.horizon << "," << format_double(row.threshold) << ","
        << format_double(row.p_false) << "," << format_double(row.p_detect)
        << "\n";
  }
}

}  // namespace stealthsim
