// Acceptance gate: one PASS/FAIL line per criterion with measured values.
// Exit code equals the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifdef __unix__
#include <sys/wait.h>
#endif

#include "stealthsim/attacks.hpp"
#include "stealthsim/detect.hpp"
#include "stealthsim/errors.hpp"
#include "stealthsim/kalman.hpp"
#include "stealthsim/model.hpp"
#include "stealthsim/sim.hpp"
#include "stealthsim/stealth.hpp"
#include "stealthsim/textio.hpp"

using namespace stealthsim;

namespace {

std::string g_cli = "./stealthsim";
std::string g_data = "data";
int g_jobs = 2;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

StateSpaceModel load_example(const char* name) {
  return load_model(
      (std::filesystem::path(g_data) / name / "model.cfg").string());
}

struct Outcome {
  bool pass = false;
  std::string measured;
};

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return std::string(buf);
}

// Criterion 1: the fixed-point calculus behind the bound. delta_bar(0) must
// be exactly 1, the defining residual must stay below 1e-12 on a 100-point
// budget grid, and the scaled-covariance divergence identity
// kld_rate_iid_scaled(delta_bar(g), ny) = ny * g must hold to 1e-10.
Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const bool zero_exact = delta_bar(0.0) == 1.0;
  double max_residual = 0.0;
  double max_kld_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double gamma = 50.0 * i / 99.0;
    const double x = delta_bar(gamma);
    max_residual =
        std::max(max_residual, std::abs(x - (2.0 * gamma + 1.0 + std::log(x))));
    for (int ny = 1; ny <= 3; ++ny) {
      max_kld_err = std::max(
          max_kld_err, std::abs(kld_rate_iid_scaled(x, ny) - ny * gamma));
    }
  }
  const double dt = seconds_since(t0);
  Outcome out;
  out.pass = zero_exact && max_residual < 1e-12 && max_kld_err < 1e-10 &&
             dt < 1.0;
  out.measured = fmt(
      "delta_bar(0)-1 = %g, max fixed-point residual %.2e, "
      "max divergence-identity error %.2e, runtime %.3f s",
      delta_bar(0.0) - 1.0, max_residual, max_kld_err, dt);
  return out;
}

// Criterion 2: filter design. Scalar unit plant must give the golden-ratio
// prediction covariance to 1e-10, both example designs must satisfy their
// Riccati equation to 1e-10, and the no-attack innovation sample covariance
// over 500 runs x 2000 steps must sit within 3% of Sigma_z. Under a minute.
Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  StateSpaceModel unit;
  unit.A = Matrix::Identity(1, 1);
  unit.B = Matrix::Identity(1, 1);
  unit.C = Matrix::Identity(1, 1);
  unit.Sigma_w = Matrix::Identity(1, 1);
  unit.Sigma_v = Matrix::Identity(1, 1);
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  const double scalar_err = std::abs(design_filter(unit).P(0, 0) - phi);

  double max_dare = 0.0;
  double max_cov = 0.0;
  for (const char* name : {"example1", "example2"}) {
    const auto m = load_example(name);
    const auto d = design_filter(m);
    max_dare = std::max(max_dare, filter_dare_residual(m, d));
    ExperimentConfig cfg;
    cfg.runs = 500;
    cfg.horizon = 2000;
    cfg.burn_in = 0;
    cfg.jobs = g_jobs;
    cfg.master_seed = 11;
    const auto records = simulate_ensemble(m, d, AttackSelection{}, cfg);
    const Matrix S = pooled_second_moment(records, 0);
    max_cov = std::max(max_cov, (S - d.Sigma_z).norm() / d.Sigma_z.norm());
  }
  const double dt = seconds_since(t0);
  Outcome out;
  out.pass = scalar_err < 1e-10 && max_dare < 1e-10 && max_cov < 0.03 &&
             dt < 60.0;
  out.measured = fmt(
      "golden-ratio error %.2e, max Riccati residual %.2e, "
      "max covariance deviation %.2f%% (500x2000), runtime %.1f s",
      scalar_err, max_dare, 100.0 * max_cov, dt);
  return out;
}

// Criterion 3: the inverse-based attack on the right-invertible example must
// reach the converse bound within 3% at eps in {0.5, 1, 2, 4} with 500 runs
// of 2000 steps (burn-in 100).
Outcome criterion3() {
  const auto m = load_example("example1");
  const auto d = design_filter(m);
  ExperimentConfig cfg;
  cfg.runs = 500;
  cfg.horizon = 2000;
  cfg.burn_in = 100;
  cfg.jobs = g_jobs;
  cfg.master_seed = 101;

  double worst_rel = 0.0;
  double worst_eps = 0.0;
  std::string detail;
  for (const double eps : {0.5, 1.0, 2.0, 4.0}) {
    const auto plan = design_a1(m, d, eps, cfg.master_seed);
    AttackSelection sel;
    sel.a1 = &plan;
    const auto est = estimate_pw(simulate_ensemble(m, d, sel, cfg), d, cfg.burn_in);
    const double bound = converse_bound(eps, d, m.ny()).bound;
    const double rel = std::abs(est.value - bound) / bound;
    if (rel > worst_rel) {
      worst_rel = rel;
      worst_eps = eps;
    }
    detail += fmt("%s%.3g:%+.2f%%", detail.empty() ? "" : " ", eps,
                  100.0 * (est.value - bound) / bound);
  }
  Outcome out;
  out.pass = worst_rel <= 0.03;
  out.measured = fmt("gap to bound per eps {%s}, worst %.2f%% at eps=%.3g",
                     detail.c_str(), 100.0 * worst_rel, worst_eps);
  return out;
}

// Criterion 4: under the eps=1 inverse-based attack the innovations must
// stay white (lags 1..5 inside 4/sqrt(n) bands) with sample covariance
// within 3% of delta_bar(0.5) * Sigma_z.
Outcome criterion4() {
  const auto m = load_example("example1");
  const auto d = design_filter(m);
  const auto plan = design_a1(m, d, 1.0, 202);
  AttackSelection sel;
  sel.a1 = &plan;
  ExperimentConfig cfg;
  cfg.runs = 500;
  cfg.horizon = 2000;
  cfg.burn_in = 100;
  cfg.jobs = g_jobs;
  cfg.master_seed = 202;
  const auto records = simulate_ensemble(m, d, sel, cfg);

  const double n =
      static_cast<double>(cfg.runs) * (cfg.horizon - cfg.burn_in);
  const double band = 4.0 / std::sqrt(n);
  double worst_auto = 0.0;
  for (int lag = 1; lag <= 5; ++lag) {
    worst_auto = std::max(
        worst_auto, max_normalized_autocorrelation(records, lag, cfg.burn_in));
  }
  const Matrix target = delta_bar(0.5) * d.Sigma_z;
  const double cov_rel =
      (pooled_second_moment(records, cfg.burn_in) - target).norm() /
      target.norm();
  Outcome out;
  out.pass = worst_auto <= band && cov_rel <= 0.03;
  out.measured = fmt(
      "max |autocorr| %.2e vs band %.2e (lags 1..5, n=%.0f), "
      "covariance deviation %.2f%% from delta_bar(0.5) Sigma_z",
      worst_auto, band, n, cov_rel * 100.0);
  return out;
}

struct A2Point {
  double eps = 0.0;
  double predicted = 0.0;
  double achieved = 0.0;
  double se = 0.0;
  double kld = 0.0;
  double bound = 0.0;
};

std::vector<A2Point> g_a2_points;  // shared between criteria 5 and 6

// Criterion 5: the fictitious-loop attack on the non-invertible example must
// match its closed-form prediction within 3 standard errors, stay below the
// bound, and show an empirical divergence rate within 10% of the budget at
// eps in {0.5, 1, 2, 4}; both curves must grow with eps and keep a gap.
Outcome criterion5() {
  const auto m = load_example("example2");
  const auto d = design_filter(m);
  ExperimentConfig cfg;
  cfg.runs = 500;
  cfg.horizon = 2000;
  cfg.burn_in = 100;
  cfg.jobs = g_jobs;
  cfg.master_seed = 303;

  g_a2_points.clear();
  double worst_sigma = 0.0;
  double worst_kld_rel = 0.0;
  bool under_bound = true;
  for (const double eps : {0.5, 1.0, 2.0, 4.0}) {
    const auto plan = design_a2(m, d, eps, cfg.master_seed);
    AttackSelection sel;
    sel.a2 = &plan;
    const auto records = simulate_ensemble(m, d, sel, cfg);
    const auto est = estimate_pw(records, d, cfg.burn_in);
    const auto kld = empirical_kld_decomposition(
        innovation_segments(records, cfg.burn_in), d.Sigma_z, 8);

    A2Point pt;
    pt.eps = eps;
    pt.predicted = plan.predicted_pw;
    pt.achieved = est.value;
    pt.se = est.standard_error;
    pt.kld = kld.total_rate;
    pt.bound = converse_bound(eps, d, m.ny()).bound;
    g_a2_points.push_back(pt);

    worst_sigma =
        std::max(worst_sigma, std::abs(est.value - plan.predicted_pw) /
                                  est.standard_error);
    worst_kld_rel =
        std::max(worst_kld_rel, std::abs(kld.total_rate - eps) / eps);
    under_bound = under_bound && plan.predicted_pw <= pt.bound + 1e-9;
  }
  bool monotone = true;
  for (std::size_t i = 1; i < g_a2_points.size(); ++i) {
    monotone = monotone &&
               g_a2_points[i].predicted > g_a2_points[i - 1].predicted &&
               g_a2_points[i].achieved > g_a2_points[i - 1].achieved;
  }
  Outcome out;
  out.pass = worst_sigma <= 3.0 && under_bound && worst_kld_rel <= 0.10 &&
             monotone;
  out.measured = fmt(
      "worst |achieved-predicted| %.2f sigma, predictions %s the bound, "
      "worst divergence error %.1f%%, curves %smonotone",
      worst_sigma, under_bound ? "under" : "ABOVE", 100.0 * worst_kld_rel,
      monotone ? "" : "NOT ");
  return out;
}

// Criterion 6: constant-term arbitration of the closed-form operating point.
// As the driving covariance vanishes the predicted divergence must go to 0
// and the predicted error to tr(P W); the eps=2 Monte Carlo must agree with
// these forms within 3 standard errors while the two printed alternatives
// (divergence shifted by +ny/2, error shifted by -ny) sit far outside.
Outcome criterion6() {
  const auto m = load_example("example2");
  const auto d = design_filter(m);
  const double ny = m.ny();

  const Matrix F = m.A - d.K * m.C;
  const Matrix L = cheap_lqg_gain(F, m.B, d.W);
  const Matrix FL = F - m.B * L;
  const Matrix tiny = sigma_zeta_shaping(FL, m.B, m.C, d.Sigma_z, 1e-4);
  const auto pred0 =
      predict_a2(FL, m.B, m.C, d.Sigma_z, d.W, tiny, d.baseline_mse);
  const double eps_limit = std::abs(pred0.eps);
  const double pw_limit = std::abs(pred0.pw - d.baseline_mse);

  const A2Point* pt2 = nullptr;
  for (const auto& pt : g_a2_points) {
    if (pt.eps == 2.0) pt2 = &pt;
  }
  if (!pt2) {
    Outcome out;
    out.measured = "eps=2 operating point unavailable (criterion 5 aborted)";
    return out;
  }
  const double agree_sigma = std::abs(pt2->achieved - pt2->predicted) / pt2->se;
  const double wrong_pw = pt2->predicted - ny;
  const double wrong_gap = std::abs(pt2->achieved - wrong_pw);
  const double kld_err = std::abs(pt2->kld - pt2->eps);
  const double wrong_eps_gap = std::abs(pt2->kld - (pt2->eps + 0.5 * ny));

  Outcome out;
  out.pass = eps_limit < 1e-6 && pw_limit < 1e-6 && agree_sigma <= 3.0 &&
             wrong_gap > 3.0 * pt2->se + 0.5 * ny && kld_err <= 0.2 &&
             wrong_eps_gap > 0.25 * ny;
  out.measured = fmt(
      "vanishing-noise limits |eps| %.1e, |pw - tr(PW)| %.1e; at eps=2: "
      "corrected form %.2f sigma off, error shifted by -ny misses by %.2f, "
      "divergence shifted by +ny/2 misses by %.2f",
      eps_limit, pw_limit, agree_sigma, wrong_gap, wrong_eps_gap);
  return out;
}

// Criterion 7: false-alarm decay of the likelihood detector against the
// eps=1 inverse-based attack, miss budget 0.1, 10^4 paired trials, horizons
// up to 60: the fitted exponent must land in [0.8, 1.05].
Outcome criterion7() {
  const auto m = load_example("example1");
  const auto d = design_filter(m);
  const auto plan = design_a1(m, d, 1.0, 404);
  AttackSelection sel;
  sel.a1 = &plan;
  DetectorSpec spec;
  spec.kind = DetectorKind::llr;
  spec.delta = 0.1;
  spec.Sigma_tilde = attacked_innovation_cov(m, d, sel);
  const std::vector<int> horizons = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60};

  Outcome out;
  try {
    const auto report = estimate_roc(m, d, sel, spec, horizons, 10000, 404, g_jobs);
    out.pass = report.exponent >= 0.8 && report.exponent <= 1.05;
    out.measured = fmt(
        "fitted exponent %.4f (target [0.8, 1.05]), %d usable horizons of %d, "
        "10000 trials",
        report.exponent, report.usable_points, static_cast<int>(horizons.size()));
  } catch (const ExponentUnfittable& e) {
    out.pass = false;
    out.measured = fmt("no fittable decay: %s", e.what());
  }
  return out;
}

// Criterion 8: the slope of the converse bound at eps=50 (central difference,
// h=1e-4) must lie in [1.98, 2.0] for both examples.
Outcome criterion8() {
  double slopes[2] = {0.0, 0.0};
  int i = 0;
  for (const char* name : {"example1", "example2"}) {
    const auto m = load_example(name);
    const auto d = design_filter(m);
    const double h = 1e-4;
    const double up = converse_bound(50.0 + h, d, m.ny()).bound;
    const double dn = converse_bound(50.0 - h, d, m.ny()).bound;
    slopes[i++] = (up - dn) / (2.0 * h);
  }
  Outcome out;
  out.pass = slopes[0] >= 1.98 && slopes[0] <= 2.0 && slopes[1] >= 1.98 &&
             slopes[1] <= 2.0;
  out.measured = fmt(
      "slope at eps=50: %.4f (example1), %.4f (example2), target [1.98, 2.0]",
      slopes[0], slopes[1]);
  return out;
}

int run_command(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
#ifdef __unix__
  return (rc == -1) ? -1 : (WIFEXITED(rc) ? WEXITSTATUS(rc) : -1);
#else
  return rc;
#endif
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Criterion 9: two sweep invocations of the command-line tool with the same
// manifest-relevant configuration but different thread counts must produce
// byte-identical tables.
Outcome criterion9() {
  const auto base_dir =
      std::filesystem::temp_directory_path() / "stealthsim_acceptance";
  std::filesystem::remove_all(base_dir);
  std::filesystem::create_directories(base_dir);
  const std::string model =
      (std::filesystem::path(g_data) / "example2" / "model.cfg").string();
  const std::string common = "\"" + g_cli + "\" sweep --model \"" + model +
                             "\" --attack a2 --eps-grid 0.5,2 --runs 40"
                             " --horizon 300 --burn-in 50 --seed 7";
  const auto dir1 = base_dir / "run1";
  const auto dir2 = base_dir / "run2";
  const int rc1 = run_command(common + " --jobs 1 --out-dir \"" +
                              dir1.string() + "\" > /dev/null 2>&1");
  const int rc2 = run_command(common + " --jobs 3 --out-dir \"" +
                              dir2.string() + "\" > /dev/null 2>&1");

  const std::string csv1 = slurp(dir1 / "sweep.csv");
  const std::string csv2 = slurp(dir2 / "sweep.csv");
  const std::string dat1 = slurp(dir1 / "sweep.dat");
  const std::string dat2 = slurp(dir2 / "sweep.dat");
  const std::string man1 = slurp(dir1 / "manifest.txt");
  const std::string man2 = slurp(dir2 / "manifest.txt");

  Outcome out;
  out.pass = rc1 == 0 && rc2 == 0 && !csv1.empty() && csv1 == csv2 &&
             !dat1.empty() && dat1 == dat2 && !man1.empty() && man1 == man2;
  out.measured = fmt(
      "exit codes %d/%d, csv %zu bytes %s, dat %s, manifest %s "
      "(jobs 1 vs 3)",
      rc1, rc2, csv1.size(), csv1 == csv2 ? "identical" : "DIFFER",
      dat1 == dat2 ? "identical" : "DIFFER",
      man1 == man2 ? "identical" : "DIFFER");
  std::filesystem::remove_all(base_dir);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) g_cli = argv[++i];
    else if (a == "--data" && i + 1 < argc) g_data = argv[++i];
    else if (a == "--golden" && i + 1 < argc) ++i;  // accepted for symmetry
    else if (a == "--jobs" && i + 1 < argc) g_jobs = std::atoi(argv[++i]);
  }

  struct Entry {
    const char* description;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {"stealth-radius fixed point and divergence identity", criterion1},
      {"filter design and no-attack innovation covariance", criterion2},
      {"inverse-based attack reaches the converse bound", criterion3},
      {"inverse-based attack keeps innovations white at the designed level",
       criterion4},
      {"fictitious-loop attack matches prediction inside the bound", criterion5},
      {"closed-form constant terms survive arbitration", criterion6},
      {"likelihood-detector false-alarm exponent in range", criterion7},
      {"converse-bound slope at eps=50 in range", criterion8},
      {"sweep tables byte-identical across thread counts", criterion9},
  };

  int failures = 0;
  int index = 0;
  for (const auto& entry : entries) {
    ++index;
    Outcome out;
    try {
      out = entry.fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.measured = fmt("unhandled error: %s", e.what());
    }
    if (!out.pass) ++failures;
    std::printf("%s C%d: %s (%s)\n", out.pass ? "PASS" : "FAIL", index,
                entry.description, out.measured.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures;
}
