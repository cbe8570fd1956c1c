#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "stealthsim/attacks.hpp"
#include "stealthsim/detect.hpp"
#include "stealthsim/errors.hpp"
#include "stealthsim/kalman.hpp"
#include "stealthsim/model.hpp"
#include "stealthsim/sim.hpp"
#include "stealthsim/stealth.hpp"
#include "stealthsim/textio.hpp"

namespace {

using namespace stealthsim;

constexpr const char* kVersion = "0.1.0";

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::string item;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ',') {
      const std::string t = trim(item);
      if (!t.empty()) grid.push_back(parse_double(t));
      item.clear();
    } else {
      item.push_back(text[i]);
    }
  }
  if (grid.empty()) throw ParseError("empty value grid: '" + text + "'");
  return grid;
}

std::vector<int> parse_horizons(const std::string& text) {
  std::vector<int> out;
  for (const double v : parse_grid(text)) {
    const int h = static_cast<int>(v);
    if (static_cast<double>(h) != v) {
      throw ParseError("horizons must be integers: '" + text + "'");
    }
    out.push_back(h);
  }
  return out;
}

std::string complex_str(const std::complex<double>& z) {
  std::string s = format_double(z.real());
  if (z.imag() != 0.0) {
    s += (z.imag() > 0 ? " + " : " - ") + format_double(std::abs(z.imag())) + "i";
  }
  return s;
}

std::uint64_t model_fingerprint(const std::string& model_path) {
  return config_fingerprint(parse_stanzas(model_path));
}

struct CommonArgs {
  std::string model_path;
  std::uint64_t seed = 0;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--model", args->model_path, "model config file")->required();
  cmd->add_option("--seed", args->seed, "master seed for all random streams");
  cmd->add_option("--jobs", args->jobs, "worker threads (does not change results)")
      ->check(CLI::PositiveNumber);
}

void write_manifest(const std::string& path, const std::string& tool,
                    const CommonArgs& common,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
  Stanza st;
  st.name = "manifest";
  st.scalars["tool"] = tool;
  st.scalars["version"] = kVersion;
  st.scalars["model"] = common.model_path;
  st.scalars["model_fingerprint"] = fingerprint_hex(model_fingerprint(common.model_path));
  st.scalars["seed"] = std::to_string(common.seed);
  for (const auto& kv : extra) st.scalars[kv.first] = kv.second;
  write_stanzas(path, {st});
}

int run_analyze(const CommonArgs& common, const std::string& out_path) {
  const StateSpaceModel m = load_model(common.model_path);
  const StructureReport rep = analyze_structure(m);
  const KalmanDesign d = design_filter(m);

  std::printf("model: %s\n", common.model_path.c_str());
  std::printf("dimensions: nx=%d nu=%d ny=%d\n", m.nx(), m.nu(), m.ny());
  std::printf("open-loop spectral radius: %s\n",
              format_double(rep.open_loop_spectral_radius).c_str());
  std::printf("right invertible: %s\n",
              rep.inversion.right_invertible ? "yes" : "no");
  if (rep.inversion.right_invertible) {
    std::printf("inherent inversion delay: %d\n", rep.inversion.relative_delay);
  }
  if (rep.zeros.empty()) {
    std::printf("invariant zeros: none\n");
  } else {
    std::printf("invariant zeros:");
    for (const auto& z : rep.zeros) std::printf(" %s", complex_str(z).c_str());
    std::printf("\n");
  }
  std::printf("zero on or outside the unit circle: %s\n",
              rep.has_zero_on_or_outside_unit_circle ? "yes" : "no");
  std::printf("baseline weighted error tr(P W): %s\n",
              format_double(d.baseline_mse).c_str());
  std::printf("filter equation residual: %s\n",
              format_double(filter_dare_residual(m, d)).c_str());
  std::printf("supported attacks: %s\n",
              rep.inversion.right_invertible ? "a1 a2" : "a2");

  if (!out_path.empty()) {
    Stanza st;
    st.name = "analysis";
    st.scalars["model"] = common.model_path;
    st.scalars["nx"] = std::to_string(m.nx());
    st.scalars["nu"] = std::to_string(m.nu());
    st.scalars["ny"] = std::to_string(m.ny());
    st.scalars["open_loop_spectral_radius"] =
        format_double(rep.open_loop_spectral_radius);
    st.scalars["right_invertible"] =
        rep.inversion.right_invertible ? "1" : "0";
    st.scalars["relative_delay"] = std::to_string(rep.inversion.relative_delay);
    st.scalars["baseline_mse"] = format_double(d.baseline_mse);
    st.matrices["P"] = d.P;
    st.matrices["K"] = d.K;
    st.matrices["Sigma_z"] = d.Sigma_z;
    st.matrices["W"] = d.W;
    write_stanzas(out_path, {st});
    std::printf("analysis written to %s\n", out_path.c_str());
  }
  return 0;
}

int run_design(const CommonArgs& common, const std::string& attack, double eps,
               const std::string& out_path) {
  const StateSpaceModel m = load_model(common.model_path);
  const KalmanDesign d = design_filter(m);
  const ConverseBound bound = converse_bound(eps, d, m.ny());
  std::printf("eps budget: %s\n", format_double(eps).c_str());
  std::printf("baseline weighted error: %s\n", format_double(bound.baseline).c_str());
  std::printf("converse bound on the weighted error: %s\n",
              format_double(bound.bound).c_str());

  if (attack == "a1") {
    const AttackPlanA1 plan = design_a1(m, d, eps, common.seed);
    save_plan(out_path, plan);
    std::printf("plan: a1 (innovation-steering inverse), delay %d\n", plan.delay);
    std::printf("offset covariance scale delta_bar - 1: %s\n",
                format_double(delta_bar(eps / m.ny()) - 1.0).c_str());
    std::printf("predicted weighted error: %s (meets the bound)\n",
                format_double(bound.bound).c_str());
  } else {
    const AttackPlanA2 plan = design_a2(m, d, eps, common.seed);
    save_plan(out_path, plan);
    std::printf("plan: a2 (fictitious feedback loop), amplitude %s\n",
                format_double(plan.alpha).c_str());
    std::printf("predicted eps: %s\n", format_double(plan.predicted_eps).c_str());
    std::printf("predicted weighted error: %s\n",
                format_double(plan.predicted_pw).c_str());
    std::printf("gap to the bound: %s\n",
                format_double(bound.bound - plan.predicted_pw).c_str());
    std::printf("output shaping mismatch: %s\n",
                format_double(plan.shaping_mismatch).c_str());
  }
  std::printf("plan written to %s\n", out_path.c_str());
  return 0;
}

int run_sweep(const CommonArgs& common, const std::string& attack,
              const std::string& grid_text, int runs, int horizon, int burn_in,
              const std::string& out_dir) {
  const std::vector<double> grid = parse_grid(grid_text);
  const StateSpaceModel m = load_model(common.model_path);
  const KalmanDesign d = design_filter(m);

  ExperimentConfig cfg;
  cfg.runs = runs;
  cfg.horizon = horizon;
  cfg.burn_in = burn_in;
  cfg.jobs = common.jobs;
  cfg.master_seed = common.seed;

  const SweepResult result = run_sweep(m, d, attack, grid, cfg);

  std::filesystem::create_directories(out_dir);
  const auto join = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  write_sweep_csv(join("sweep.csv"), result);
  write_sweep_dat(join("sweep.dat"), result);
  write_manifest(join("manifest.txt"), "sweep", common,
                 {{"attack", attack},
                  {"eps_grid", grid_text},
                  {"runs", std::to_string(runs)},
                  {"horizon", std::to_string(horizon)},
                  {"burn_in", std::to_string(burn_in)}});

  std::printf("%10s %14s %14s %14s %12s\n", "eps", "converse", "predicted",
              "achieved", "std.err");
  for (const auto& row : result.rows) {
    std::printf("%10.4f %14.6f %14.6f %14.6f %12.6f\n", row.eps, row.converse,
                row.predicted, row.achieved, row.se);
  }
  std::printf("tables written to %s\n", out_dir.c_str());
  return 0;
}

int run_detect(const CommonArgs& common, const std::string& attack, double eps,
               const std::string& detector, double delta, int trials,
               const std::string& horizons_text, const std::string& out_dir) {
  const std::vector<int> horizons = parse_horizons(horizons_text);
  const StateSpaceModel m = load_model(common.model_path);
  const KalmanDesign d = design_filter(m);

  AttackPlanA1 p1;
  AttackPlanA2 p2;
  AttackSelection sel;
  if (attack == "a1") {
    p1 = design_a1(m, d, eps, common.seed);
    sel.a1 = &p1;
  } else {
    p2 = design_a2(m, d, eps, common.seed);
    sel.a2 = &p2;
  }

  DetectorSpec spec;
  spec.kind = detector == "llr" ? DetectorKind::llr : DetectorKind::chi_square;
  spec.delta = delta;
  spec.Sigma_tilde = attacked_innovation_cov(m, d, sel);

  const DetectorReport report =
      estimate_roc(m, d, sel, spec, horizons, trials, common.seed, common.jobs);

  std::filesystem::create_directories(out_dir);
  const auto join = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  write_roc_csv(join("roc.csv"), report);
  write_manifest(join("manifest.txt"), "detect", common,
                 {{"attack", attack},
                  {"eps", format_double(eps)},
                  {"detector", detector},
                  {"delta", format_double(delta)},
                  {"trials", std::to_string(trials)},
                  {"horizons", horizons_text}});

  std::printf("%8s %16s %12s %12s\n", "horizon", "threshold", "p_false",
              "p_detect");
  for (const auto& row : report.rows) {
    std::printf("%8d %16.6f %12.6f %12.6f\n", row.horizon, row.threshold,
                row.p_false, row.p_detect);
  }
  std::printf("false-alarm decay exponent: %s (fit over %d horizons)\n",
              format_double(report.exponent).c_str(), report.usable_points);
  std::printf("tables written to %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"design and evaluation of stealthy actuation-channel "
               "attacks on Kalman-filtered linear plants"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonArgs a_common;
  std::string a_out;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "structural and filter work-up of a plant model");
  add_common(analyze, &a_common);
  analyze->add_option("--out", a_out, "write the report as a config stanza");

  CommonArgs d_common;
  std::string d_attack;
  double d_eps = 1.0;
  std::string d_out = "plan.cfg";
  CLI::App* design = app.add_subcommand(
      "design", "design an attack plan for a stealthiness budget");
  add_common(design, &d_common);
  design->add_option("--attack", d_attack, "plan kind")
      ->required()
      ->check(CLI::IsMember({"a1", "a2"}));
  design->add_option("--eps", d_eps, "stealthiness budget (KLD rate)")
      ->required();
  design->add_option("--out", d_out, "plan file to write");

  CommonArgs s_common;
  std::string s_attack;
  std::string s_grid;
  int s_runs = 200;
  int s_horizon = 2000;
  int s_burn = 100;
  std::string s_out = "sweep_out";
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Monte Carlo sweep of achieved error versus the bound");
  add_common(sweep, &s_common);
  sweep->add_option("--attack", s_attack, "plan kind")
      ->required()
      ->check(CLI::IsMember({"a1", "a2"}));
  sweep->add_option("--eps-grid", s_grid, "comma-separated eps values")
      ->required();
  sweep->add_option("--runs", s_runs, "Monte Carlo runs per grid point")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--horizon", s_horizon, "steps per run")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--burn-in", s_burn, "steps discarded per run")
      ->check(CLI::NonNegativeNumber);
  sweep->add_option("--out-dir", s_out, "directory for sweep.csv / sweep.dat");

  CommonArgs t_common;
  std::string t_attack;
  double t_eps = 1.0;
  std::string t_detector = "llr";
  double t_delta = 0.1;
  int t_trials = 10000;
  std::string t_horizons = "5,10,15,20,25,30";
  std::string t_out = "detect_out";
  CLI::App* detect = app.add_subcommand(
      "detect", "empirical ROC of a window detector against a plan");
  add_common(detect, &t_common);
  detect->add_option("--attack", t_attack, "plan kind")
      ->required()
      ->check(CLI::IsMember({"a1", "a2"}));
  detect->add_option("--eps", t_eps, "stealthiness budget (KLD rate)")
      ->required();
  detect->add_option("--detector", t_detector, "window statistic")
      ->check(CLI::IsMember({"llr", "chi2"}));
  detect->add_option("--delta", t_delta, "miss-probability budget");
  detect->add_option("--trials", t_trials, "paired trials per horizon")
      ->check(CLI::PositiveNumber);
  detect->add_option("--horizons", t_horizons, "comma-separated window lengths");
  detect->add_option("--out-dir", t_out, "directory for roc.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (analyze->parsed()) return run_analyze(a_common, a_out);
    if (design->parsed()) return run_design(d_common, d_attack, d_eps, d_out);
    if (sweep->parsed()) {
      return run_sweep(s_common, s_attack, s_grid, s_runs, s_horizon, s_burn,
                       s_out);
    }
    if (detect->parsed()) {
      return run_detect(t_common, t_attack, t_eps, t_detector, t_delta,
                        t_trials, t_horizons, t_out);
    }
  } catch (const stealthsim::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const stealthsim::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
