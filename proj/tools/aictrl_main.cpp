// Command-line front end: single simulations, randomized batches and
// parameter sweeps, all driven by a JSON config. Exit codes: 0 success,
// 1 configuration error, 2 at least one episode diverged.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include "aictrl/aictrl.hpp"

namespace fs = std::filesystem;
using namespace aictrl;

namespace {

constexpr const char* kOutDirEnvVar = "AICTRL_OUT_DIR";

// Precedence: --out flag, then config out_dir, then environment, then ./out.
std::string resolve_out_dir(const std::string& flag_value,
                            const RunConfig& cfg) {
  if (!flag_value.empty()) return flag_value;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv(kOutDirEnvVar); env && *env) return env;
  return "out";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + dir);
}

std::string join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

void print_metrics_header() {
  std::printf("%-22s %-6s %12s %10s %10s %14s %12s\n", "scenario", "ctrl",
              "e_ss[rad]", "t_s[s]", "os[%]", "rmse[rad]", "windup");
}

void print_metrics_row(const std::string& name, ControllerKind kind,
                       const TrialMetrics& m) {
  std::printf("%-22s %-6s %12.5g %10.4g %10.4g %14.5g %12.5g\n", name.c_str(),
              to_string(kind).c_str(), m.e_ss, m.t_s, m.os, m.rmse_belief,
              m.windup_peak);
}

int cmd_simulate(const RunConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  bool any_diverged = false;
  print_metrics_header();
  for (const Scenario& sc : cfg.scenarios) {
    EpisodeResult r = run_episode(sc);
    write_trajectory_csv(join(out_dir, sc.name + "_trajectory.csv"), r.traj);
    write_metrics_csv(join(out_dir, sc.name + "_metrics.csv"), sc.name,
                      sc.controller, r.metrics);
    print_metrics_row(sc.name, sc.controller, r.metrics);
    if (r.diverged) {
      any_diverged = true;
      std::fprintf(stderr, "scenario %s diverged: %s\n", sc.name.c_str(),
                   r.divergence_message.c_str());
    }
  }
  return any_diverged ? 2 : 0;
}

int cmd_batch(const RunConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  std::vector<BatchSummary> summaries;
  bool any_diverged = false;
  for (const Scenario& sc : cfg.scenarios) {
    std::vector<std::pair<int, TrialMetrics>> trials(
        static_cast<std::size_t>(cfg.batch.trials));
    auto on_trial = [&trials](int k, const EpisodeResult& r) {
      trials[static_cast<std::size_t>(k)] = {k, r.metrics};
    };
    BatchSummary s =
        run_batch(sc, cfg.batch.trials, cfg.batch.randomization, on_trial);
    write_trials_csv(join(out_dir, sc.name + "_trials.csv"), sc.name,
                     sc.controller, trials);
    if (s.diverged > 0) any_diverged = true;
    summaries.push_back(std::move(s));
  }
  write_summary_csv(join(out_dir, "summary.csv"), summaries);

  std::printf("%-22s %-6s %7s %9s %18s %15s %18s\n", "scenario", "ctrl",
              "trials", "diverged", "e_ss[rad]", "os[%]", "rmse[rad]");
  for (const auto& s : summaries)
    std::printf("%-22s %-6s %7d %9d %9.4g+-%-7.3g %7.4g+-%-6.3g %9.4g+-%-7.3g\n",
                s.scenario.c_str(), to_string(s.controller).c_str(), s.trials,
                s.diverged, s.e_ss.mean, s.e_ss.stddev, s.os.mean, s.os.stddev,
                s.rmse_belief.mean, s.rmse_belief.stddev);
  return any_diverged ? 2 : 0;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Mean squared step-to-step change of the command, a direct measure of
// how violently the actuator is driven.
double mean_sq_control_increment(const TrajectoryRecord& traj) {
  if (traj.ticks() < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 1; k < traj.ticks(); ++k)
    acc += (traj.u[k] - traj.u[k - 1]).squaredNorm();
  return acc / (static_cast<double>(traj.ticks() - 1) *
                static_cast<double>(traj.joints));
}

double mean_abs_belief_goal_error(const Scenario& sc,
                                  const TrajectoryRecord& traj) {
  double acc = 0.0;
  for (std::size_t k = 0; k < traj.ticks(); ++k) {
    const GoalSpec g = sc.reference.at(traj.t[k], sc.tau_inv);
    acc += (traj.mu[k] - g.mu_g).cwiseAbs().mean();
  }
  return traj.ticks() ? acc / static_cast<double>(traj.ticks()) : 0.0;
}

double mean_abs_belief_truth_error(const TrajectoryRecord& traj) {
  double acc = 0.0;
  for (std::size_t k = 0; k < traj.ticks(); ++k)
    acc += (traj.mu[k] - traj.q[k]).cwiseAbs().mean();
  return traj.ticks() ? acc / static_cast<double>(traj.ticks()) : 0.0;
}

const std::vector<std::string> kSweepMetricNames = {
    "e_ss_rad",         "t_s_s",
    "os_pct",           "rmse_belief_rad",
    "windup_peak",      "mean_abs_mu_goal_err_rad",
    "mean_abs_mu_truth_err_rad", "mean_sq_control_increment",
    "diverged"};

std::vector<double> sweep_metrics(const Scenario& sc, const EpisodeResult& r) {
  return {r.metrics.e_ss,
          r.metrics.t_s,
          r.metrics.os,
          r.metrics.rmse_belief,
          r.metrics.windup_peak,
          mean_abs_belief_goal_error(sc, r.traj),
          mean_abs_belief_truth_error(r.traj),
          mean_sq_control_increment(r.traj),
          r.diverged ? 1.0 : 0.0};
}

int cmd_sweep(const RunConfig& cfg, const std::string& out_dir,
              const std::string& param,
              const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("sweep needs a non-empty value list");
  if (param != "tau_inv" && param != "sigma_p")
    throw ConfigError("unknown sweep parameter \"" + param +
                      "\" (supported: tau_inv, sigma_p)");
  ensure_dir(out_dir);

  std::vector<SweepRow> rows;
  bool any_diverged = false;
  for (const Scenario& base : cfg.scenarios) {
    for (const std::string& raw : values) {
      Scenario sc = base;
      if (param == "tau_inv") {
        double v = 0.0;
        try {
          v = std::stod(raw);
        } catch (const std::exception&) {
          throw ConfigError("sweep value \"" + raw + "\" is not a number");
        }
        if (v < 0.0) throw ConfigError("tau_inv must be non-negative");
        sc.tau_inv = v;
      } else {  // sigma_p; the token "off" disables the slew prior
        if (sc.controller != ControllerKind::kUaic)
          throw ConfigError("sigma_p sweep needs a uaic scenario, got \"" +
                            sc.name + "\"");
        if (raw == "off") {
          sc.uaic.extensions.smoothing = false;
          sc.uaic.prec.sigma_p = Vector();
        } else {
          double v = 0.0;
          try {
            v = std::stod(raw);
          } catch (const std::exception&) {
            throw ConfigError("sweep value \"" + raw + "\" is not a number");
          }
          if (v < kSigmaMin) throw ConfigError("sigma_p is below the minimum");
          sc.uaic.extensions.smoothing = true;
          sc.uaic.prec.sigma_p = broadcast(v, sc.plant.joints);
        }
      }
      EpisodeResult r = run_episode(sc);
      any_diverged = any_diverged || r.diverged;
      const std::string value_label =
          raw == "off" ? std::string("off") : format_value(std::stod(raw));
      write_trajectory_csv(join(out_dir, sc.name + "_" + param + "_" +
                                             value_label + "_trajectory.csv"),
                           r.traj);
      rows.push_back({sc.name, value_label, sweep_metrics(sc, r)});
    }
  }
  write_sweep_csv(join(out_dir, "sweep_" + param + ".csv"), param,
                  kSweepMetricNames, rows);
  std::printf("wrote %zu sweep rows for %s\n", rows.size(), param.c_str());
  return any_diverged ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active inference joint-space control simulator"};
  app.require_subcommand(1);

  std::string config_path, out_flag, param;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  int trials_flag = 0;
  bool dump_effective = false;
  std::vector<std::string> values;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")
        ->required();
    sub->add_option("--seed", seed_flag, "override the base seed")
        ->each([&](const std::string&) { seed_given = true; });
    sub->add_option("--out", out_flag, "output directory");
    sub->add_flag("--dump-effective-config", dump_effective,
                  "print the fully resolved config and exit");
  };

  CLI::App* sim = app.add_subcommand("simulate", "run each scenario once");
  add_common(sim);
  CLI::App* batch =
      app.add_subcommand("batch", "run randomized trial batches");
  add_common(batch);
  batch->add_option("--trials", trials_flag, "override the trial count");
  CLI::App* sweep =
      app.add_subcommand("sweep", "re-run scenarios over a parameter list");
  add_common(sweep);
  sweep->add_option("--param", param, "parameter to sweep")->required();
  sweep
      ->add_option("--values", values,
                   "comma separated values (sigma_p accepts \"off\")")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    if (seed_given) apply_seed_override(cfg, seed_flag);
    if (batch->parsed() && trials_flag > 0) cfg.batch.trials = trials_flag;

    if (dump_effective) {
      std::cout << dump_effective_config(cfg).dump(2) << "\n";
      return 0;
    }

    const std::string out_dir = resolve_out_dir(out_flag, cfg);
    if (sim->parsed()) return cmd_simulate(cfg, out_dir);
    if (batch->parsed()) return cmd_batch(cfg, out_dir);
    return cmd_sweep(cfg, out_dir, param, values);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
