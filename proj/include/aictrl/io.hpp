#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "aictrl/harness.hpp"
#include "aictrl/types.hpp"

// CSV writers. Numbers are printed with 17 significant digits, enough to
// round-trip an IEEE double exactly, so written trajectories are faithful
// to the simulated values.

namespace aictrl {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline void append_block(std::string& header, const std::string& stem,
                         Eigen::Index n) {
  for (Eigen::Index j = 1; j <= n; ++j)
    header += "," + stem + "_" + std::to_string(j);
}

inline void append_values(std::string& row, const Vector& v) {
  for (Eigen::Index j = 0; j < v.size(); ++j) row += "," + fmt_double(v[j]);
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << content;
  if (!out) throw ConfigError("failed writing output file: " + path);
}

}  // namespace detail

// Columns: t, then per-joint blocks q, qdot, y, yprime, mu, muprime, u.
// The leading comment line documents units.
inline void write_trajectory_csv(const std::string& path,
                                 const TrajectoryRecord& traj) {
  const Eigen::Index n = traj.joints;
  std::string out;
  out.reserve(traj.ticks() * (static_cast<std::size_t>(n) * 7 + 1) * 20);
  out += "# units: t s, q rad, qdot rad/s, y rad, yprime rad/s, mu rad, "
         "muprime rad/s, u N m\n";
  std::string header = "t";
  detail::append_block(header, "q", n);
  detail::append_block(header, "qdot", n);
  detail::append_block(header, "y", n);
  detail::append_block(header, "yprime", n);
  detail::append_block(header, "mu", n);
  detail::append_block(header, "muprime", n);
  detail::append_block(header, "u", n);
  out += header + "\n";
  for (std::size_t k = 0; k < traj.ticks(); ++k) {
    std::string row = fmt_double(traj.t[k]);
    detail::append_values(row, traj.q[k]);
    detail::append_values(row, traj.q_dot[k]);
    detail::append_values(row, traj.y[k]);
    detail::append_values(row, traj.y_prime[k]);
    detail::append_values(row, traj.mu[k]);
    detail::append_values(row, traj.mu_prime[k]);
    detail::append_values(row, traj.u[k]);
    out += row + "\n";
  }
  detail::write_file(path, out);
}

inline std::string metrics_csv_header() {
  return "scenario,controller,e_ss_rad,t_s_s,os_pct,rmse_belief_rad,"
         "windup_peak,settled,diverged";
}

inline std::string metrics_csv_row(const std::string& scenario,
                                   ControllerKind controller,
                                   const TrialMetrics& m) {
  std::string row = scenario + "," + to_string(controller);
  row += "," + fmt_double(m.e_ss);
  row += "," + fmt_double(m.t_s);
  row += "," + fmt_double(m.os);
  row += "," + fmt_double(m.rmse_belief);
  row += "," + fmt_double(m.windup_peak);
  row += m.settled ? ",1" : ",0";
  row += m.diverged ? ",1" : ",0";
  return row;
}

inline void write_metrics_csv(const std::string& path,
                              const std::string& scenario,
                              ControllerKind controller,
                              const TrialMetrics& m) {
  detail::write_file(path, metrics_csv_header() + "\n" +
                               metrics_csv_row(scenario, controller, m) + "\n");
}

// One row per batch, mirroring the benchmark table: steady-state error,
// settling time, overshoot and belief RMSE as mean and standard deviation
// over trials.
inline void write_summary_csv(const std::string& path,
                              const std::vector<BatchSummary>& summaries) {
  std::string out =
      "scenario,controller,trials,diverged,settled,"
      "e_ss_rad_mean,e_ss_rad_std,t_s_s_mean,t_s_s_std,"
      "os_pct_mean,os_pct_std,rmse_belief_rad_mean,rmse_belief_rad_std,"
      "windup_peak_mean,windup_peak_std,seed_base\n";
  for (const auto& s : summaries) {
    out += s.scenario + "," + to_string(s.controller);
    out += "," + std::to_string(s.trials);
    out += "," + std::to_string(s.diverged);
    out += "," + std::to_string(s.settled);
    out += "," + fmt_double(s.e_ss.mean) + "," + fmt_double(s.e_ss.stddev);
    out += "," + fmt_double(s.t_s.mean) + "," + fmt_double(s.t_s.stddev);
    out += "," + fmt_double(s.os.mean) + "," + fmt_double(s.os.stddev);
    out += "," + fmt_double(s.rmse_belief.mean) + "," +
           fmt_double(s.rmse_belief.stddev);
    out += "," + fmt_double(s.windup_peak.mean) + "," +
           fmt_double(s.windup_peak.stddev);
    out += "," + std::to_string(s.seed_base) + "\n";
  }
  detail::write_file(path, out);
}

// Per-trial metrics of one batch, one row per trial index.
inline void write_trials_csv(
    const std::string& path, const std::string& scenario,
    ControllerKind controller,
    const std::vector<std::pair<int, TrialMetrics>>& trials) {
  std::string out = "trial," + metrics_csv_header() + "\n";
  for (const auto& [idx, m] : trials)
    out += std::to_string(idx) + "," + metrics_csv_row(scenario, controller, m) +
           "\n";
  detail::write_file(path, out);
}

// Long-format sweep results: one row per scenario and swept value, with a
// flexible metric column set.
struct SweepRow {
  std::string scenario;
  std::string value;
  std::vector<double> metrics;
};

inline void write_sweep_csv(const std::string& path,
                            const std::string& parameter,
                            const std::vector<std::string>& metric_names,
                            const std::vector<SweepRow>& rows) {
  std::string out = "scenario,parameter,value";
  for (const auto& name : metric_names) out += "," + name;
  out += "\n";
  for (const auto& row : rows) {
    out += row.scenario + "," + parameter + "," + row.value;
    for (double m : row.metrics) out += "," + fmt_double(m);
    out += "\n";
  }
  detail::write_file(path, out);
}

}  // namespace aictrl
