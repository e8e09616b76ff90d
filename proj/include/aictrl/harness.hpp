#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "aictrl/aic.hpp"
#include "aictrl/plants.hpp"
#include "aictrl/rng.hpp"
#include "aictrl/types.hpp"
#include "aictrl/uaic.hpp"

// Closed-loop episode runner, batch experiments and parameter sweeps.
// Every episode is fully determined by its Scenario (including the seed),
// so any record can be reproduced bit for bit from the scenario alone.

namespace aictrl {

enum class ControllerKind { kAic, kUaic, kPiBaseline };

inline std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::kAic: return "aic";
    case ControllerKind::kUaic: return "uaic";
    case ControllerKind::kPiBaseline: return "pi";
  }
  return "unknown";
}

// Target trajectory: constant set point or sinusoid per joint.
struct ReferenceSpec {
  enum class Kind { kConstant, kSinusoid };
  Kind kind = Kind::kConstant;
  Vector position;       // set point, or sinusoid offset
  Vector amplitude;      // sinusoid only
  double frequency_hz = 0.0;
  double phase = 0.0;

  GoalSpec at(double t, double tau_inv) const {
    GoalSpec g;
    g.tau_inv = tau_inv;
    if (kind == Kind::kConstant) {
      g.mu_g = position;
      g.mu_g_prime = Vector::Zero(position.size());
    } else {
      const double w = 2.0 * M_PI * frequency_hz;
      g.mu_g = position +
               amplitude * std::sin(w * t + phase);
      g.mu_g_prime = amplitude * (w * std::cos(w * t + phase));
    }
    return g;
  }
};

struct PlantSpec {
  enum class Kind { kMsd, kArm, kTwoLink };
  Kind kind = Kind::kArm;
  int joints = 2;  // must be 1 for kMsd, 2 for kTwoLink
  MsdParams msd;
  ArmParams arm;
  TwoLinkParams two_link;
  Vector init_q;
  Vector init_qdot;
};

// Classical PID on raw measurements, used as a comparison baseline.
struct PiConfig {
  PidGains gains;
  double integral_limit = 1.0;
  double u_saturation = 50.0;
};

struct Scenario {
  std::string name = "scenario";
  PlantSpec plant;
  ControllerKind controller = ControllerKind::kAic;
  AicConfig aic;
  PrecisionSet aic_prec;
  UaicConfig uaic;
  PiConfig pi;
  ReferenceSpec reference;
  double tau_inv = 1.0;
  double noise_std_pos = 0.0;
  double noise_std_vel = 0.0;
  std::optional<CollisionScript> collision;
  double duration = 10.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  // Run the estimator without acting (u = 0 throughout).
  bool estimation_only = false;
};

struct TrajectoryRecord {
  Eigen::Index joints = 0;
  std::vector<double> t;
  std::vector<Vector> q, q_dot, y, y_prime, mu, mu_prime, u;
  std::vector<char> blocked;  // any joint blocked at this tick

  std::size_t ticks() const { return t.size(); }
};

struct TrialMetrics {
  double e_ss = 0.0;         // mean |q - mu_g| over the final 10%, rad
  double t_s = 0.0;          // settling time after collision release, s
  double os = 0.0;           // overshoot past the set point, percent
  double rmse_belief = 0.0;  // RMSE between mu and true q, rad
  double windup_peak = 0.0;  // max |u| while blocked
  bool settled = false;
  bool diverged = false;
};

struct EpisodeResult {
  Scenario scenario;  // resolved copy, sufficient to reproduce the run
  TrajectoryRecord traj;
  TrialMetrics metrics;
  double max_integral_abs = 0.0;  // action-belief integral peak
  bool diverged = false;
  std::string divergence_message;
};

namespace detail {

inline constexpr std::uint64_t kSensorStreamTag = 0x53454e53ull;
inline constexpr std::uint64_t kCollisionStreamTag = 0x434f4c4cull;

inline void validate_scenario(const Scenario& sc) {
  const Eigen::Index n = sc.plant.joints;
  require(n > 0, "scenario needs at least one joint");
  if (sc.plant.kind == PlantSpec::Kind::kMsd)
    require(n == 1, "msd plant has exactly one coordinate");
  if (sc.plant.kind == PlantSpec::Kind::kTwoLink)
    require(n == 2, "two-link plant has exactly two joints");
  require_dim(sc.plant.init_q, n, "init_q");
  require_dim(sc.plant.init_qdot, n, "init_qdot");
  require_dim(sc.reference.position, n, "reference position");
  if (sc.reference.kind == ReferenceSpec::Kind::kSinusoid)
    require_dim(sc.reference.amplitude, n, "reference amplitude");
  require(sc.duration > 0.0, "duration must be positive");
  require(sc.dt > 0.0, "dt must be positive");
  require(sc.tau_inv >= 0.0, "tau_inv must be non-negative");
  require(sc.noise_std_pos >= 0.0 && sc.noise_std_vel >= 0.0,
          "noise standard deviations must be non-negative");
  if (sc.collision && sc.collision->hold_positions)
    require_dim(*sc.collision->hold_positions, n, "hold_positions");
}

inline PlantState plant_step(const Scenario& sc, const PlantState& state,
                             const Vector& u) {
  switch (sc.plant.kind) {
    case PlantSpec::Kind::kMsd:
      return msd_step(state, u[0], sc.dt, sc.plant.msd);
    case PlantSpec::Kind::kArm:
      return arm_step(state, u, sc.dt, sc.plant.arm);
    case PlantSpec::Kind::kTwoLink:
      return two_link_step(state, u, sc.dt, sc.plant.two_link);
  }
  return state;
}

}  // namespace detail

// Metrics from a finished trajectory. Settling and overshoot are measured
// from collision release (episode start when there is no collision)
// against the step from the initial position to the set point; both are
// reported as zero-effect values for tracking references.
inline TrialMetrics compute_metrics(const Scenario& sc,
                                    const TrajectoryRecord& traj) {
  TrialMetrics m;
  const std::size_t n_ticks = traj.ticks();
  if (n_ticks == 0) return m;
  const Eigen::Index n = traj.joints;

  double release = 0.0;
  if (sc.collision && sc.collision->duration > 0.0)
    release = sc.collision->start_time + sc.collision->duration;
  std::size_t k_release = 0;
  while (k_release < n_ticks && traj.t[k_release] < release) ++k_release;
  if (k_release >= n_ticks) k_release = n_ticks - 1;

  // Steady-state error over the final 10% of ticks.
  const std::size_t tail = std::max<std::size_t>(1, n_ticks / 10);
  double e_acc = 0.0;
  for (std::size_t k = n_ticks - tail; k < n_ticks; ++k) {
    const GoalSpec g = sc.reference.at(traj.t[k], sc.tau_inv);
    e_acc += (traj.q[k] - g.mu_g).cwiseAbs().mean();
  }
  m.e_ss = e_acc / static_cast<double>(tail);

  // Belief RMSE over the whole episode.
  double sq_acc = 0.0;
  for (std::size_t k = 0; k < n_ticks; ++k)
    sq_acc += (traj.mu[k] - traj.q[k]).squaredNorm();
  m.rmse_belief = std::sqrt(sq_acc / (static_cast<double>(n_ticks) *
                                      static_cast<double>(n)));

  // Peak command while the plant is blocked.
  for (std::size_t k = 0; k < n_ticks; ++k)
    if (traj.blocked[k])
      m.windup_peak =
          std::max(m.windup_peak, traj.u[k].cwiseAbs().maxCoeff());

  if (sc.reference.kind == ReferenceSpec::Kind::kConstant) {
    const Vector goal = sc.reference.position;
    const Vector step = goal - traj.q.front();

    // Overshoot: worst excursion past the set point in the direction of
    // the step, after release, averaged over joints.
    double os_acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(step[j]) == 0.0) continue;
      const double s = step[j] > 0.0 ? 1.0 : -1.0;
      double worst = 0.0;
      for (std::size_t k = k_release; k < n_ticks; ++k)
        worst = std::max(worst, (traj.q[k][j] - goal[j]) * s);
      os_acc += 100.0 * worst / std::abs(step[j]);
    }
    m.os = os_acc / static_cast<double>(n);

    // Settling: first post-release time from which every joint stays
    // within 2% of its step magnitude.
    std::size_t k_settle = n_ticks;  // first index of the settled suffix
    for (std::size_t k = n_ticks; k-- > k_release;) {
      bool within = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (std::abs(traj.q[k][j] - goal[j]) > 0.02 * std::abs(step[j]))
          within = false;
      if (within)
        k_settle = k;
      else
        break;
    }
    if (k_settle < n_ticks) {
      m.settled = true;
      m.t_s = traj.t[k_settle];
    } else {
      m.settled = false;
      m.t_s = sc.duration;
    }
  } else {
    m.os = 0.0;
    m.settled = false;
    m.t_s = sc.duration;
  }
  return m;
}

// Runs one closed-loop episode. The loop per tick: apply the collision
// script, read sensors, evaluate the reference, run the controller, log,
// then advance the plant with the emitted action. Beliefs initialise from
// the first observation. Controller divergence ends the episode early and
// is reported in the result instead of propagating.
inline EpisodeResult run_episode(const Scenario& scenario) {
  detail::validate_scenario(scenario);
  EpisodeResult out;
  out.scenario = scenario;
  const Scenario& sc = out.scenario;
  const Eigen::Index n = sc.plant.joints;
  const std::size_t n_ticks =
      static_cast<std::size_t>(std::llround(sc.duration / sc.dt));
  require(n_ticks > 0, "episode shorter than one tick");

  PlantState plant = PlantState::make(sc.plant.init_q, sc.plant.init_qdot);
  SensorModel sensors(sc.noise_std_pos, sc.noise_std_vel,
                      splitmix64(sc.seed ^ detail::kSensorStreamTag));

  AicConfig acfg = sc.aic;
  acfg.dt = sc.dt;
  UaicConfig ucfg = sc.uaic;
  ucfg.dt = sc.dt;

  AicState aic;
  UaicState uaic;
  Vector pi_integral = Vector::Zero(n);
  bool initialised = false;

  TrajectoryRecord& traj = out.traj;
  traj.joints = n;
  traj.t.reserve(n_ticks);

  for (std::size_t k = 0; k < n_ticks; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    plant.t = t;
    if (sc.collision) plant = apply_collision(plant, *sc.collision);
    const Observation obs = sense(plant, sensors);
    const GoalSpec goal = sc.reference.at(t, sc.tau_inv);

    if (!initialised) {
      if (sc.controller == ControllerKind::kAic)
        aic = AicState::from_observation(obs, sc.aic_prec);
      else if (sc.controller == ControllerKind::kUaic)
        uaic = UaicState::from_observation(obs, goal, sc.uaic.gains);
      initialised = true;
    }

    Vector u = Vector::Zero(n);
    Vector mu = obs.y, mu_prime = obs.y_prime;
    try {
      switch (sc.controller) {
        case ControllerKind::kAic: {
          if (sc.estimation_only) {
            aic = aic_estimate_step(std::move(aic), obs, goal, acfg);
          } else {
            auto [next, act] = aic_tick(std::move(aic), obs, goal, acfg);
            aic = std::move(next);
            u = std::move(act);
          }
          mu = aic.belief.mu;
          mu_prime = aic.belief.mu_prime;
          break;
        }
        case ControllerKind::kUaic: {
          if (sc.estimation_only) {
            const Vector x_hat = predict_state(uaic.belief, ucfg.dt);
            uaic = uaic_estimate_step(std::move(uaic), obs, x_hat, goal, ucfg);
          } else {
            auto [next, act] = uaic_tick(std::move(uaic), obs, goal, ucfg);
            uaic = std::move(next);
            u = std::move(act);
          }
          mu = uaic.belief.mu;
          mu_prime = uaic.belief.mu_prime;
          out.max_integral_abs =
              std::max(out.max_integral_abs,
                       uaic.integral_accumulator.cwiseAbs().maxCoeff());
          break;
        }
        case ControllerKind::kPiBaseline: {
          // The baseline has no beliefs; its inputs are logged as mu.
          if (!sc.estimation_only) {
            const Vector e = goal.mu_g - obs.y;
            const Vector edot = goal.mu_g_prime - obs.y_prime;
            pi_integral = clamp_sym(pi_integral + sc.dt * e,
                                    sc.pi.integral_limit);
            u = clamp_sym(sc.pi.gains.kp.cwiseProduct(e) +
                              sc.pi.gains.ki.cwiseProduct(pi_integral) +
                              sc.pi.gains.kd.cwiseProduct(edot),
                          sc.pi.u_saturation);
          }
          break;
        }
      }
    } catch (const DivergenceError& e) {
      out.diverged = true;
      out.divergence_message = e.what();
      break;
    }

    traj.t.push_back(t);
    traj.q.push_back(plant.q);
    traj.q_dot.push_back(plant.q_dot);
    traj.y.push_back(obs.y);
    traj.y_prime.push_back(obs.y_prime);
    traj.mu.push_back(mu);
    traj.mu_prime.push_back(mu_prime);
    traj.u.push_back(u);
    traj.blocked.push_back(plant.any_blocked() ? 1 : 0);

    plant = detail::plant_step(sc, plant, u);
  }

  out.metrics = compute_metrics(sc, traj);
  out.metrics.diverged = out.diverged;
  return out;
}

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct BatchSummary {
  std::string scenario;
  ControllerKind controller = ControllerKind::kAic;
  std::uint64_t seed_base = 0;
  int trials = 0;
  int diverged = 0;
  int settled = 0;
  MetricStats e_ss, t_s, os, rmse_belief, windup_peak;
};

namespace detail {

inline MetricStats stats_of(const std::vector<double>& xs) {
  MetricStats s;
  if (xs.empty()) return s;
  double acc = 0.0;
  for (double x : xs) acc += x;
  s.mean = acc / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ssq = 0.0;
    for (double x : xs) ssq += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ssq / static_cast<double>(xs.size() - 1));
  }
  return s;
}

}  // namespace detail

// Aggregates per-trial metrics into means and sample standard deviations.
// Trials are sorted by index before accumulation, so the result does not
// depend on the order in which they arrive. Diverged trials are excluded
// from every statistic; settling time is averaged over settled trials.
inline BatchSummary summarize_trials(
    std::string scenario, ControllerKind controller, std::uint64_t seed_base,
    std::vector<std::pair<int, TrialMetrics>> trials) {
  std::sort(trials.begin(), trials.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  BatchSummary s;
  s.scenario = std::move(scenario);
  s.controller = controller;
  s.seed_base = seed_base;
  s.trials = static_cast<int>(trials.size());
  std::vector<double> e_ss, t_s, os, rmse, windup;
  for (const auto& [idx, m] : trials) {
    if (m.diverged) {
      ++s.diverged;
      continue;
    }
    e_ss.push_back(m.e_ss);
    os.push_back(m.os);
    rmse.push_back(m.rmse_belief);
    windup.push_back(m.windup_peak);
    if (m.settled) {
      ++s.settled;
      t_s.push_back(m.t_s);
    }
  }
  s.e_ss = detail::stats_of(e_ss);
  s.t_s = detail::stats_of(t_s);
  s.os = detail::stats_of(os);
  s.rmse_belief = detail::stats_of(rmse);
  s.windup_peak = detail::stats_of(windup);
  return s;
}

// Randomised collision window drawn per trial, uniform in start time and
// duration.
struct BatchRandomization {
  bool randomize_collision = true;
  double start_min = 0.0;
  double start_max = 3.0;
  double duration_min = 1.0;
  double duration_max = 3.0;
};

using TrialCallback = std::function<void(int, const EpisodeResult&)>;

// Runs `trials` independent episodes of the base scenario. Trial k uses
// seed base.seed + k for both its sensor stream and its collision draw,
// so a given trial index reproduces identically regardless of trial
// count, thread count or controller choice. The optional callback is
// invoked from worker threads and must synchronise its own state.
inline BatchSummary run_batch(const Scenario& base, int trials,
                              const BatchRandomization& rnd = {},
                              const TrialCallback& on_trial = {},
                              int n_threads = 0) {
  require(trials > 0, "trials must be positive");
  if (rnd.randomize_collision) {
    require(rnd.start_max >= rnd.start_min && rnd.start_min >= 0.0,
            "collision start range is invalid");
    require(rnd.duration_max >= rnd.duration_min && rnd.duration_min > 0.0,
            "collision duration range is invalid");
  }

  std::vector<TrialMetrics> metrics(static_cast<std::size_t>(trials));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= trials) break;
      Scenario sc = base;
      sc.seed = base.seed + static_cast<std::uint64_t>(k);
      if (rnd.randomize_collision) {
        GaussianSampler g(splitmix64(sc.seed ^ detail::kCollisionStreamTag));
        CollisionScript cs;
        cs.start_time = g.uniform(rnd.start_min, rnd.start_max);
        cs.duration = g.uniform(rnd.duration_min, rnd.duration_max);
        sc.collision = cs;
      }
      EpisodeResult r = run_episode(sc);
      metrics[static_cast<std::size_t>(k)] = r.metrics;
      if (on_trial) on_trial(k, r);
    }
  };

  int workers = n_threads > 0
                    ? n_threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, trials);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<std::pair<int, TrialMetrics>> indexed;
  indexed.reserve(metrics.size());
  for (int k = 0; k < trials; ++k)
    indexed.emplace_back(k, metrics[static_cast<std::size_t>(k)]);
  return summarize_trials(base.name, base.controller, base.seed,
                          std::move(indexed));
}

struct TauSweepEntry {
  double tau_inv = 0.0;
  EpisodeResult episode;
};

// Re-runs the base scenario once per attractor gain value. Everything
// else, including the seed, is held fixed.
inline std::vector<TauSweepEntry> tau_sweep(
    const Scenario& base, const std::vector<double>& tau_values) {
  require(!tau_values.empty(), "tau sweep needs at least one value");
  std::vector<TauSweepEntry> out;
  out.reserve(tau_values.size());
  for (double v : tau_values) {
    require(v >= 0.0, "tau_inv must be non-negative");
    Scenario sc = base;
    sc.tau_inv = v;
    out.push_back({v, run_episode(sc)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference tunings. The arm scenario is the shared benchmark: a two-joint
// step reach with sensor noise and a blocking collision, identical across
// controllers except for the controller block itself. The mass-spring
// scenario drives the estimation-only sweeps.
// ---------------------------------------------------------------------------

// The action flow must run much faster than the belief flow (kappa_a >>
// kappa_mu): the action only sees the residuals y - mu and y' - mu', so a
// sluggish action loop lets the biased beliefs settle before the plant
// moves, which destabilises the reach. The goal-prior variance sigma_mu = 2
// keeps a visible estimation bias without stalling convergence.
inline AicConfig reference_aic_config() {
  AicConfig cfg;
  cfg.kappa_mu = 10.0;
  cfg.kappa_a = 200.0;
  cfg.dt = 1e-3;
  cfg.u_saturation = 50.0;
  return cfg;
}

inline PrecisionSet reference_aic_precisions(Eigen::Index n) {
  return PrecisionSet::for_generalised(n, 1.0, 0.5, 2.0, 1.0);
}

// Small integral clamp and a strong derivative gain: the clamp bounds the
// torque surplus left over after a blocked interval, the derivative term
// damps the release transient. Both keep the post-release overshoot low,
// which is the point of the action-belief formulation.
inline UaicConfig reference_uaic_config(Eigen::Index n) {
  UaicConfig cfg;
  cfg.kappa_mu = 100.0;
  cfg.kappa_u = 400.0;
  cfg.dt = 1e-3;
  cfg.gains = PidGains::uniform(n, 2.5, 0.25, 3.0);
  cfg.integral_limit = 0.25;
  cfg.u_saturation = 50.0;
  cfg.prec = PrecisionSet::for_action_belief(n, 1.0, 1.0, 1.0, 1.0);
  return cfg;
}

inline PiConfig reference_pi_config(Eigen::Index n) {
  PiConfig cfg;
  cfg.gains = PidGains::uniform(n, 2.5, 0.25, 3.0);
  cfg.integral_limit = 0.25;
  cfg.u_saturation = 50.0;
  return cfg;
}

inline Scenario reference_arm_scenario(ControllerKind kind) {
  Scenario sc;
  sc.name = "arm_reach_" + to_string(kind);
  sc.controller = kind;
  sc.plant.kind = PlantSpec::Kind::kArm;
  sc.plant.joints = 2;
  // Damping 2.0 keeps the open-loop reach aperiodic: the joints coast into
  // the goal without a braking (negative torque) phase, so a block landing
  // anywhere in the first seconds catches a non-negative hold torque.
  sc.plant.arm.damping = 2.0;
  sc.plant.init_q = Vector::Zero(2);
  sc.plant.init_qdot = Vector::Zero(2);
  sc.reference.kind = ReferenceSpec::Kind::kConstant;
  sc.reference.position = broadcast(1.0, 2);
  sc.tau_inv = 1.0;
  sc.noise_std_pos = 1e-3;
  sc.noise_std_vel = 1e-3;
  sc.collision = CollisionScript{3.0, 3.0, std::nullopt};
  sc.duration = 12.0;
  sc.dt = 1e-3;
  sc.seed = 12345;
  sc.aic = reference_aic_config();
  sc.aic_prec = reference_aic_precisions(2);
  sc.uaic = reference_uaic_config(2);
  sc.pi = reference_pi_config(2);
  return sc;
}

inline BatchRandomization reference_batch_randomization() {
  return BatchRandomization{true, 0.0, 3.0, 1.0, 3.0};
}

// Free mass-spring-damper released off equilibrium, estimator only. The
// set point sits away from the whole trajectory, so the estimation bias
// induced by the attractor is visible directly.
inline Scenario reference_msd_estimation_scenario() {
  Scenario sc;
  sc.name = "msd_estimation";
  sc.controller = ControllerKind::kAic;
  sc.estimation_only = true;
  sc.plant.kind = PlantSpec::Kind::kMsd;
  sc.plant.joints = 1;
  sc.plant.init_q = broadcast(-0.5, 1);
  sc.plant.init_qdot = broadcast(-1.0, 1);
  sc.reference.kind = ReferenceSpec::Kind::kConstant;
  sc.reference.position = broadcast(0.5, 1);
  sc.tau_inv = 1.0;
  sc.duration = 10.0;
  sc.dt = 1e-3;
  sc.seed = 777;
  sc.aic = reference_aic_config();
  sc.aic.kappa_mu = 20.0;
  sc.aic_prec = PrecisionSet::for_generalised(1, 1.0, 1.0, 1.0, 1.0);
  sc.uaic = reference_uaic_config(1);
  sc.pi = reference_pi_config(1);
  return sc;
}

}  // namespace aictrl
