// Acceptance gate for the controller library. Each criterion prints one
// PASS/FAIL line with its measured numbers; the exit code is nonzero if
// any line fails. Tolerances and budgets are pinned as named constants.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <mutex>
#include <string>
#include <vector>

#include "aictrl/aic.hpp"
#include "aictrl/harness.hpp"
#include "aictrl/plants.hpp"
#include "aictrl/rng.hpp"
#include "aictrl/uaic.hpp"
#include "oracles.hpp"

using namespace aictrl;

namespace {

// --- tolerances and budgets -----------------------------------------------
constexpr double kWorkedPointTol = 1e-12;   // closed-form worked value
constexpr double kDescentTol = 1e-6;        // iterated descent vs closed form
constexpr double kGradRelTol = 1e-5;        // gradient vs finite difference
constexpr double kRmseRatioMin = 10.0;      // belief RMSE, baseline / upgraded
constexpr double kOvershootRatioMin = 3.0;  // release overshoot ratio
constexpr double kMonotoneSlack = 1e-12;    // |u| growth slack while blocked
constexpr double kIntegralSlack = 1e-12;    // clamp overshoot slack
constexpr double kPiStepTol = 1e-10;        // per-step PI agreement
constexpr double kVarianceRelTol = 0.10;    // calibrated variance, relative
constexpr double kVarianceInflationMin = 2.0;
constexpr double kBiasSquareRelTol = 0.15;  // inflated variance vs bias^2 + v
constexpr double kPriorRestTol = 1e-8;      // action prior stationary points
constexpr double kMsdTol = 1e-6;            // integrator vs closed form
constexpr double kOrderRatioMin = 8.0;      // error ratio per dt halving
constexpr double kBudgetGradients = 10.0;   // seconds
constexpr double kBudgetBatch = 120.0;
constexpr double kBudgetPi = 1.0;
constexpr double kBudgetVariance = 30.0;
constexpr double kBudgetPriors = 30.0;
constexpr double kBudgetMsd = 5.0;
constexpr double kBudgetTau = 5.0;

int failures = 0;

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void report(const char* id, const char* what, bool ok, const std::string& detail) {
  std::printf("%-3s %-52s %s  %s\n", id, what, ok ? "PASS" : "FAIL",
              detail.c_str());
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

// Random instances mirroring what the controllers see, dimensions 1 to 4.
struct AicCase {
  GaussianBeliefState belief;
  Observation obs;
  GoalSpec goal;
  PrecisionSet prec;
  Eigen::Index n = 0;
};

AicCase random_aic_case(oracle::Gen& g) {
  AicCase c;
  c.n = g.integer(1, 4);
  const auto n = static_cast<std::size_t>(c.n);
  c.belief.mu = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.belief.mu_prime = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.belief.mu_double_prime = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.obs.y = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.obs.y_prime = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.goal.mu_g = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.goal.mu_g_prime = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.goal.tau_inv = g.uniform(0.0, 4.0);
  c.prec.sigma_y = oracle::to_eigen(g.variances(n));
  c.prec.sigma_y_prime = oracle::to_eigen(g.variances(n));
  c.prec.sigma_mu = oracle::to_eigen(g.variances(n));
  c.prec.sigma_mu_prime = oracle::to_eigen(g.variances(n));
  return c;
}

struct UaicCase {
  GaussianBeliefState belief;
  Observation obs;
  Vector x_hat;
  GoalSpec goal;
  PrecisionSet prec;
  DesiredActionLaw law;
  ExtensionConfig ext;
  Vector u_prev;
  Eigen::Index n = 0;
};

UaicCase random_uaic_case(oracle::Gen& g, bool with_extensions, int ext_mask) {
  UaicCase c;
  c.n = g.integer(1, 4);
  const auto n = static_cast<std::size_t>(c.n);
  c.belief.mu = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.belief.mu_prime = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.belief.mu_u = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.obs.y = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.obs.y_prime = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.x_hat = oracle::to_eigen(g.values(2 * n, -2.0, 2.0));
  c.goal.mu_g = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.goal.mu_g_prime = oracle::to_eigen(g.values(n, -2.0, 2.0));
  c.prec.sigma_y = oracle::to_eigen(g.variances(n));
  c.prec.sigma_y_prime = oracle::to_eigen(g.variances(n));
  c.prec.sigma_x = oracle::to_eigen(g.variances(n));
  c.prec.sigma_u = oracle::to_eigen(g.variances(n));
  c.law.gains = PidGains{oracle::to_eigen(g.values(n, 0.0, 3.0)),
                         oracle::to_eigen(g.values(n, 0.0, 3.0)),
                         oracle::to_eigen(g.values(n, 0.0, 3.0))};
  c.law.integral = oracle::to_eigen(g.values(n, -1.0, 1.0));
  c.u_prev = oracle::to_eigen(g.values(n, -2.0, 2.0));
  if (with_extensions) {
    if (ext_mask & 1) {
      c.ext.open_loop = true;
      c.ext.open_loop_constant = oracle::to_eigen(g.values(n, -2.0, 2.0));
      c.prec.sigma_ol = oracle::to_eigen(g.variances(n));
    }
    if (ext_mask & 2) {
      c.ext.control_cost = true;
      c.prec.sigma_cc = oracle::to_eigen(g.variances(n));
    }
    if (ext_mask & 4) {
      c.ext.smoothing = true;
      c.prec.sigma_p = oracle::to_eigen(g.variances(n));
    }
  }
  return c;
}

// --- C1: position fixed point ---------------------------------------------

void criterion_fixed_point() {
  GoalSpec goal;
  goal.mu_g = broadcast(-0.2, 1);
  goal.mu_g_prime = broadcast(0.0, 1);
  goal.tau_inv = 1.0;
  const PrecisionSet unit = PrecisionSet::for_generalised(1, 1, 1, 1, 1);
  const Vector mu =
      aic_fixed_point(broadcast(-0.355, 1), broadcast(0.053, 1), goal, unit);
  const double worked_gap = std::abs(mu[0] - (-0.304));

  // Random instances: descend the energy in the position coordinate only
  // and land on the closed form.
  oracle::Gen g(301);
  double worst = 0.0;
  for (int k = 0; k < 25; ++k) {
    AicCase c = random_aic_case(g);
    c.goal.tau_inv = 1.0;
    const Vector want =
        aic_fixed_point(c.obs.y, c.belief.mu_prime, c.goal, c.prec);
    Vector m = c.belief.mu;
    for (int it = 0; it < 200000; ++it) {
      GaussianBeliefState b = c.belief;
      b.mu = m;
      const auto grad = grad_free_energy_aic(b, c.obs, c.goal, c.prec);
      m -= 0.05 * grad.d_mu;
      if (grad.d_mu.cwiseAbs().maxCoeff() < 1e-12) break;
    }
    worst = std::max(worst, (m - want).cwiseAbs().maxCoeff());
  }

  const bool ok = worked_gap <= kWorkedPointTol && worst <= kDescentTol;
  report("C1", "position fixed point and descent agreement", ok,
         fmt("worked value gap %.2e (tol %.0e), descent gap %.2e (tol %.0e)",
             worked_gap, kWorkedPointTol, worst, kDescentTol));
}

// --- C2: gradients against central finite differences ---------------------

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  oracle::Gen g(302);
  double worst_gen = 0.0, worst_act = 0.0;

  for (int k = 0; k < 1000; ++k) {
    {
      const AicCase c = random_aic_case(g);
      const auto grad = grad_free_energy_aic(c.belief, c.obs, c.goal, c.prec);
      const auto n = static_cast<std::size_t>(c.n);
      std::vector<double> x(3 * n);
      for (std::size_t j = 0; j < n; ++j) {
        x[j] = c.belief.mu[static_cast<Eigen::Index>(j)];
        x[n + j] = c.belief.mu_prime[static_cast<Eigen::Index>(j)];
        x[2 * n + j] = c.belief.mu_double_prime[static_cast<Eigen::Index>(j)];
      }
      auto f = [&](const std::vector<double>& v) {
        GaussianBeliefState b = c.belief;
        for (std::size_t j = 0; j < n; ++j) {
          b.mu[static_cast<Eigen::Index>(j)] = v[j];
          b.mu_prime[static_cast<Eigen::Index>(j)] = v[n + j];
          b.mu_double_prime[static_cast<Eigen::Index>(j)] = v[2 * n + j];
        }
        return free_energy_aic(b, c.obs, c.goal, c.prec).value;
      };
      for (std::size_t j = 0; j < n; ++j) {
        const auto je = static_cast<Eigen::Index>(j);
        worst_gen = std::max(
            {worst_gen, rel_err(grad.d_mu[je], oracle::central_diff(f, x, j)),
             rel_err(grad.d_mu_prime[je], oracle::central_diff(f, x, n + j)),
             rel_err(grad.d_mu_double_prime[je],
                     oracle::central_diff(f, x, 2 * n + j))});
      }
    }
    {
      const UaicCase c = random_uaic_case(g, (k % 2) == 1, 1 + (k % 7));
      const auto grad = grad_free_energy_uaic(c.belief, c.obs, c.x_hat, c.goal,
                                              c.prec, c.law, c.ext, c.u_prev,
                                              true);
      const auto n = static_cast<std::size_t>(c.n);
      std::vector<double> x(3 * n);
      for (std::size_t j = 0; j < n; ++j) {
        x[j] = c.belief.mu[static_cast<Eigen::Index>(j)];
        x[n + j] = c.belief.mu_prime[static_cast<Eigen::Index>(j)];
        x[2 * n + j] = c.belief.mu_u[static_cast<Eigen::Index>(j)];
      }
      auto f = [&](const std::vector<double>& v) {
        GaussianBeliefState b = c.belief;
        for (std::size_t j = 0; j < n; ++j) {
          b.mu[static_cast<Eigen::Index>(j)] = v[j];
          b.mu_prime[static_cast<Eigen::Index>(j)] = v[n + j];
          b.mu_u[static_cast<Eigen::Index>(j)] = v[2 * n + j];
        }
        return free_energy_uaic(b, c.obs, c.x_hat, c.goal, c.prec, c.law,
                                c.ext, c.u_prev)
            .value;
      };
      for (std::size_t j = 0; j < n; ++j) {
        const auto je = static_cast<Eigen::Index>(j);
        worst_act = std::max(
            {worst_act, rel_err(grad.d_mu[je], oracle::central_diff(f, x, j)),
             rel_err(grad.d_mu_prime[je], oracle::central_diff(f, x, n + j)),
             rel_err(grad.d_mu_u[je],
                     oracle::central_diff(f, x, 2 * n + j))});
      }
    }
  }

  const double elapsed = seconds_since(t0);
  const bool ok = worst_gen < kGradRelTol && worst_act < kGradRelTol &&
                  elapsed < kBudgetGradients;
  report("C2", "belief gradients match finite differences", ok,
         fmt("1000 instances, worst rel err %.2e / %.2e (tol %.0e), %.1fs",
             worst_gen, worst_act, kGradRelTol, elapsed));
}

// --- C3/C4/C5: paired collision benchmark ----------------------------------

int windup_violations(const EpisodeResult& r) {
  // While a joint is held, the position residual keeps growing, so the
  // baseline's |u| must ratchet upward until the clamp takes over.
  const double u_sat = r.scenario.aic.u_saturation;
  const auto& tr = r.traj;
  int bad = 0;
  for (Eigen::Index j = 0; j < tr.joints; ++j) {
    for (std::size_t k = 1; k < tr.ticks(); ++k) {
      if (!tr.blocked[k] || !tr.blocked[k - 1]) continue;
      const double prev = std::abs(tr.u[k - 1][j]);
      if (prev >= u_sat - 1e-9) continue;
      if (std::abs(tr.u[k][j]) < prev - kMonotoneSlack) ++bad;
    }
  }
  return bad;
}

void criterion_benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  const int kTrials = 100;
  const BatchRandomization rnd = reference_batch_randomization();

  std::mutex m;
  int mono_bad = 0;
  const BatchSummary base = run_batch(
      reference_arm_scenario(ControllerKind::kAic), kTrials, rnd,
      [&](int, const EpisodeResult& r) {
        const int bad = windup_violations(r);
        std::lock_guard<std::mutex> lock(m);
        mono_bad += bad;
      });

  double max_integral = 0.0;
  const Scenario up_sc = reference_arm_scenario(ControllerKind::kUaic);
  const BatchSummary up = run_batch(
      up_sc, kTrials, rnd, [&](int, const EpisodeResult& r) {
        std::lock_guard<std::mutex> lock(m);
        max_integral = std::max(max_integral, r.max_integral_abs);
      });

  const double elapsed = seconds_since(t0);
  const int diverged = base.diverged + up.diverged;
  const double rmse_ratio = base.rmse_belief.mean / up.rmse_belief.mean;
  const double os_ratio = base.os.mean / up.os.mean;

  report("C3", "belief tracking error ratio across controllers",
         rmse_ratio >= kRmseRatioMin && diverged == 0 && elapsed < kBudgetBatch,
         fmt("rmse %.5f vs %.5f, ratio %.2f (min %.0f), %d trials, %.1fs",
             base.rmse_belief.mean, up.rmse_belief.mean, rmse_ratio,
             kRmseRatioMin, kTrials, elapsed));
  report("C4", "post-release overshoot ratio across controllers",
         os_ratio >= kOvershootRatioMin && diverged == 0,
         fmt("overshoot %.2f%% vs %.2f%%, ratio %.2f (min %.0f)", base.os.mean,
             up.os.mean, os_ratio, kOvershootRatioMin));
  report("C5", "windup containment during blocked motion",
         mono_bad == 0 &&
             max_integral <= up_sc.uaic.integral_limit + kIntegralSlack &&
             diverged == 0,
         fmt("monotonicity violations %d, integral peak %.6f (clamp %.2f), "
             "diverged %d",
             mono_bad, max_integral, up_sc.uaic.integral_limit, diverged));
}

// --- C6: action flow reduces to a discrete PI law --------------------------

void criterion_pi_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const double dt = 1e-3;
  const double kappa_a = 3.0;
  const double sy = 0.7, syp = 1.3;
  const double goal_pos = 0.4;

  AicConfig cfg;
  cfg.kappa_a = kappa_a;
  cfg.dt = dt;
  cfg.u_saturation = 1e9;

  GoalSpec goal;
  goal.mu_g = broadcast(goal_pos, 1);
  goal.mu_g_prime = broadcast(0.0, 1);

  const int kSteps = 10000;
  std::vector<double> y(kSteps + 1);
  for (int k = 0; k <= kSteps; ++k) {
    const double t = k * dt;
    y[static_cast<std::size_t>(k)] =
        goal_pos + 0.5 * std::exp(-0.3 * t) * std::cos(2.0 * t);
  }

  Observation first;
  first.y = broadcast(y[0], 1);
  first.y_prime = broadcast((y[1] - y[0]) / dt, 1);
  AicState state = AicState::from_observation(
      first, PrecisionSet::for_generalised(1, sy, syp, 1.0, 1.0));
  state.belief.mu = goal.mu_g;
  state.belief.mu_prime = goal.mu_g_prime;
  state.belief.mu_double_prime = broadcast(0.0, 1);

  // Positional-form PI on e = goal - y; the velocity channel telescopes
  // because the measurement stream uses forward differences.
  const double P = kappa_a / syp;
  const double I = kappa_a / sy;
  double err_integral = 0.0;
  double worst = 0.0;

  for (int k = 0; k < kSteps; ++k) {
    Observation obs;
    obs.y = broadcast(y[static_cast<std::size_t>(k)], 1);
    obs.y_prime = broadcast(
        (y[static_cast<std::size_t>(k) + 1] - y[static_cast<std::size_t>(k)]) /
            dt,
        1);
    state = aic_control_step(state, obs, cfg);

    err_integral += dt * (goal_pos - y[static_cast<std::size_t>(k)]);
    const double pi_u = P * (goal_pos - y[static_cast<std::size_t>(k) + 1]) -
                        P * (goal_pos - y[0]) + I * err_integral;
    worst = std::max(worst, std::abs(state.u[0] - pi_u));
  }

  const double elapsed = seconds_since(t0);
  report("C6", "action flow reduces to a discrete PI law",
         worst < kPiStepTol && elapsed < kBudgetPi,
         fmt("10000 steps, worst gap %.2e (tol %.0e), %.2fs", worst, kPiStepTol,
             elapsed));
}

// --- C7: variance learning -------------------------------------------------

void criterion_variance_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  const int kSamples = 100000;

  // Beliefs pinned on the truth: the learned variance settles on the true
  // sensor variance.
  const double v_true = 0.04;
  GoalSpec goal;
  goal.mu_g = broadcast(0.8, 1);
  goal.mu_g_prime = broadcast(0.0, 1);
  goal.tau_inv = 1.0;
  Observation obs;
  obs.y = goal.mu_g;
  obs.y_prime = broadcast(0.0, 1);
  AicState state = AicState::from_observation(
      obs, PrecisionSet::for_generalised(1, 1, 1, 1, 1));
  state.prec.sigma_y = broadcast(0.08, 1);
  AicConfig cfg;
  cfg.precision_learning_enabled = true;
  cfg.kappa_sigma = 2e-3;
  GaussianSampler noise(4242);
  double acc = 0.0;
  int counted = 0;
  for (int k = 0; k < kSamples; ++k) {
    Observation noisy = obs;
    noisy.y[0] += noise.normal(0.0, std::sqrt(v_true));
    state = precision_learning_step(state, noisy, cfg);
    if (k >= kSamples / 2) {
      acc += state.prec.sigma_y[0];
      ++counted;
    }
  }
  const double calibrated = acc / counted;
  const double cal_rel = std::abs(calibrated - v_true) / v_true;

  // Measurements held half a radian from the goal while the goal prior
  // pins the belief near the set point (tight y' and mu channels): the
  // residual mean is nonzero and the learned variance inflates to the
  // squared bias, not to an arbitrary blow-up.
  const double v_small = 0.0025;
  GoalSpec off_goal;
  off_goal.mu_g = broadcast(0.5, 1);
  off_goal.mu_g_prime = broadcast(0.0, 1);
  off_goal.tau_inv = 1.0;
  Observation clean;
  clean.y = broadcast(0.0, 1);
  clean.y_prime = broadcast(0.0, 1);
  AicState biased = AicState::from_observation(
      clean, PrecisionSet::for_generalised(1, 0.1, 0.01, 0.01, 1.0));
  AicConfig bias_cfg;
  bias_cfg.kappa_mu = 5.0;
  bias_cfg.precision_learning_enabled = true;
  bias_cfg.kappa_sigma = 5e-3;
  GaussianSampler small_noise(99);
  acc = 0.0;
  double resid_acc = 0.0;
  counted = 0;
  for (int k = 0; k < kSamples; ++k) {
    Observation noisy = clean;
    noisy.y[0] += small_noise.normal(0.0, std::sqrt(v_small));
    biased = aic_estimate_step(biased, noisy, off_goal, bias_cfg);
    biased = precision_learning_step(biased, noisy, bias_cfg);
    if (k >= kSamples / 2) {
      acc += biased.prec.sigma_y[0];
      resid_acc += noisy.y[0] - biased.belief.mu[0];
      ++counted;
    }
  }
  const double inflated = acc / counted;
  const double bias = resid_acc / counted;
  const double near_gap =
      std::abs(inflated - (bias * bias + v_small)) / (bias * bias + v_small);

  const double elapsed = seconds_since(t0);
  report("C7", "variance learning calibrated and bias-inflated",
         cal_rel <= kVarianceRelTol &&
             inflated >= kVarianceInflationMin * v_small &&
             near_gap <= kBiasSquareRelTol && elapsed < kBudgetVariance,
         fmt("calibrated %.4f vs true %.4f (rel %.3f, tol %.2f); "
             "inflated %.4f >= %.1fx %.4f, near bias^2+v (rel %.3f, tol "
             "%.2f); %.1fs",
             calibrated, v_true, cal_rel, kVarianceRelTol, inflated,
             kVarianceInflationMin, v_small, near_gap, kBiasSquareRelTol,
             elapsed));
}

// --- C8: action priors ------------------------------------------------------

// Goal-resting setup whose desired action is a nonzero constant carried by
// the integral term, so control steps see a frozen f*.
struct Frozen {
  UaicState state;
  GoalSpec goal;
  UaicConfig cfg;
};

Frozen make_frozen(double fstar) {
  Frozen r;
  r.goal.mu_g = broadcast(0.5, 1);
  r.goal.mu_g_prime = broadcast(0.0, 1);
  Observation obs;
  obs.y = r.goal.mu_g;
  obs.y_prime = r.goal.mu_g_prime;
  r.cfg.gains = PidGains::uniform(1, 1.0, 2.0 * fstar, 1.0);
  r.cfg.prec = PrecisionSet::for_action_belief(1, 1, 1, 1, 1);
  r.state = UaicState::from_observation(obs);
  r.state.integral_accumulator = broadcast(0.5, 1);
  return r;
}

void criterion_action_priors() {
  const auto t0 = std::chrono::steady_clock::now();
  const double fstar = 2.0;

  // Feed-forward prior: rest at the variance-weighted mean of f* and the
  // constant.
  auto ol = make_frozen(fstar);
  ol.cfg.extensions.open_loop = true;
  ol.cfg.extensions.open_loop_constant = broadcast(1.0, 1);
  ol.cfg.prec.sigma_ol = broadcast(0.7, 1);
  for (int k = 0; k < 4000; ++k)
    std::tie(ol.state, std::ignore) = uaic_control_step(ol.state, ol.goal, ol.cfg);
  const double want_ol = (fstar / 1.0 + 1.0 / 0.7) / (1.0 / 1.0 + 1.0 / 0.7);
  const double gap_ol = std::abs(ol.state.belief.mu_u[0] - want_ol);

  // Control-cost prior: rest shrinks toward zero by the variance ratio.
  auto cc = make_frozen(fstar);
  cc.cfg.extensions.control_cost = true;
  cc.cfg.prec.sigma_cc = broadcast(0.5, 1);
  for (int k = 0; k < 4000; ++k)
    std::tie(cc.state, std::ignore) = uaic_control_step(cc.state, cc.goal, cc.cfg);
  const double want_cc = fstar * 0.5 / (0.5 + 1.0);
  const double gap_cc = std::abs(cc.state.belief.mu_u[0] - want_cc);

  // Slew prior with the anchor frozen by hand: descend the energy gradient
  // directly. Live stepping moves the anchor with each emission, so the
  // only self-consistent live rest is f* itself; the weighted mean is a
  // property of the functional at a fixed anchor.
  {
    GaussianBeliefState b;
    b.mu = broadcast(0.5, 1);
    b.mu_prime = broadcast(0.0, 1);
    b.mu_u = broadcast(0.0, 1);
    Observation obs;
    obs.y = b.mu;
    obs.y_prime = b.mu_prime;
    Vector x_hat(2);
    x_hat << 0.5, 0.0;
    GoalSpec goal;
    goal.mu_g = broadcast(0.5, 1);
    goal.mu_g_prime = broadcast(0.0, 1);
    DesiredActionLaw law{PidGains::uniform(1, 1.0, 2.0 * fstar, 1.0),
                         broadcast(0.5, 1)};
    PrecisionSet prec = PrecisionSet::for_action_belief(1, 1, 1, 1, 1);
    prec.sigma_p = broadcast(0.4, 1);
    ExtensionConfig ext;
    ext.smoothing = true;
    const Vector anchor = broadcast(0.6, 1);
    for (int it = 0; it < 200000; ++it) {
      const auto grad = grad_free_energy_uaic(b, obs, x_hat, goal, prec, law,
                                              ext, anchor, true);
      b.mu_u -= 0.05 * grad.d_mu_u;
      if (std::abs(grad.d_mu_u[0]) < 1e-13) break;
    }
    const double want_sp =
        (fstar / 1.0 + 0.6 / 0.4) / (1.0 / 1.0 + 1.0 / 0.4);
    const double gap_sp = std::abs(b.mu_u[0] - want_sp);

    // Slew ladder: tightening the prior never roughens the emitted stream.
    // The goal stream carries seeded jitter so increments are noise-driven,
    // and every rung replays the identical sequence.
    const std::vector<double> ladder = {-1.0, 10.0, 1.0, 0.1};  // -1 off
    std::vector<double> rough;
    for (double sp : ladder) {
      UaicConfig cfg;
      cfg.gains = PidGains::uniform(1, 3.0, 0.0, 0.0);
      cfg.prec = PrecisionSet::for_action_belief(1, 1, 1, 1, 1);
      if (sp > 0.0) {
        cfg.extensions.smoothing = true;
        cfg.prec.sigma_p = broadcast(sp, 1);
      }
      Observation o;
      o.y = broadcast(0.0, 1);
      o.y_prime = broadcast(0.0, 1);
      UaicState st = UaicState::from_observation(o);
      GaussianSampler jitter(7);
      GoalSpec gl;
      gl.mu_g_prime = broadcast(0.0, 1);
      double acc = 0.0, prev_u = 0.0;
      const int kSteps = 2000;
      for (int k = 0; k < kSteps; ++k) {
        const double t = k * cfg.dt;
        gl.mu_g = broadcast(
            0.8 * std::sin(2.0 * M_PI * t) + jitter.normal(0.0, 0.3), 1);
        Vector u;
        std::tie(st, u) = uaic_control_step(st, gl, cfg);
        acc += (u[0] - prev_u) * (u[0] - prev_u);
        prev_u = u[0];
      }
      rough.push_back(acc / kSteps);
    }
    bool ladder_ok = rough.back() < 0.5 * rough.front();
    for (std::size_t i = 1; i < rough.size(); ++i)
      ladder_ok = ladder_ok && rough[i] <= rough[i - 1];

    const double elapsed = seconds_since(t0);
    const bool ok = gap_ol <= kPriorRestTol && gap_cc <= kPriorRestTol &&
                    gap_sp <= kPriorRestTol && ladder_ok &&
                    elapsed < kBudgetPriors;
    report("C8", "action priors rest on weighted means, slew damps", ok,
           fmt("rest gaps %.1e / %.1e / %.1e (tol %.0e); ladder %.2e -> %.2e; "
               "%.1fs",
               gap_ol, gap_cc, gap_sp, kPriorRestTol, rough.front(),
               rough.back(), elapsed));
  }
}

// --- C9: plant integrator ---------------------------------------------------

void criterion_integrator() {
  const auto t0 = std::chrono::steady_clock::now();
  const oracle::DampedOscillator osc{1.0, 1.0, 0.1, -0.5, -1.0};
  const MsdParams p;  // k1 = 1, k2 = 0.1, mass = 1

  PlantState s = PlantState::make(broadcast(-0.5, 1), broadcast(-1.0, 1));
  double worst = 0.0;
  const double dt = 1e-3;
  for (int k = 0; k < 10000; ++k) {
    s = msd_step(s, 0.0, dt, p);
    worst = std::max({worst, std::abs(s.q[0] - osc.position(s.t)),
                      std::abs(s.q_dot[0] - osc.velocity(s.t))});
  }

  // Halving dt must cut the end-point error by roughly 2^4.
  const double t_end = 6.0;
  std::vector<double> errs;
  for (const double h : {0.1, 0.05, 0.025}) {
    PlantState c = PlantState::make(broadcast(-0.5, 1), broadcast(-1.0, 1));
    const int steps = static_cast<int>(std::llround(t_end / h));
    for (int k = 0; k < steps; ++k) c = msd_step(c, 0.0, h, p);
    errs.push_back(std::abs(c.q[0] - osc.position(t_end)));
  }
  const double r1 = errs[0] / errs[1];
  const double r2 = errs[1] / errs[2];

  const double elapsed = seconds_since(t0);
  const bool ok = worst < kMsdTol && r1 > kOrderRatioMin &&
                  r2 > kOrderRatioMin && elapsed < kBudgetMsd;
  report("C9", "mass-spring integrator accuracy and order", ok,
         fmt("worst err %.2e over 10s (tol %.0e); halving ratios %.1f, %.1f "
             "(min %.0f); %.1fs",
             worst, kMsdTol, r1, r2, kOrderRatioMin, elapsed));
}

// --- C10: attractor strength orders the estimation bias --------------------

void criterion_attractor() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario base = reference_msd_estimation_scenario();
  const auto entries = tau_sweep(base, {0.0, 0.1, 1.0, 8.0});

  std::vector<double> goal_err;
  for (const auto& e : entries) {
    double acc = 0.0;
    for (std::size_t k = 0; k < e.episode.traj.ticks(); ++k)
      acc += std::abs(e.episode.traj.mu[k][0] - 0.5);
    goal_err.push_back(acc / static_cast<double>(e.episode.traj.ticks()));
  }
  double truth_acc = 0.0;
  for (std::size_t k = 0; k < entries[0].episode.traj.ticks(); ++k)
    truth_acc += std::abs(entries[0].episode.traj.mu[k][0] -
                          entries[0].episode.traj.q[k][0]);
  const double truth_err0 =
      truth_acc / static_cast<double>(entries[0].episode.traj.ticks());

  const double elapsed = seconds_since(t0);
  const bool ok = goal_err[1] > goal_err[2] && goal_err[2] > goal_err[3] &&
                  truth_err0 < goal_err[0] && elapsed < kBudgetTau;
  report("C10", "attractor strength orders the estimation bias", ok,
         fmt("goal err %.4f > %.4f > %.4f; pure estimator truth err %.4f < "
             "%.4f; %.1fs",
             goal_err[1], goal_err[2], goal_err[3], truth_err0, goal_err[0],
             elapsed));
}

}  // namespace

int main() {
  criterion_fixed_point();
  criterion_gradients();
  criterion_benchmark();
  criterion_pi_equivalence();
  criterion_variance_learning();
  criterion_action_priors();
  criterion_integrator();
  criterion_attractor();
  if (failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", failures);
  return 1;
}
