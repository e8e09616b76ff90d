#pragma once

#include <functional>
#include <utility>

#include "aictrl/free_energy.hpp"
#include "aictrl/types.hpp"

// Action-belief controller. Instead of biasing the state beliefs towards
// the goal, it keeps unbiased state estimates and carries a separate
// belief mu_u over the control signal, pulled towards a desired action
// f* shaped by PID gains on the believed state. Optional control priors
// (feed-forward, control cost, slew) reshape mu_u's stationary point.

namespace aictrl {

struct UaicConfig {
  double kappa_mu = 20.0;   // state-belief learning rate
  double kappa_u = 200.0;   // control-belief learning rate
  double dt = 1e-3;
  PidGains gains;
  double integral_limit = 1.0;  // clamp on the error integral, per joint
  double u_saturation = 50.0;
  PrecisionSet prec;
  ExtensionConfig extensions;

  // Keep the exact df*/dmu coupling in the state gradient. Off, state
  // estimation ignores the control factor entirely.
  bool fstar_state_coupling = true;

  // Replaces the default constant-velocity propagation of the previous
  // belief as the state prediction x_hat (stacked [pos; vel]).
  std::function<Vector(const GaussianBeliefState&, double)> predict_hook;

  void validate(Eigen::Index n) const {
    require(kappa_mu > 0.0, "kappa_mu must be positive");
    require(kappa_u > 0.0, "kappa_u must be positive");
    require(dt > 0.0, "dt must be positive");
    require(integral_limit > 0.0, "integral_limit must be positive");
    require(u_saturation > 0.0, "u_saturation must be positive");
    gains.validate(n);
    prec.validate_action_belief(n);
    validate_extensions(extensions, prec, n);
  }
};

struct UaicState {
  GaussianBeliefState belief;   // mu, mu_prime, mu_u
  Vector integral_accumulator;
  Vector u_prev;                // last emitted (clamped) action

  static UaicState from_observation(const Observation& obs) {
    const Eigen::Index n = obs.y.size();
    require(n > 0, "observation has no joints");
    require_dim(obs.y_prime, n, "y_prime");
    require_finite(obs.y, "y");
    require_finite(obs.y_prime, "y_prime");
    UaicState s;
    s.belief.mu = obs.y;
    s.belief.mu_prime = obs.y_prime;
    s.belief.mu_u = Vector::Zero(n);
    s.integral_accumulator = Vector::Zero(n);
    s.u_prev = Vector::Zero(n);
    return s;
  }

  // Same, but seeds mu_u at the desired action for the initial estimate.
  // Starting from zero instead would shove the state beliefs around through
  // the f*-state coupling until mu_u catches up.
  static UaicState from_observation(const Observation& obs,
                                    const GoalSpec& goal,
                                    const PidGains& gains) {
    UaicState s = from_observation(obs);
    s.belief.mu_u = desired_action(DesiredActionLaw{gains,
                                                    s.integral_accumulator},
                                   s.belief.mu, s.belief.mu_prime, goal);
    return s;
  }
};

// Constant-velocity propagation of a belief over one step:
// x_hat = [mu + mu' dt; mu'].
inline Vector predict_state(const GaussianBeliefState& belief, double dt) {
  const Eigen::Index n = belief.joints();
  require(n > 0, "belief has no joints");
  require_dim(belief.mu_prime, n, "mu_prime");
  require(dt > 0.0, "dt must be positive");
  Vector x_hat(2 * n);
  x_hat.head(n) = belief.mu + dt * belief.mu_prime;
  x_hat.tail(n) = belief.mu_prime;
  return x_hat;
}

// Desired action evaluated on the current beliefs with a frozen integral.
inline Vector f_star(const GaussianBeliefState& belief, const GoalSpec& goal,
                     const Vector& integral, const PidGains& gains) {
  return desired_action(DesiredActionLaw{gains, integral}, belief.mu,
                        belief.mu_prime, goal);
}

// One gradient step on the state beliefs. x_hat must come from the belief
// of the previous tick (see uaic_tick). mu_u is left untouched here.
inline UaicState uaic_estimate_step(UaicState state, const Observation& obs,
                                    const Vector& x_hat, const GoalSpec& goal,
                                    const UaicConfig& cfg,
                                    const SensorMap& gmap = {}) {
  const Eigen::Index n = state.belief.joints();
  cfg.validate(n);
  const DesiredActionLaw law{cfg.gains, state.integral_accumulator};
  const UaicGradient grad = grad_free_energy_uaic(
      state.belief, obs, x_hat, goal, cfg.prec, law, cfg.extensions,
      state.u_prev, cfg.fstar_state_coupling, gmap);
  state.belief.mu -= cfg.dt * cfg.kappa_mu * grad.d_mu;
  state.belief.mu_prime -= cfg.dt * cfg.kappa_mu * grad.d_mu_prime;
  for (Eigen::Index j = 0; j < n; ++j)
    if (!std::isfinite(state.belief.mu[j]) ||
        !std::isfinite(state.belief.mu_prime[j]))
      throw DivergenceError("uaic_estimate_step", static_cast<int>(j),
                            obs.timestamp);
  return state;
}

// Control half of the tick, in this order:
//   1. integral_accumulator += (mu_g - mu) dt, clamped to integral_limit;
//   2. mu_u <- mu_u - dt * kappa_u * dF/dmu_u with the updated integral;
//   3. emit u = clamp(mu_u, u_saturation) and remember it as u_prev.
// The clamp on the accumulator bounds the integral part of f* no matter
// how long the plant stays blocked.
inline std::pair<UaicState, Vector> uaic_control_step(UaicState state,
                                                      const GoalSpec& goal,
                                                      const UaicConfig& cfg,
                                                      double timestamp = 0.0) {
  const Eigen::Index n = state.belief.joints();
  cfg.validate(n);
  require_dim(goal.mu_g, n, "mu_g");
  require_dim(goal.mu_g_prime, n, "mu_g_prime");

  state.integral_accumulator = clamp_sym(
      state.integral_accumulator + cfg.dt * (goal.mu_g - state.belief.mu),
      cfg.integral_limit);

  const Vector fstar = f_star(state.belief, goal, state.integral_accumulator,
                              cfg.gains);
  Vector d_mu_u = (state.belief.mu_u - fstar).cwiseQuotient(cfg.prec.sigma_u);
  const ExtensionConfig& ext = cfg.extensions;
  if (ext.open_loop) {
    const Vector f_ol = ext.eval_f_ol(state.belief.mu, state.belief.mu_prime);
    require_dim(f_ol, n, "f_ol");
    d_mu_u += (state.belief.mu_u - f_ol).cwiseQuotient(cfg.prec.sigma_ol);
  }
  if (ext.control_cost)
    d_mu_u += state.belief.mu_u.cwiseQuotient(cfg.prec.sigma_cc);

  // The slew factor anchors mu_u to the previous emission. Between two
  // unsaturated ticks mu_u IS the previous emission, so an explicit term
  // evaluates to zero and does nothing; treating it implicitly instead
  // divides the whole update by (1 + dt kappa_u / sigma_p), which damps
  // increments and stays stable however tight sigma_p gets. The stationary
  // point is unchanged.
  const Vector step = cfg.dt * cfg.kappa_u * d_mu_u;
  if (ext.smoothing) {
    const Vector b =
        broadcast(cfg.dt * cfg.kappa_u, n).cwiseQuotient(cfg.prec.sigma_p);
    state.belief.mu_u =
        (state.belief.mu_u - step + b.cwiseProduct(state.u_prev))
            .cwiseQuotient(Vector::Ones(n) + b);
  } else {
    state.belief.mu_u -= step;
  }
  for (Eigen::Index j = 0; j < n; ++j)
    if (!std::isfinite(state.belief.mu_u[j]))
      throw DivergenceError("uaic_control_step", static_cast<int>(j),
                            timestamp);

  Vector u = clamp_sym(state.belief.mu_u, cfg.u_saturation);
  state.u_prev = u;
  return {std::move(state), std::move(u)};
}

// Full tick: predict from the previous belief, update state beliefs, then
// update the control belief and emit the action.
inline std::pair<UaicState, Vector> uaic_tick(UaicState state,
                                              const Observation& obs,
                                              const GoalSpec& goal,
                                              const UaicConfig& cfg,
                                              const SensorMap& gmap = {}) {
  const Vector x_hat = cfg.predict_hook
                           ? cfg.predict_hook(state.belief, cfg.dt)
                           : predict_state(state.belief, cfg.dt);
  require_dim(x_hat, 2 * state.belief.joints(), "x_hat");
  state = uaic_estimate_step(std::move(state), obs, x_hat, goal, cfg, gmap);
  return uaic_control_step(std::move(state), goal, cfg, obs.timestamp);
}

}  // namespace aictrl
