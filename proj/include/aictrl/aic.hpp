#pragma once

#include <string>
#include <utility>

#include "aictrl/free_energy.hpp"
#include "aictrl/types.hpp"

// Generalised-coordinates controller. Beliefs over position, velocity and
// acceleration descend the free-energy gradient along a shift flow; the
// action descends the sensory part of the same objective. Because the
// dynamic prior pulls the position belief towards the goal, the action,
// which drives the sensors towards the beliefs, moves the plant there.

namespace aictrl {

struct AicConfig {
  double kappa_mu = 10.0;   // belief learning rate
  double kappa_a = 1.0;     // action learning rate
  double dt = 1e-3;         // integration step, seconds
  double u_saturation = 50.0;

  bool precision_learning_enabled = false;
  double kappa_sigma = 0.0;            // variance learning rate
  bool learn_velocity_precision = false;

  void validate() const {
    require(kappa_mu > 0.0, "kappa_mu must be positive");
    require(kappa_a >= 0.0, "kappa_a must be non-negative");
    require(dt > 0.0, "dt must be positive");
    require(u_saturation > 0.0, "u_saturation must be positive");
    if (precision_learning_enabled)
      require(kappa_sigma > 0.0,
              "kappa_sigma must be positive when precision learning is on");
  }
};

// Belief state, current action and the variances, which are part of the
// mutable state because precision learning updates sigma_y in place.
struct AicState {
  GaussianBeliefState belief;
  Vector u;
  PrecisionSet prec;

  // Beliefs start on the first sensor reading with zero acceleration,
  // so the first estimate step sees no sensory surprise.
  static AicState from_observation(const Observation& obs, PrecisionSet prec) {
    const Eigen::Index n = obs.y.size();
    require(n > 0, "observation has no joints");
    require_dim(obs.y_prime, n, "y_prime");
    require_finite(obs.y, "y");
    require_finite(obs.y_prime, "y_prime");
    prec.validate_generalised(n);
    AicState s;
    s.belief.mu = obs.y;
    s.belief.mu_prime = obs.y_prime;
    s.belief.mu_double_prime = Vector::Zero(n);
    s.u = Vector::Zero(n);
    s.prec = std::move(prec);
    return s;
  }
};

namespace detail {

inline void check_belief_finite(const GaussianBeliefState& b,
                                const std::string& where, double time) {
  for (Eigen::Index j = 0; j < b.joints(); ++j) {
    const bool ok = std::isfinite(b.mu[j]) && std::isfinite(b.mu_prime[j]) &&
                    (b.mu_double_prime.size() == 0 ||
                     std::isfinite(b.mu_double_prime[j]));
    if (!ok) throw DivergenceError(where, static_cast<int>(j), time);
  }
}

}  // namespace detail

// One Euler step of the belief flow
//
//   mu~ <- mu~ + dt * (D mu~ - kappa_mu * dF/dmu~)
//
// where D shifts orders: D mu = mu', D mu' = mu'', D mu'' = 0. At a
// stationary gradient with mu' = mu'' = 0 the belief does not move.
inline AicState aic_estimate_step(AicState state, const Observation& obs,
                                  const GoalSpec& goal, const AicConfig& cfg,
                                  const SensorMap& gmap = {}) {
  cfg.validate();
  const AicGradient grad =
      grad_free_energy_aic(state.belief, obs, goal, state.prec, gmap);
  GaussianBeliefState& b = state.belief;
  const Vector mu_next = b.mu + cfg.dt * (b.mu_prime - cfg.kappa_mu * grad.d_mu);
  const Vector mup_next =
      b.mu_prime +
      cfg.dt * (b.mu_double_prime - cfg.kappa_mu * grad.d_mu_prime);
  const Vector mupp_next =
      b.mu_double_prime - cfg.dt * cfg.kappa_mu * grad.d_mu_double_prime;
  b.mu = mu_next;
  b.mu_prime = mup_next;
  b.mu_double_prime = mupp_next;
  detail::check_belief_finite(b, "aic_estimate_step", obs.timestamp);
  return state;
}

// One Euler step of the action flow. Only the sensory prediction errors
// depend on the action (through the plant), so
//
//   u <- clamp(u - dt * kappa_a * (Sigma_y^-1 (y - mu)
//                                  + Sigma_y'^-1 (y' - mu')), u_saturation)
//
// Call after the estimate step for the same tick.
inline AicState aic_control_step(AicState state, const Observation& obs,
                                 const AicConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = state.belief.joints();
  require_dim(obs.y, n, "y");
  require_dim(obs.y_prime, n, "y_prime");
  const Vector drive =
      (obs.y - state.belief.mu).cwiseQuotient(state.prec.sigma_y) +
      (obs.y_prime - state.belief.mu_prime)
          .cwiseQuotient(state.prec.sigma_y_prime);
  state.u = clamp_sym(state.u - cfg.dt * cfg.kappa_a * drive, cfg.u_saturation);
  for (Eigen::Index j = 0; j < n; ++j)
    if (!std::isfinite(state.u[j]))
      throw DivergenceError("aic_control_step", static_cast<int>(j),
                            obs.timestamp);
  return state;
}

// Gradient step on the position-sensor variance,
//
//   dF/dsigma_y = -(y - mu)^2 / (2 sigma_y^2) + 1 / (2 sigma_y)
//   sigma_y <- max(sigma_y - dt * kappa_sigma * dF/dsigma_y, kSigmaMin)
//
// The stationary point is sigma_y = (y - mu)^2, so under persistent
// residuals the variance tracks the mean squared residual. The same rule
// applies to sigma_y_prime when learn_velocity_precision is set.
inline AicState precision_learning_step(AicState state, const Observation& obs,
                                        const AicConfig& cfg) {
  cfg.validate();
  require(cfg.precision_learning_enabled,
          "precision_learning_step requires precision_learning_enabled");
  const Eigen::Index n = state.belief.joints();
  require_dim(obs.y, n, "y");

  auto update = [&](Vector& sigma, const Vector& eps) {
    const Vector d = -eps.array().square().matrix().cwiseQuotient(
                         2.0 * sigma.cwiseProduct(sigma)) +
                     sigma.cwiseInverse() * 0.5;
    sigma = (sigma - cfg.dt * cfg.kappa_sigma * d).cwiseMax(kSigmaMin);
  };
  update(state.prec.sigma_y, Vector(obs.y - state.belief.mu));
  if (cfg.learn_velocity_precision) {
    require_dim(obs.y_prime, n, "y_prime");
    update(state.prec.sigma_y_prime,
           Vector(obs.y_prime - state.belief.mu_prime));
  }
  return state;
}

// Full controller tick: estimate, act, then adapt precisions if enabled.
// Returns the new state and the action to apply to the plant.
inline std::pair<AicState, Vector> aic_tick(AicState state,
                                            const Observation& obs,
                                            const GoalSpec& goal,
                                            const AicConfig& cfg,
                                            const SensorMap& gmap = {}) {
  state = aic_estimate_step(std::move(state), obs, goal, cfg, gmap);
  state = aic_control_step(std::move(state), obs, cfg);
  if (cfg.precision_learning_enabled)
    state = precision_learning_step(std::move(state), obs, cfg);
  Vector u = state.u;
  return {std::move(state), std::move(u)};
}

}  // namespace aictrl
