#pragma once

#include <functional>
#include <string>

#include "aictrl/types.hpp"

// Variational objectives for the two controller families, with analytic
// gradients and closed-form stationary points.
//
// Conventions shared by both objectives:
//  * All Gaussian factors are diagonal; variances come from PrecisionSet.
//  * The reported value includes the 0.5*log(sigma) normalisation terms.
//    They are constant in the beliefs, so belief gradients ignore them.
//  * Sensor predictions default to the identity map on beliefs. A custom
//    map can be supplied through SensorMap; only the identity map is
//    exercised by the test suite.

namespace aictrl {

// Optional observation model. When the handles are empty the prediction
// for y is mu itself and the Jacobian is one. g_jac returns the diagonal
// of dg/dmu evaluated at mu (channels are independent).
struct SensorMap {
  std::function<Vector(const Vector&)> g;
  std::function<Vector(const Vector&)> g_jac;
  std::function<Vector(const Vector&)> g_prime;
  std::function<Vector(const Vector&)> g_prime_jac;
};

// Desired-action shaping: a diagonal PID law evaluated on beliefs. The
// integral accumulator is owned by the controller and passed in frozen;
// evaluating the law never mutates it.
struct DesiredActionLaw {
  PidGains gains;
  Vector integral;
};

// f*(mu, mu') = Kp (mu_g - mu) + Ki * integral + Kd (mu_g' - mu').
inline Vector desired_action(const DesiredActionLaw& law, const Vector& mu,
                             const Vector& mu_prime, const GoalSpec& goal) {
  return law.gains.kp.cwiseProduct(goal.mu_g - mu) +
         law.gains.ki.cwiseProduct(law.integral) +
         law.gains.kd.cwiseProduct(goal.mu_g_prime - mu_prime);
}

// Optional control priors for the action-belief controller. Each one adds
// a Gaussian factor on mu_u; the variances live in PrecisionSet (sigma_ol,
// sigma_cc, sigma_p). The feed-forward signal f_ol is treated as exogenous:
// its dependence on the beliefs, if any, does not enter the gradients.
struct ExtensionConfig {
  bool open_loop = false;
  Vector open_loop_constant;
  std::function<Vector(const Vector& mu, const Vector& mu_prime)> f_ol;

  bool control_cost = false;

  // Penalises the distance between mu_u and the previously emitted action.
  bool smoothing = false;

  bool any() const { return open_loop || control_cost || smoothing; }

  Vector eval_f_ol(const Vector& mu, const Vector& mu_prime) const {
    if (f_ol) return f_ol(mu, mu_prime);
    return open_loop_constant;
  }
};

// Throws ConfigError if a prior is enabled without its variance (or, for
// the feed-forward prior, without a signal to follow).
inline void validate_extensions(const ExtensionConfig& ext,
                                const PrecisionSet& prec, Eigen::Index n) {
  if (ext.open_loop) {
    if (prec.sigma_ol.size() == 0)
      throw ConfigError("open_loop prior enabled but sigma_ol is not set");
    require_variance(prec.sigma_ol, n, "sigma_ol");
    if (!ext.f_ol && ext.open_loop_constant.size() != n)
      throw ConfigError(
          "open_loop prior enabled but no feed-forward signal is set");
  }
  if (ext.control_cost) {
    if (prec.sigma_cc.size() == 0)
      throw ConfigError("control_cost prior enabled but sigma_cc is not set");
    require_variance(prec.sigma_cc, n, "sigma_cc");
  }
  if (ext.smoothing) {
    if (prec.sigma_p.size() == 0)
      throw ConfigError("smoothing prior enabled but sigma_p is not set");
    require_variance(prec.sigma_p, n, "sigma_p");
  }
}

namespace detail {

inline double quad_term(const Vector& eps, const Vector& sigma) {
  return 0.5 * (eps.array().square() / sigma.array()).sum();
}

inline double log_term(const Vector& sigma) {
  return 0.5 * sigma.array().log().sum();
}

inline double sum_terms(const std::map<std::string, double>& terms) {
  double v = 0.0;
  for (const auto& [key, t] : terms) v += t;
  return v;
}

inline Vector predict_or_identity(
    const std::function<Vector(const Vector&)>& f, const Vector& v) {
  return f ? f(v) : v;
}

inline Vector jac_or_ones(const std::function<Vector(const Vector&)>& f,
                          const Vector& v) {
  return f ? f(v) : Vector::Ones(v.size());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generalised-coordinates objective (beliefs mu, mu', mu'').
//
//   F = 0.5 * sum_i [ eps_i' Sigma_i^-1 eps_i + log det Sigma_i ],
//       i in {y, y', mu, mu'}
//   eps_y   = y  - g(mu)
//   eps_y'  = y' - g'(mu')
//   eps_mu  = mu'  - (mu_g  - mu ) * tau_inv
//   eps_mu' = mu'' - (mu_g' - mu') * tau_inv
//
// The dynamic prior steers the belief trajectory towards the goal; with
// tau_inv = 0 it reduces to a constant-velocity prior and the objective
// describes a pure estimator.
// ---------------------------------------------------------------------------

inline FreeEnergyReport free_energy_aic(const GaussianBeliefState& belief,
                                        const Observation& obs,
                                        const GoalSpec& goal,
                                        const PrecisionSet& prec,
                                        const SensorMap& gmap = {}) {
  const Eigen::Index n = belief.joints();
  require(n > 0, "belief has no joints");
  require_dim(belief.mu_prime, n, "mu_prime");
  require_dim(belief.mu_double_prime, n, "mu_double_prime");
  require_dim(obs.y, n, "y");
  require_dim(obs.y_prime, n, "y_prime");
  require_dim(goal.mu_g, n, "mu_g");
  require_dim(goal.mu_g_prime, n, "mu_g_prime");
  require_finite(belief.mu, "mu");
  require_finite(belief.mu_prime, "mu_prime");
  require_finite(belief.mu_double_prime, "mu_double_prime");
  require_finite(obs.y, "y");
  require_finite(obs.y_prime, "y_prime");
  require(goal.tau_inv >= 0.0, "tau_inv must be non-negative");
  prec.validate_generalised(n);

  const double r = goal.tau_inv;
  const Vector eps_y = obs.y - detail::predict_or_identity(gmap.g, belief.mu);
  const Vector eps_yp =
      obs.y_prime - detail::predict_or_identity(gmap.g_prime, belief.mu_prime);
  const Vector eps_mu = belief.mu_prime - r * (goal.mu_g - belief.mu);
  const Vector eps_mup =
      belief.mu_double_prime - r * (goal.mu_g_prime - belief.mu_prime);

  FreeEnergyReport rep;
  rep.per_term = {
      {"quad_y", detail::quad_term(eps_y, prec.sigma_y)},
      {"quad_y_prime", detail::quad_term(eps_yp, prec.sigma_y_prime)},
      {"quad_mu", detail::quad_term(eps_mu, prec.sigma_mu)},
      {"quad_mu_prime", detail::quad_term(eps_mup, prec.sigma_mu_prime)},
      {"log_y", detail::log_term(prec.sigma_y)},
      {"log_y_prime", detail::log_term(prec.sigma_y_prime)},
      {"log_mu", detail::log_term(prec.sigma_mu)},
      {"log_mu_prime", detail::log_term(prec.sigma_mu_prime)},
  };
  rep.value = detail::sum_terms(rep.per_term);
  return rep;
}

struct AicGradient {
  Vector d_mu;
  Vector d_mu_prime;
  Vector d_mu_double_prime;
};

// Analytic gradient of free_energy_aic in the beliefs.
//
//   dF/dmu   = -J_g  Sigma_y^-1  eps_y  + tau_inv * Sigma_mu^-1 eps_mu
//   dF/dmu'  = -J_g' Sigma_y'^-1 eps_y' + Sigma_mu^-1 eps_mu
//              + tau_inv * Sigma_mu'^-1 eps_mu'
//   dF/dmu'' =  Sigma_mu'^-1 eps_mu'
inline AicGradient grad_free_energy_aic(const GaussianBeliefState& belief,
                                        const Observation& obs,
                                        const GoalSpec& goal,
                                        const PrecisionSet& prec,
                                        const SensorMap& gmap = {}) {
  const Eigen::Index n = belief.joints();
  require(n > 0, "belief has no joints");
  require_dim(belief.mu_prime, n, "mu_prime");
  require_dim(belief.mu_double_prime, n, "mu_double_prime");
  require_dim(obs.y, n, "y");
  require_dim(obs.y_prime, n, "y_prime");
  require_dim(goal.mu_g, n, "mu_g");
  require_dim(goal.mu_g_prime, n, "mu_g_prime");
  require(goal.tau_inv >= 0.0, "tau_inv must be non-negative");
  prec.validate_generalised(n);

  const double r = goal.tau_inv;
  const Vector eps_y = obs.y - detail::predict_or_identity(gmap.g, belief.mu);
  const Vector eps_yp =
      obs.y_prime - detail::predict_or_identity(gmap.g_prime, belief.mu_prime);
  const Vector eps_mu = belief.mu_prime - r * (goal.mu_g - belief.mu);
  const Vector eps_mup =
      belief.mu_double_prime - r * (goal.mu_g_prime - belief.mu_prime);

  const Vector w_y = eps_y.cwiseQuotient(prec.sigma_y);
  const Vector w_yp = eps_yp.cwiseQuotient(prec.sigma_y_prime);
  const Vector w_mu = eps_mu.cwiseQuotient(prec.sigma_mu);
  const Vector w_mup = eps_mup.cwiseQuotient(prec.sigma_mu_prime);
  const Vector jg = detail::jac_or_ones(gmap.g_jac, belief.mu);
  const Vector jgp = detail::jac_or_ones(gmap.g_prime_jac, belief.mu_prime);

  AicGradient grad;
  grad.d_mu = -jg.cwiseProduct(w_y) + r * w_mu;
  grad.d_mu_prime = -jgp.cwiseProduct(w_yp) + w_mu + r * w_mup;
  grad.d_mu_double_prime = w_mup;
  return grad;
}

// Stationary point of dF/dmu with mu' held fixed:
//
//   mu = (sigma_mu y + tau_inv^2 sigma_y mu_g - tau_inv sigma_y mu')
//        / (sigma_mu + tau_inv^2 sigma_y)
//
// With tau_inv = 1 this is the precision-weighted average of the sensor
// reading and the goal, shifted by the velocity belief; the balance of
// sigma_y against sigma_mu sets how far the converged belief is biased
// away from the measurement towards the goal.
inline Vector aic_fixed_point(const Vector& y, const Vector& mu_prime,
                              const GoalSpec& goal, const PrecisionSet& prec) {
  const Eigen::Index n = y.size();
  require(n > 0, "y has no joints");
  require_dim(mu_prime, n, "mu_prime");
  require_dim(goal.mu_g, n, "mu_g");
  require_finite(y, "y");
  require_finite(mu_prime, "mu_prime");
  require(goal.tau_inv >= 0.0, "tau_inv must be non-negative");
  require_variance(prec.sigma_y, n, "sigma_y");
  require_variance(prec.sigma_mu, n, "sigma_mu");

  const double r = goal.tau_inv;
  const Vector num = prec.sigma_mu.cwiseProduct(y) +
                     r * r * prec.sigma_y.cwiseProduct(goal.mu_g) -
                     r * prec.sigma_y.cwiseProduct(mu_prime);
  const Vector den = prec.sigma_mu + r * r * prec.sigma_y;
  return num.cwiseQuotient(den);
}

// ---------------------------------------------------------------------------
// Action-belief objective (beliefs mu, mu', mu_u).
//
//   F = 0.5 [ eps_y' Sigma_y^-1 eps_y + eps_x' Sigma_x^-1 eps_x
//           + eps_u' Sigma_u^-1 eps_u + log det (Sigma_u Sigma_y Sigma_x) ]
//   eps_y = [y; y'] - [mu; mu']
//   eps_x = [mu; mu'] - x_hat          (x_hat: propagated state prediction)
//   eps_u = mu_u - f*(mu, mu')
//
// sigma_x holds one variance per joint, shared by the position and
// velocity components of the state prediction. The goal enters only
// through f*, so the state beliefs remain unbiased estimates.
// ---------------------------------------------------------------------------

inline FreeEnergyReport free_energy_uaic(const GaussianBeliefState& belief,
                                         const Observation& obs,
                                         const Vector& x_hat,
                                         const GoalSpec& goal,
                                         const PrecisionSet& prec,
                                         const DesiredActionLaw& law,
                                         const ExtensionConfig& ext = {},
                                         const Vector& u_prev = Vector(),
                                         const SensorMap& gmap = {}) {
  const Eigen::Index n = belief.joints();
  require(n > 0, "belief has no joints");
  require_dim(belief.mu_prime, n, "mu_prime");
  require_dim(belief.mu_u, n, "mu_u");
  require_dim(obs.y, n, "y");
  require_dim(obs.y_prime, n, "y_prime");
  require_dim(x_hat, 2 * n, "x_hat");
  require_dim(goal.mu_g, n, "mu_g");
  require_dim(goal.mu_g_prime, n, "mu_g_prime");
  require_dim(law.integral, n, "integral");
  law.gains.validate(n);
  prec.validate_action_belief(n);
  validate_extensions(ext, prec, n);
  if (ext.smoothing) require_dim(u_prev, n, "u_prev");

  const Vector eps_y = obs.y - detail::predict_or_identity(gmap.g, belief.mu);
  const Vector eps_yp =
      obs.y_prime - detail::predict_or_identity(gmap.g_prime, belief.mu_prime);
  const Vector eps_x = belief.mu - x_hat.head(n);
  const Vector eps_xp = belief.mu_prime - x_hat.tail(n);
  const Vector fstar = desired_action(law, belief.mu, belief.mu_prime, goal);
  const Vector eps_u = belief.mu_u - fstar;

  FreeEnergyReport rep;
  rep.per_term = {
      {"quad_y", detail::quad_term(eps_y, prec.sigma_y)},
      {"quad_y_prime", detail::quad_term(eps_yp, prec.sigma_y_prime)},
      {"quad_x", detail::quad_term(eps_x, prec.sigma_x)},
      {"quad_x_prime", detail::quad_term(eps_xp, prec.sigma_x)},
      {"quad_u", detail::quad_term(eps_u, prec.sigma_u)},
      {"log_y", detail::log_term(prec.sigma_y)},
      {"log_y_prime", detail::log_term(prec.sigma_y_prime)},
      {"log_x", 2.0 * detail::log_term(prec.sigma_x)},
      {"log_u", detail::log_term(prec.sigma_u)},
  };
  if (ext.open_loop) {
    const Vector f_ol = ext.eval_f_ol(belief.mu, belief.mu_prime);
    require_dim(f_ol, n, "f_ol");
    rep.per_term["quad_open_loop"] =
        detail::quad_term(belief.mu_u - f_ol, prec.sigma_ol);
    rep.per_term["log_open_loop"] = detail::log_term(prec.sigma_ol);
  }
  if (ext.control_cost) {
    rep.per_term["quad_control_cost"] =
        detail::quad_term(belief.mu_u, prec.sigma_cc);
    rep.per_term["log_control_cost"] = detail::log_term(prec.sigma_cc);
  }
  if (ext.smoothing) {
    rep.per_term["quad_smoothing"] =
        detail::quad_term(belief.mu_u - u_prev, prec.sigma_p);
    rep.per_term["log_smoothing"] = detail::log_term(prec.sigma_p);
  }
  rep.value = detail::sum_terms(rep.per_term);
  return rep;
}

struct UaicGradient {
  Vector d_mu;
  Vector d_mu_prime;
  Vector d_mu_u;
};

// Analytic gradient of free_energy_uaic in the beliefs.
//
// f* is affine in (mu, mu'), so the control factor couples back into the
// state gradients through the constant Jacobians df*/dmu = -Kp and
// df*/dmu' = -Kd. `fstar_state_coupling` keeps or drops that coupling;
// dropping it recovers the variant where state estimation ignores the
// control factor. The feed-forward signal contributes no such coupling.
inline UaicGradient grad_free_energy_uaic(
    const GaussianBeliefState& belief, const Observation& obs,
    const Vector& x_hat, const GoalSpec& goal, const PrecisionSet& prec,
    const DesiredActionLaw& law, const ExtensionConfig& ext = {},
    const Vector& u_prev = Vector(), bool fstar_state_coupling = true,
    const SensorMap& gmap = {}) {
  const Eigen::Index n = belief.joints();
  require(n > 0, "belief has no joints");
  require_dim(belief.mu_prime, n, "mu_prime");
  require_dim(belief.mu_u, n, "mu_u");
  require_dim(obs.y, n, "y");
  require_dim(obs.y_prime, n, "y_prime");
  require_dim(x_hat, 2 * n, "x_hat");
  require_dim(goal.mu_g, n, "mu_g");
  require_dim(goal.mu_g_prime, n, "mu_g_prime");
  require_dim(law.integral, n, "integral");
  law.gains.validate(n);
  prec.validate_action_belief(n);
  validate_extensions(ext, prec, n);
  if (ext.smoothing) require_dim(u_prev, n, "u_prev");

  const Vector eps_y = obs.y - detail::predict_or_identity(gmap.g, belief.mu);
  const Vector eps_yp =
      obs.y_prime - detail::predict_or_identity(gmap.g_prime, belief.mu_prime);
  const Vector eps_x = belief.mu - x_hat.head(n);
  const Vector eps_xp = belief.mu_prime - x_hat.tail(n);
  const Vector fstar = desired_action(law, belief.mu, belief.mu_prime, goal);
  const Vector eps_u = belief.mu_u - fstar;

  const Vector w_y = eps_y.cwiseQuotient(prec.sigma_y);
  const Vector w_yp = eps_yp.cwiseQuotient(prec.sigma_y_prime);
  const Vector w_x = eps_x.cwiseQuotient(prec.sigma_x);
  const Vector w_xp = eps_xp.cwiseQuotient(prec.sigma_x);
  const Vector w_u = eps_u.cwiseQuotient(prec.sigma_u);
  const Vector jg = detail::jac_or_ones(gmap.g_jac, belief.mu);
  const Vector jgp = detail::jac_or_ones(gmap.g_prime_jac, belief.mu_prime);

  UaicGradient grad;
  grad.d_mu = -jg.cwiseProduct(w_y) + w_x;
  grad.d_mu_prime = -jgp.cwiseProduct(w_yp) + w_xp;
  if (fstar_state_coupling) {
    grad.d_mu += law.gains.kp.cwiseProduct(w_u);
    grad.d_mu_prime += law.gains.kd.cwiseProduct(w_u);
  }
  grad.d_mu_u = w_u;
  if (ext.open_loop) {
    const Vector f_ol = ext.eval_f_ol(belief.mu, belief.mu_prime);
    require_dim(f_ol, n, "f_ol");
    grad.d_mu_u += (belief.mu_u - f_ol).cwiseQuotient(prec.sigma_ol);
  }
  if (ext.control_cost) {
    grad.d_mu_u += belief.mu_u.cwiseQuotient(prec.sigma_cc);
  }
  if (ext.smoothing) {
    grad.d_mu_u += (belief.mu_u - u_prev).cwiseQuotient(prec.sigma_p);
  }
  return grad;
}

struct UaicFixedPoint {
  Vector mu;
  Vector mu_prime;
  Vector mu_u;
};

// Stationary point of the action-belief objective without optional priors
// and without the f* coupling in the state gradients:
//
//   mu   = (sigma_x y  + sigma_y  x_hat_pos) / (sigma_x + sigma_y)
//   mu'  = (sigma_x y' + sigma_y' x_hat_vel) / (sigma_x + sigma_y')
//   mu_u = f*(mu, mu')
//
// Each state belief is a convex combination of measurement and prediction,
// so it always lies between the two.
inline UaicFixedPoint uaic_fixed_point(const Observation& obs,
                                       const Vector& x_hat,
                                       const GoalSpec& goal,
                                       const PrecisionSet& prec,
                                       const DesiredActionLaw& law) {
  const Eigen::Index n = obs.y.size();
  require(n > 0, "y has no joints");
  require_dim(obs.y_prime, n, "y_prime");
  require_dim(x_hat, 2 * n, "x_hat");
  require_dim(goal.mu_g, n, "mu_g");
  require_dim(goal.mu_g_prime, n, "mu_g_prime");
  require_dim(law.integral, n, "integral");
  law.gains.validate(n);
  prec.validate_action_belief(n);

  UaicFixedPoint fp;
  fp.mu = (prec.sigma_x.cwiseProduct(obs.y) +
           prec.sigma_y.cwiseProduct(x_hat.head(n)))
              .cwiseQuotient(prec.sigma_x + prec.sigma_y);
  fp.mu_prime = (prec.sigma_x.cwiseProduct(obs.y_prime) +
                 prec.sigma_y_prime.cwiseProduct(x_hat.tail(n)))
                    .cwiseQuotient(prec.sigma_x + prec.sigma_y_prime);
  fp.mu_u = desired_action(law, fp.mu, fp.mu_prime, goal);
  return fp;
}

}  // namespace aictrl
