#pragma once

#include <optional>
#include <vector>

#include "aictrl/rng.hpp"
#include "aictrl/types.hpp"

// Simulated plants, sensors and collision scripting. All plants integrate
// with classical RK4 at the caller's step size. A blocked joint is held
// absolutely: position frozen, velocity zero, no control moves it.

namespace aictrl {

struct PlantState {
  Vector q;
  Vector q_dot;
  double t = 0.0;
  std::vector<bool> blocked;  // per joint; empty means all free

  Eigen::Index joints() const { return q.size(); }

  bool is_blocked(Eigen::Index j) const {
    return j < static_cast<Eigen::Index>(blocked.size()) && blocked[j];
  }

  bool any_blocked() const {
    for (bool b : blocked)
      if (b) return true;
    return false;
  }

  static PlantState make(Vector q0, Vector qdot0) {
    require(q0.size() > 0, "plant has no joints");
    require_dim(qdot0, q0.size(), "q_dot");
    require_finite(q0, "q");
    require_finite(qdot0, "q_dot");
    PlantState s;
    s.q = std::move(q0);
    s.q_dot = std::move(qdot0);
    s.blocked.assign(static_cast<std::size_t>(s.q.size()), false);
    return s;
  }
};

namespace detail {

// One RK4 step of y' = f(y) in place.
template <typename Deriv>
inline void rk4_step(Vector& y, double dt, Deriv&& f) {
  const Vector k1 = f(y);
  const Vector k2 = f(Vector(y + 0.5 * dt * k1));
  const Vector k3 = f(Vector(y + 0.5 * dt * k2));
  const Vector k4 = f(Vector(y + dt * k3));
  y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void hold_blocked(PlantState& next, const PlantState& prev) {
  for (Eigen::Index j = 0; j < next.joints(); ++j) {
    if (prev.is_blocked(j)) {
      next.q[j] = prev.q[j];
      next.q_dot[j] = 0.0;
    }
  }
}

}  // namespace detail

// Mass-spring-damper: m x'' = a - k1 x - k2 x'.
struct MsdParams {
  double k1 = 1.0;
  double k2 = 0.1;
  double mass = 1.0;
};

inline PlantState msd_step(const PlantState& state, double a, double dt,
                           const MsdParams& p = {}) {
  require(state.joints() == 1, "msd plant has exactly one coordinate");
  require(dt > 0.0, "dt must be positive");
  require(p.mass > 0.0, "mass must be positive");
  PlantState next = state;
  if (!state.is_blocked(0)) {
    Vector z(2);
    z << state.q[0], state.q_dot[0];
    detail::rk4_step(z, dt, [&](const Vector& s) {
      Vector d(2);
      d << s[1], (a - p.k1 * s[0] - p.k2 * s[1]) / p.mass;
      return d;
    });
    next.q[0] = z[0];
    next.q_dot[0] = z[1];
  }
  detail::hold_blocked(next, state);
  next.t = state.t + dt;
  return next;
}

// Default arm model: independent joints with unit inertia and viscous
// friction, q'' = u - b q'.
struct ArmParams {
  double damping = 0.5;
};

inline PlantState arm_step(const PlantState& state, const Vector& u, double dt,
                           const ArmParams& p = {}) {
  const Eigen::Index n = state.joints();
  require(n > 0, "plant has no joints");
  require_dim(u, n, "u");
  require_finite(u, "u");
  require(dt > 0.0, "dt must be positive");
  require(p.damping >= 0.0, "damping must be non-negative");
  PlantState next = state;
  Vector z(2 * n);
  z.head(n) = state.q;
  z.tail(n) = state.q_dot;
  detail::rk4_step(z, dt, [&](const Vector& s) {
    Vector d(2 * n);
    d.head(n) = s.tail(n);
    d.tail(n) = u - p.damping * s.tail(n);
    return d;
  });
  next.q = z.head(n);
  next.q_dot = z.tail(n);
  detail::hold_blocked(next, state);
  next.t = state.t + dt;
  return next;
}

// Optional higher-fidelity model: planar two-link arm with coupled
// inertia, Coriolis terms and viscous friction, moving in a horizontal
// plane (no gravity). Parameters are nominal values for a small arm, not
// calibrated against any particular hardware.
struct TwoLinkParams {
  double m1 = 2.0, m2 = 1.0;    // link masses, kg
  double l1 = 0.4, l2 = 0.3;    // link lengths, m
  double lc1 = 0.2, lc2 = 0.15; // centre-of-mass offsets, m
  double i1 = 0.03, i2 = 0.01;  // link inertias about the joints, kg m^2
  double damping = 0.5;
};

inline PlantState two_link_step(const PlantState& state, const Vector& u,
                                double dt, const TwoLinkParams& p = {}) {
  require(state.joints() == 2, "two-link plant has exactly two joints");
  require_dim(u, 2, "u");
  require_finite(u, "u");
  require(dt > 0.0, "dt must be positive");
  const double a1 = p.i1 + p.i2 + p.m1 * p.lc1 * p.lc1 +
                    p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2);
  const double a2 = p.m2 * p.l1 * p.lc2;
  const double a3 = p.i2 + p.m2 * p.lc2 * p.lc2;

  PlantState next = state;
  Vector z(4);
  z << state.q[0], state.q[1], state.q_dot[0], state.q_dot[1];
  detail::rk4_step(z, dt, [&](const Vector& s) {
    const double c2 = std::cos(s[1]);
    const double s2 = std::sin(s[1]);
    Eigen::Matrix2d M;
    M << a1 + 2.0 * a2 * c2, a3 + a2 * c2, a3 + a2 * c2, a3;
    const double h = -a2 * s2;
    Eigen::Vector2d qd(s[2], s[3]);
    Eigen::Vector2d coriolis(h * qd[1] * (2.0 * qd[0] + qd[1]),
                             -h * qd[0] * qd[0]);
    Eigen::Vector2d rhs = Eigen::Vector2d(u[0], u[1]) - coriolis -
                          p.damping * qd;
    Eigen::Vector2d qdd = M.ldlt().solve(rhs);
    Vector d(4);
    d << s[2], s[3], qdd[0], qdd[1];
    return d;
  });
  next.q << z[0], z[1];
  next.q_dot << z[2], z[3];
  detail::hold_blocked(next, state);
  next.t = state.t + dt;
  return next;
}

// Additive Gaussian sensor noise. The sampler is part of the model so a
// copy carries its stream position; identical seeds reproduce identical
// noise streams.
struct SensorModel {
  double noise_std_pos = 0.0;
  double noise_std_vel = 0.0;
  GaussianSampler rng;

  SensorModel(double std_pos, double std_vel, std::uint64_t seed)
      : noise_std_pos(std_pos), noise_std_vel(std_vel), rng(seed) {
    require(std_pos >= 0.0 && std_vel >= 0.0,
            "noise standard deviations must be non-negative");
  }
};

// Reads the plant through the sensor model. One normal draw per joint and
// channel regardless of the noise level, so the stream position depends
// only on the number of reads.
inline Observation sense(const PlantState& state, SensorModel& sensors) {
  const Eigen::Index n = state.joints();
  Observation obs;
  obs.y = state.q;
  obs.y_prime = state.q_dot;
  obs.timestamp = state.t;
  for (Eigen::Index j = 0; j < n; ++j)
    obs.y[j] += sensors.noise_std_pos * sensors.rng.normal();
  for (Eigen::Index j = 0; j < n; ++j)
    obs.y_prime[j] += sensors.noise_std_vel * sensors.rng.normal();
  return obs;
}

// Scripted blocking collision over [start_time, start_time + duration).
// While active every joint is blocked; hold_positions, when given,
// overrides where the joints are pinned.
struct CollisionScript {
  double start_time = 0.0;
  double duration = 0.0;
  std::optional<Vector> hold_positions;

  bool active_at(double t) const {
    return duration > 0.0 && t >= start_time && t < start_time + duration;
  }
};

// Applies the script at the state's current time. Outside the window the
// state comes back with all joints free; inside, blocked with zero
// velocity. Idempotent at any fixed time.
inline PlantState apply_collision(const PlantState& state,
                                  const CollisionScript& script) {
  PlantState next = state;
  const bool active = script.active_at(state.t);
  next.blocked.assign(static_cast<std::size_t>(state.joints()), active);
  if (active) {
    if (script.hold_positions) {
      require_dim(*script.hold_positions, state.joints(), "hold_positions");
      next.q = *script.hold_positions;
    }
    next.q_dot.setZero();
  }
  return next;
}

}  // namespace aictrl
