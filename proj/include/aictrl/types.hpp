#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace aictrl {

using Vector = Eigen::VectorXd;

// Floor applied to every variance, including learned ones. Keeps all
// precision weights finite.
inline constexpr double kSigmaMin = 1e-6;

// An input violated a documented precondition (dimension mismatch,
// non-finite entry, non-positive variance, bad gain).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A run configuration is structurally invalid. Raised before any
// simulation state is created.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A belief or action update produced a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& where, int joint, double time)
      : std::runtime_error(where + ": non-finite value at joint " +
                           std::to_string(joint) + ", t=" +
                           std::to_string(time) + " s"),
        joint_(joint),
        time_(time) {}

  int joint() const noexcept { return joint_; }
  double time() const noexcept { return time_; }

 private:
  int joint_;
  double time_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

inline void require_finite(const Vector& v, const std::string& name) {
  if (!v.allFinite())
    throw ContractViolation(name + " contains a non-finite entry");
}

inline void require_dim(const Vector& v, Eigen::Index n,
                        const std::string& name) {
  if (v.size() != n)
    throw ContractViolation(name + " has dimension " +
                            std::to_string(v.size()) + ", expected " +
                            std::to_string(n));
}

// Strictly positive variance vector, floored entries allowed down to
// kSigmaMin.
inline void require_variance(const Vector& v, Eigen::Index n,
                             const std::string& name) {
  require_dim(v, n, name);
  require_finite(v, name);
  for (Eigen::Index i = 0; i < n; ++i)
    if (v[i] < kSigmaMin)
      throw ContractViolation(name + "[" + std::to_string(i) +
                              "] is below the minimum variance");
}

inline Vector broadcast(double value, Eigen::Index n) {
  return Vector::Constant(n, value);
}

// Elementwise clamp to [-bound, bound].
inline Vector clamp_sym(const Vector& v, double bound) {
  return v.cwiseMin(bound).cwiseMax(-bound);
}

// Joint-space belief. mu/mu_prime are always populated. The second-order
// belief mu_double_prime is used by the generalised-coordinates controller;
// mu_u is the control belief of the action-belief controller. Unused fields
// stay empty.
struct GaussianBeliefState {
  Vector mu;
  Vector mu_prime;
  Vector mu_double_prime;
  Vector mu_u;

  Eigen::Index joints() const { return mu.size(); }
};

// One sensor sample: joint positions and velocities read at `timestamp`.
struct Observation {
  Vector y;
  Vector y_prime;
  double timestamp = 0.0;
};

// Target the controller regulates towards. tau_inv is the inverse time
// constant of the first-order attractor pulling beliefs to the target;
// tau_inv = 0 turns the controller into a pure state estimator.
struct GoalSpec {
  Vector mu_g;
  Vector mu_g_prime;
  double tau_inv = 1.0;
};

// Diagonal variances for every Gaussian factor in play. Variances are
// stored, precisions are formed where needed. sigma_ol / sigma_cc /
// sigma_p belong to the optional control priors and stay empty unless the
// matching prior is enabled.
struct PrecisionSet {
  Vector sigma_y;         // position sensor
  Vector sigma_y_prime;   // velocity sensor
  Vector sigma_mu;        // first-order state prior (generalised controller)
  Vector sigma_mu_prime;  // second-order state prior
  Vector sigma_x;         // state-prediction prior (action-belief controller)
  Vector sigma_u;         // control prior around the desired action
  Vector sigma_ol;        // feed-forward control prior
  Vector sigma_cc;        // control-cost prior
  Vector sigma_p;         // slew prior on consecutive actions

  static PrecisionSet for_generalised(Eigen::Index n, double sy, double syp,
                                      double smu, double smup) {
    PrecisionSet p;
    p.sigma_y = broadcast(sy, n);
    p.sigma_y_prime = broadcast(syp, n);
    p.sigma_mu = broadcast(smu, n);
    p.sigma_mu_prime = broadcast(smup, n);
    return p;
  }

  static PrecisionSet for_action_belief(Eigen::Index n, double sy, double syp,
                                        double sx, double su) {
    PrecisionSet p;
    p.sigma_y = broadcast(sy, n);
    p.sigma_y_prime = broadcast(syp, n);
    p.sigma_x = broadcast(sx, n);
    p.sigma_u = broadcast(su, n);
    return p;
  }

  void validate_generalised(Eigen::Index n) const {
    require_variance(sigma_y, n, "sigma_y");
    require_variance(sigma_y_prime, n, "sigma_y_prime");
    require_variance(sigma_mu, n, "sigma_mu");
    require_variance(sigma_mu_prime, n, "sigma_mu_prime");
  }

  void validate_action_belief(Eigen::Index n) const {
    require_variance(sigma_y, n, "sigma_y");
    require_variance(sigma_y_prime, n, "sigma_y_prime");
    require_variance(sigma_x, n, "sigma_x");
    require_variance(sigma_u, n, "sigma_u");
  }
};

// Value of the objective plus a named breakdown. The breakdown keys are
// stable; the value equals the sum of the terms.
struct FreeEnergyReport {
  double value = 0.0;
  std::map<std::string, double> per_term;

  double term(const std::string& key) const {
    auto it = per_term.find(key);
    return it == per_term.end() ? 0.0 : it->second;
  }
};

// Diagonal PID gains used to shape the desired action.
struct PidGains {
  Vector kp;
  Vector ki;
  Vector kd;

  static PidGains uniform(Eigen::Index n, double kp_, double ki_, double kd_) {
    return PidGains{broadcast(kp_, n), broadcast(ki_, n), broadcast(kd_, n)};
  }

  void validate(Eigen::Index n) const {
    require_dim(kp, n, "kp");
    require_dim(ki, n, "ki");
    require_dim(kd, n, "kd");
    require_finite(kp, "kp");
    require_finite(ki, "ki");
    require_finite(kd, "kd");
    require((kp.array() >= 0).all() && (ki.array() >= 0).all() &&
                (kd.array() >= 0).all(),
            "PID gains must be non-negative");
  }
};

}  // namespace aictrl
