#pragma once

#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aictrl/harness.hpp"
#include "aictrl/types.hpp"

// JSON run configuration. The dialect is JSON with // and /* */ comments.
// Unknown keys are rejected everywhere, so typos fail loudly instead of
// silently falling back to defaults. Error messages carry the JSON path
// of the offending key. dump_effective_config materialises every default;
// feeding the dump back reproduces the same runs.

namespace aictrl {

struct BatchConfig {
  int trials = 100;
  BatchRandomization randomization;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir;  // empty means not set
  std::vector<Scenario> scenarios;
  BatchConfig batch;
};

namespace cfg {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config error at " + (path.empty() ? "$" : path) + ": " +
                    msg);
}

inline void check_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        known = true;
        break;
      }
    if (!known) fail(path, "unknown key \"" + it.key() + "\"");
  }
}

inline const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& path, const char* key,
                     std::optional<double> def = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    fail(path, std::string("missing key \"") + key + "\"");
  }
  if (!v->is_number()) fail(path + "." + key, "expected a number");
  return v->get<double>();
}

inline int integer(const json& j, const std::string& path, const char* key,
                   std::optional<int> def = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    fail(path, std::string("missing key \"") + key + "\"");
  }
  if (!v->is_number_integer()) fail(path + "." + key, "expected an integer");
  return v->get<int>();
}

inline std::uint64_t uinteger(const json& j, const std::string& path,
                              const char* key,
                              std::optional<std::uint64_t> def = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    fail(path, std::string("missing key \"") + key + "\"");
  }
  if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0))
    fail(path + "." + key, "expected a non-negative integer");
  return v->get<std::uint64_t>();
}

inline bool boolean(const json& j, const std::string& path, const char* key,
                    std::optional<bool> def = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    fail(path, std::string("missing key \"") + key + "\"");
  }
  if (!v->is_boolean()) fail(path + "." + key, "expected a boolean");
  return v->get<bool>();
}

inline std::string text(const json& j, const std::string& path,
                        const char* key, std::optional<std::string> def = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    fail(path, std::string("missing key \"") + key + "\"");
  }
  if (!v->is_string()) fail(path + "." + key, "expected a string");
  return v->get<std::string>();
}

inline Vector vector_exact(const json& j, const std::string& path,
                           const char* key, Eigen::Index n) {
  const json* v = find(j, key);
  if (!v) fail(path, std::string("missing key \"") + key + "\"");
  if (!v->is_array())
    fail(path + "." + key, "expected an array of " + std::to_string(n) +
                               " numbers");
  if (static_cast<Eigen::Index>(v->size()) != n)
    fail(path + "." + key, "expected " + std::to_string(n) +
                               " entries, got " + std::to_string(v->size()));
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& e = (*v)[static_cast<std::size_t>(i)];
    if (!e.is_number())
      fail(path + "." + key + "[" + std::to_string(i) + "]",
           "expected a number");
    out[i] = e.get<double>();
  }
  return out;
}

// Scalar broadcasts to all joints; an array must match the joint count.
inline Vector vector_or_scalar(const json& j, const std::string& path,
                               const char* key, Eigen::Index n,
                               std::optional<double> def = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return broadcast(*def, n);
    fail(path, std::string("missing key \"") + key + "\"");
  }
  if (v->is_number()) return broadcast(v->get<double>(), n);
  if (v->is_array()) return vector_exact(j, path, key, n);
  fail(path + "." + key, "expected a number or an array");
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace cfg

namespace cfg_detail {

using nlohmann::json;

inline PlantSpec parse_plant(const json& j, const std::string& path) {
  cfg::check_keys(j, path,
                  {"type", "joints", "init_q", "init_qdot", "damping", "k1",
                   "k2", "mass", "m1", "m2", "l1", "l2", "lc1", "lc2", "i1",
                   "i2"});
  PlantSpec p;
  const std::string type = cfg::text(j, path, "type");
  if (type == "msd") {
    p.kind = PlantSpec::Kind::kMsd;
    p.joints = cfg::integer(j, path, "joints", 1);
    if (p.joints != 1) cfg::fail(path + ".joints", "msd plant has 1 joint");
    p.msd.k1 = cfg::number(j, path, "k1", 1.0);
    p.msd.k2 = cfg::number(j, path, "k2", 0.1);
    p.msd.mass = cfg::number(j, path, "mass", 1.0);
  } else if (type == "arm") {
    p.kind = PlantSpec::Kind::kArm;
    p.joints = cfg::integer(j, path, "joints", 2);
    if (p.joints < 1) cfg::fail(path + ".joints", "needs at least one joint");
    p.arm.damping = cfg::number(j, path, "damping", 0.5);
  } else if (type == "two_link") {
    p.kind = PlantSpec::Kind::kTwoLink;
    p.joints = cfg::integer(j, path, "joints", 2);
    if (p.joints != 2)
      cfg::fail(path + ".joints", "two-link plant has 2 joints");
    p.two_link.m1 = cfg::number(j, path, "m1", p.two_link.m1);
    p.two_link.m2 = cfg::number(j, path, "m2", p.two_link.m2);
    p.two_link.l1 = cfg::number(j, path, "l1", p.two_link.l1);
    p.two_link.l2 = cfg::number(j, path, "l2", p.two_link.l2);
    p.two_link.lc1 = cfg::number(j, path, "lc1", p.two_link.lc1);
    p.two_link.lc2 = cfg::number(j, path, "lc2", p.two_link.lc2);
    p.two_link.i1 = cfg::number(j, path, "i1", p.two_link.i1);
    p.two_link.i2 = cfg::number(j, path, "i2", p.two_link.i2);
    p.two_link.damping = cfg::number(j, path, "damping", p.two_link.damping);
  } else {
    cfg::fail(path + ".type", "unknown plant type \"" + type + "\"");
  }
  const Eigen::Index n = p.joints;
  p.init_q = cfg::vector_or_scalar(j, path, "init_q", n, 0.0);
  p.init_qdot = cfg::vector_or_scalar(j, path, "init_qdot", n, 0.0);
  return p;
}

inline ReferenceSpec parse_reference(const json& j, const std::string& path,
                                     Eigen::Index n) {
  cfg::check_keys(j, path,
                  {"type", "position", "amplitude", "frequency_hz", "phase"});
  ReferenceSpec r;
  const std::string type = cfg::text(j, path, "type", "constant");
  if (type == "constant") {
    r.kind = ReferenceSpec::Kind::kConstant;
    r.position = cfg::vector_or_scalar(j, path, "position", n);
  } else if (type == "sinusoid") {
    r.kind = ReferenceSpec::Kind::kSinusoid;
    r.position = cfg::vector_or_scalar(j, path, "position", n, 0.0);
    r.amplitude = cfg::vector_or_scalar(j, path, "amplitude", n);
    r.frequency_hz = cfg::number(j, path, "frequency_hz");
    r.phase = cfg::number(j, path, "phase", 0.0);
    if (r.frequency_hz <= 0.0)
      cfg::fail(path + ".frequency_hz", "must be positive");
  } else {
    cfg::fail(path + ".type", "unknown reference type \"" + type + "\"");
  }
  return r;
}

inline void parse_aic(const json& j, const std::string& path, Eigen::Index n,
                      AicConfig& cfg_out, PrecisionSet& prec_out) {
  cfg::check_keys(j, path,
                  {"kappa_mu", "kappa_a", "u_saturation", "sigma_y",
                   "sigma_y_prime", "sigma_mu", "sigma_mu_prime",
                   "precision_learning"});
  const AicConfig def = reference_aic_config();
  const PrecisionSet defp = reference_aic_precisions(n);
  cfg_out.kappa_mu = cfg::number(j, path, "kappa_mu", def.kappa_mu);
  cfg_out.kappa_a = cfg::number(j, path, "kappa_a", def.kappa_a);
  cfg_out.u_saturation =
      cfg::number(j, path, "u_saturation", def.u_saturation);
  prec_out.sigma_y =
      cfg::vector_or_scalar(j, path, "sigma_y", n, defp.sigma_y[0]);
  prec_out.sigma_y_prime = cfg::vector_or_scalar(j, path, "sigma_y_prime", n,
                                                 defp.sigma_y_prime[0]);
  prec_out.sigma_mu =
      cfg::vector_or_scalar(j, path, "sigma_mu", n, defp.sigma_mu[0]);
  prec_out.sigma_mu_prime = cfg::vector_or_scalar(j, path, "sigma_mu_prime",
                                                  n, defp.sigma_mu_prime[0]);
  if (const json* pl = cfg::find(j, "precision_learning")) {
    const std::string ppath = path + ".precision_learning";
    cfg::check_keys(*pl, ppath, {"enabled", "kappa_sigma", "learn_velocity"});
    cfg_out.precision_learning_enabled = cfg::boolean(*pl, ppath, "enabled");
    cfg_out.kappa_sigma = cfg::number(*pl, ppath, "kappa_sigma", 0.0);
    cfg_out.learn_velocity_precision =
        cfg::boolean(*pl, ppath, "learn_velocity", false);
  }
}

inline PidGains parse_gains(const json& j, const std::string& path,
                            Eigen::Index n, const PidGains& def) {
  cfg::check_keys(j, path, {"kp", "ki", "kd"});
  PidGains g;
  g.kp = cfg::vector_or_scalar(j, path, "kp", n, def.kp[0]);
  g.ki = cfg::vector_or_scalar(j, path, "ki", n, def.ki[0]);
  g.kd = cfg::vector_or_scalar(j, path, "kd", n, def.kd[0]);
  return g;
}

inline void parse_uaic(const json& j, const std::string& path, Eigen::Index n,
                       UaicConfig& out) {
  cfg::check_keys(j, path,
                  {"kappa_mu", "kappa_u", "u_saturation", "integral_limit",
                   "gains", "sigma_y", "sigma_y_prime", "sigma_x", "sigma_u",
                   "fstar_state_coupling", "extensions"});
  const UaicConfig def = reference_uaic_config(n);
  out.kappa_mu = cfg::number(j, path, "kappa_mu", def.kappa_mu);
  out.kappa_u = cfg::number(j, path, "kappa_u", def.kappa_u);
  out.u_saturation = cfg::number(j, path, "u_saturation", def.u_saturation);
  out.integral_limit =
      cfg::number(j, path, "integral_limit", def.integral_limit);
  out.gains = cfg::find(j, "gains")
                  ? parse_gains(*cfg::find(j, "gains"), path + ".gains", n,
                                def.gains)
                  : def.gains;
  out.prec.sigma_y =
      cfg::vector_or_scalar(j, path, "sigma_y", n, def.prec.sigma_y[0]);
  out.prec.sigma_y_prime = cfg::vector_or_scalar(
      j, path, "sigma_y_prime", n, def.prec.sigma_y_prime[0]);
  out.prec.sigma_x =
      cfg::vector_or_scalar(j, path, "sigma_x", n, def.prec.sigma_x[0]);
  out.prec.sigma_u =
      cfg::vector_or_scalar(j, path, "sigma_u", n, def.prec.sigma_u[0]);
  out.fstar_state_coupling =
      cfg::boolean(j, path, "fstar_state_coupling", def.fstar_state_coupling);
  if (const json* ex = cfg::find(j, "extensions")) {
    const std::string epath = path + ".extensions";
    cfg::check_keys(*ex, epath, {"open_loop", "control_cost", "smoothing"});
    if (const json* ol = cfg::find(*ex, "open_loop")) {
      const std::string opath = epath + ".open_loop";
      cfg::check_keys(*ol, opath, {"enabled", "sigma_ol", "value"});
      out.extensions.open_loop = cfg::boolean(*ol, opath, "enabled");
      if (out.extensions.open_loop) {
        if (!cfg::find(*ol, "sigma_ol"))
          cfg::fail(opath, "open_loop enabled without sigma_ol");
        out.prec.sigma_ol = cfg::vector_or_scalar(*ol, opath, "sigma_ol", n);
        if (!cfg::find(*ol, "value"))
          cfg::fail(opath, "open_loop enabled without value");
        out.extensions.open_loop_constant =
            cfg::vector_or_scalar(*ol, opath, "value", n);
      }
    }
    if (const json* cc = cfg::find(*ex, "control_cost")) {
      const std::string cpath = epath + ".control_cost";
      cfg::check_keys(*cc, cpath, {"enabled", "sigma_cc"});
      out.extensions.control_cost = cfg::boolean(*cc, cpath, "enabled");
      if (out.extensions.control_cost) {
        if (!cfg::find(*cc, "sigma_cc"))
          cfg::fail(cpath, "control_cost enabled without sigma_cc");
        out.prec.sigma_cc = cfg::vector_or_scalar(*cc, cpath, "sigma_cc", n);
      }
    }
    if (const json* sm = cfg::find(*ex, "smoothing")) {
      const std::string spath = epath + ".smoothing";
      cfg::check_keys(*sm, spath, {"enabled", "sigma_p"});
      out.extensions.smoothing = cfg::boolean(*sm, spath, "enabled");
      if (out.extensions.smoothing) {
        if (!cfg::find(*sm, "sigma_p"))
          cfg::fail(spath, "smoothing enabled without sigma_p");
        out.prec.sigma_p = cfg::vector_or_scalar(*sm, spath, "sigma_p", n);
      }
    }
  }
}

inline void parse_pi(const json& j, const std::string& path, Eigen::Index n,
                     PiConfig& out) {
  cfg::check_keys(j, path, {"gains", "integral_limit", "u_saturation"});
  const PiConfig def = reference_pi_config(n);
  out.gains = cfg::find(j, "gains")
                  ? parse_gains(*cfg::find(j, "gains"), path + ".gains", n,
                                def.gains)
                  : def.gains;
  out.integral_limit =
      cfg::number(j, path, "integral_limit", def.integral_limit);
  out.u_saturation = cfg::number(j, path, "u_saturation", def.u_saturation);
}

inline Scenario parse_scenario(const json& j, const std::string& path,
                               std::uint64_t default_seed) {
  cfg::check_keys(j, path,
                  {"name", "controller", "plant", "reference", "tau_inv",
                   "noise_std_pos", "noise_std_vel", "collision", "duration",
                   "dt", "seed", "estimation_only", "aic", "uaic", "pi"});
  Scenario sc;
  sc.name = cfg::text(j, path, "name");
  if (sc.name.empty()) cfg::fail(path + ".name", "must not be empty");
  const std::string kind = cfg::text(j, path, "controller");
  if (kind == "aic")
    sc.controller = ControllerKind::kAic;
  else if (kind == "uaic")
    sc.controller = ControllerKind::kUaic;
  else if (kind == "pi")
    sc.controller = ControllerKind::kPiBaseline;
  else
    cfg::fail(path + ".controller", "unknown controller \"" + kind + "\"");

  const json* plant = cfg::find(j, "plant");
  if (!plant) cfg::fail(path, "missing key \"plant\"");
  sc.plant = parse_plant(*plant, path + ".plant");
  const Eigen::Index n = sc.plant.joints;

  const json* ref = cfg::find(j, "reference");
  if (!ref) cfg::fail(path, "missing key \"reference\"");
  sc.reference = parse_reference(*ref, path + ".reference", n);

  sc.tau_inv = cfg::number(j, path, "tau_inv", 1.0);
  if (sc.tau_inv < 0.0) cfg::fail(path + ".tau_inv", "must be non-negative");
  sc.noise_std_pos = cfg::number(j, path, "noise_std_pos", 0.0);
  sc.noise_std_vel = cfg::number(j, path, "noise_std_vel", 0.0);
  if (sc.noise_std_pos < 0.0 || sc.noise_std_vel < 0.0)
    cfg::fail(path, "noise standard deviations must be non-negative");
  sc.duration = cfg::number(j, path, "duration", 10.0);
  sc.dt = cfg::number(j, path, "dt", 1e-3);
  if (sc.duration <= 0.0) cfg::fail(path + ".duration", "must be positive");
  if (sc.dt <= 0.0) cfg::fail(path + ".dt", "must be positive");
  sc.seed = cfg::uinteger(j, path, "seed", default_seed);
  sc.estimation_only = cfg::boolean(j, path, "estimation_only", false);

  if (const json* col = cfg::find(j, "collision")) {
    const std::string cpath = path + ".collision";
    cfg::check_keys(*col, cpath, {"start", "duration", "hold_positions"});
    CollisionScript cs;
    cs.start_time = cfg::number(*col, cpath, "start");
    cs.duration = cfg::number(*col, cpath, "duration");
    if (cs.start_time < 0.0) cfg::fail(cpath + ".start", "must be non-negative");
    if (cs.duration <= 0.0) cfg::fail(cpath + ".duration", "must be positive");
    if (cfg::find(*col, "hold_positions"))
      cs.hold_positions = cfg::vector_or_scalar(*col, cpath, "hold_positions", n);
    sc.collision = cs;
  }

  sc.aic = reference_aic_config();
  sc.aic_prec = reference_aic_precisions(n);
  if (const json* a = cfg::find(j, "aic"))
    parse_aic(*a, path + ".aic", n, sc.aic, sc.aic_prec);
  sc.uaic = reference_uaic_config(n);
  if (const json* u = cfg::find(j, "uaic")) parse_uaic(*u, path + ".uaic", n, sc.uaic);
  sc.pi = reference_pi_config(n);
  if (const json* p = cfg::find(j, "pi")) parse_pi(*p, path + ".pi", n, sc.pi);

  // Variance signs and gain contracts are enforced here so a bad config
  // fails before any simulation starts.
  try {
    if (sc.controller == ControllerKind::kAic) {
      sc.aic.validate();
      sc.aic_prec.validate_generalised(n);
    } else if (sc.controller == ControllerKind::kUaic) {
      sc.uaic.dt = sc.dt;
      sc.uaic.validate(n);
    } else {
      sc.pi.gains.validate(n);
    }
  } catch (const std::exception& e) {
    cfg::fail(path, e.what());
  }
  return sc;
}

inline nlohmann::json plant_to_json(const PlantSpec& p) {
  json j;
  switch (p.kind) {
    case PlantSpec::Kind::kMsd:
      j["type"] = "msd";
      j["k1"] = p.msd.k1;
      j["k2"] = p.msd.k2;
      j["mass"] = p.msd.mass;
      break;
    case PlantSpec::Kind::kArm:
      j["type"] = "arm";
      j["damping"] = p.arm.damping;
      break;
    case PlantSpec::Kind::kTwoLink:
      j["type"] = "two_link";
      j["m1"] = p.two_link.m1;
      j["m2"] = p.two_link.m2;
      j["l1"] = p.two_link.l1;
      j["l2"] = p.two_link.l2;
      j["lc1"] = p.two_link.lc1;
      j["lc2"] = p.two_link.lc2;
      j["i1"] = p.two_link.i1;
      j["i2"] = p.two_link.i2;
      j["damping"] = p.two_link.damping;
      break;
  }
  j["joints"] = p.joints;
  j["init_q"] = cfg::to_json(p.init_q);
  j["init_qdot"] = cfg::to_json(p.init_qdot);
  return j;
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  json j;
  j["name"] = sc.name;
  j["controller"] = to_string(sc.controller);
  j["plant"] = plant_to_json(sc.plant);
  json ref;
  if (sc.reference.kind == ReferenceSpec::Kind::kConstant) {
    ref["type"] = "constant";
    ref["position"] = cfg::to_json(sc.reference.position);
  } else {
    ref["type"] = "sinusoid";
    ref["position"] = cfg::to_json(sc.reference.position);
    ref["amplitude"] = cfg::to_json(sc.reference.amplitude);
    ref["frequency_hz"] = sc.reference.frequency_hz;
    ref["phase"] = sc.reference.phase;
  }
  j["reference"] = ref;
  j["tau_inv"] = sc.tau_inv;
  j["noise_std_pos"] = sc.noise_std_pos;
  j["noise_std_vel"] = sc.noise_std_vel;
  if (sc.collision) {
    json col;
    col["start"] = sc.collision->start_time;
    col["duration"] = sc.collision->duration;
    if (sc.collision->hold_positions)
      col["hold_positions"] = cfg::to_json(*sc.collision->hold_positions);
    j["collision"] = col;
  }
  j["duration"] = sc.duration;
  j["dt"] = sc.dt;
  j["seed"] = sc.seed;
  j["estimation_only"] = sc.estimation_only;

  json a;
  a["kappa_mu"] = sc.aic.kappa_mu;
  a["kappa_a"] = sc.aic.kappa_a;
  a["u_saturation"] = sc.aic.u_saturation;
  a["sigma_y"] = cfg::to_json(sc.aic_prec.sigma_y);
  a["sigma_y_prime"] = cfg::to_json(sc.aic_prec.sigma_y_prime);
  a["sigma_mu"] = cfg::to_json(sc.aic_prec.sigma_mu);
  a["sigma_mu_prime"] = cfg::to_json(sc.aic_prec.sigma_mu_prime);
  json pl;
  pl["enabled"] = sc.aic.precision_learning_enabled;
  pl["kappa_sigma"] = sc.aic.kappa_sigma;
  pl["learn_velocity"] = sc.aic.learn_velocity_precision;
  a["precision_learning"] = pl;
  j["aic"] = a;

  json u;
  u["kappa_mu"] = sc.uaic.kappa_mu;
  u["kappa_u"] = sc.uaic.kappa_u;
  u["u_saturation"] = sc.uaic.u_saturation;
  u["integral_limit"] = sc.uaic.integral_limit;
  json g;
  g["kp"] = cfg::to_json(sc.uaic.gains.kp);
  g["ki"] = cfg::to_json(sc.uaic.gains.ki);
  g["kd"] = cfg::to_json(sc.uaic.gains.kd);
  u["gains"] = g;
  u["sigma_y"] = cfg::to_json(sc.uaic.prec.sigma_y);
  u["sigma_y_prime"] = cfg::to_json(sc.uaic.prec.sigma_y_prime);
  u["sigma_x"] = cfg::to_json(sc.uaic.prec.sigma_x);
  u["sigma_u"] = cfg::to_json(sc.uaic.prec.sigma_u);
  u["fstar_state_coupling"] = sc.uaic.fstar_state_coupling;
  json ex;
  json ol;
  ol["enabled"] = sc.uaic.extensions.open_loop;
  if (sc.uaic.extensions.open_loop) {
    ol["sigma_ol"] = cfg::to_json(sc.uaic.prec.sigma_ol);
    ol["value"] = cfg::to_json(sc.uaic.extensions.open_loop_constant);
  }
  ex["open_loop"] = ol;
  json cc;
  cc["enabled"] = sc.uaic.extensions.control_cost;
  if (sc.uaic.extensions.control_cost)
    cc["sigma_cc"] = cfg::to_json(sc.uaic.prec.sigma_cc);
  ex["control_cost"] = cc;
  json sm;
  sm["enabled"] = sc.uaic.extensions.smoothing;
  if (sc.uaic.extensions.smoothing)
    sm["sigma_p"] = cfg::to_json(sc.uaic.prec.sigma_p);
  ex["smoothing"] = sm;
  u["extensions"] = ex;
  j["uaic"] = u;

  json p;
  json pg;
  pg["kp"] = cfg::to_json(sc.pi.gains.kp);
  pg["ki"] = cfg::to_json(sc.pi.gains.ki);
  pg["kd"] = cfg::to_json(sc.pi.gains.kd);
  p["gains"] = pg;
  p["integral_limit"] = sc.pi.integral_limit;
  p["u_saturation"] = sc.pi.u_saturation;
  j["pi"] = p;
  return j;
}

}  // namespace cfg_detail

inline RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  cfg::check_keys(j, "$", {"seed", "out_dir", "scenarios", "batch"});
  RunConfig cfg_out;
  cfg_out.seed = cfg::uinteger(j, "$", "seed", std::uint64_t{0});
  cfg_out.out_dir = cfg::text(j, "$", "out_dir", std::string{});

  const nlohmann::json* scenarios = cfg::find(j, "scenarios");
  if (!scenarios) cfg::fail("$", "missing key \"scenarios\"");
  if (!scenarios->is_array() || scenarios->empty())
    cfg::fail("$.scenarios", "expected a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < scenarios->size(); ++i) {
    const std::string path = "$.scenarios[" + std::to_string(i) + "]";
    Scenario sc = cfg_detail::parse_scenario((*scenarios)[i], path,
                                             cfg_out.seed);
    if (!names.insert(sc.name).second)
      cfg::fail(path + ".name", "duplicate scenario name \"" + sc.name + "\"");
    cfg_out.scenarios.push_back(std::move(sc));
  }

  if (const nlohmann::json* b = cfg::find(j, "batch")) {
    cfg::check_keys(*b, "$.batch",
                    {"trials", "randomize_collision", "collision_start",
                     "collision_duration"});
    cfg_out.batch.trials = cfg::integer(*b, "$.batch", "trials", 100);
    if (cfg_out.batch.trials < 1)
      cfg::fail("$.batch.trials", "must be at least 1");
    cfg_out.batch.randomization.randomize_collision =
        cfg::boolean(*b, "$.batch", "randomize_collision", true);
    if (cfg::find(*b, "collision_start")) {
      const Vector r = cfg::vector_exact(*b, "$.batch", "collision_start", 2);
      cfg_out.batch.randomization.start_min = r[0];
      cfg_out.batch.randomization.start_max = r[1];
    }
    if (cfg::find(*b, "collision_duration")) {
      const Vector r =
          cfg::vector_exact(*b, "$.batch", "collision_duration", 2);
      cfg_out.batch.randomization.duration_min = r[0];
      cfg_out.batch.randomization.duration_max = r[1];
    }
    const auto& rnd = cfg_out.batch.randomization;
    if (rnd.randomize_collision &&
        (rnd.start_max < rnd.start_min || rnd.start_min < 0.0 ||
         rnd.duration_max < rnd.duration_min || rnd.duration_min <= 0.0))
      cfg::fail("$.batch", "collision ranges are invalid");
  }
  return cfg_out;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

// Full configuration with every default filled in. Parsing the dump
// yields the same runs as the original config.
inline nlohmann::json dump_effective_config(const RunConfig& cfg_in) {
  nlohmann::json j;
  j["seed"] = cfg_in.seed;
  if (!cfg_in.out_dir.empty()) j["out_dir"] = cfg_in.out_dir;
  nlohmann::json arr = nlohmann::json::array();
  for (const Scenario& sc : cfg_in.scenarios)
    arr.push_back(cfg_detail::scenario_to_json(sc));
  j["scenarios"] = arr;
  nlohmann::json b;
  b["trials"] = cfg_in.batch.trials;
  b["randomize_collision"] = cfg_in.batch.randomization.randomize_collision;
  b["collision_start"] = nlohmann::json::array(
      {cfg_in.batch.randomization.start_min,
       cfg_in.batch.randomization.start_max});
  b["collision_duration"] = nlohmann::json::array(
      {cfg_in.batch.randomization.duration_min,
       cfg_in.batch.randomization.duration_max});
  j["batch"] = b;
  return j;
}

// Seed override from the command line: replaces the base seed and every
// scenario seed, keeping paired scenarios paired.
inline void apply_seed_override(RunConfig& cfg_io, std::uint64_t seed) {
  cfg_io.seed = seed;
  for (Scenario& sc : cfg_io.scenarios) sc.seed = seed;
}

// Benchmark configuration used by the committed reference config file and
// the default experiments: the arm reach scenario for all three
// controllers plus the estimation-only mass-spring scenario.
inline RunConfig reference_run_config() {
  RunConfig cfg_out;
  cfg_out.seed = 12345;
  cfg_out.scenarios.push_back(reference_arm_scenario(ControllerKind::kAic));
  cfg_out.scenarios.push_back(reference_arm_scenario(ControllerKind::kUaic));
  cfg_out.scenarios.push_back(
      reference_arm_scenario(ControllerKind::kPiBaseline));
  cfg_out.scenarios.push_back(reference_msd_estimation_scenario());
  cfg_out.batch.trials = 100;
  cfg_out.batch.randomization = reference_batch_randomization();
  return cfg_out;
}

}  // namespace aictrl
