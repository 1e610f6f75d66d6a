#include "pev/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pev {

namespace {

using nlohmann::json;

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw std::runtime_error("config: expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void maybe_vec3(const json& j, const char* key, Vec3& out) {
  if (j.contains(key)) out = vec3_from_json(j.at(key));
}

}  // namespace

RunConfig preset_small() {
  RunConfig cfg;
  cfg.arena_preset = "small";
  cfg.env.arena.side = 8.0;
  cfg.env.arena.height = 5.0;
  cfg.env.arena.inner_lo = Vec3(1.0, 1.0, 0.5);
  cfg.env.arena.inner_hi = Vec3(7.0, 7.0, 4.5);
  cfg.env.obs.k_p = 10.0;
  return cfg;
}

RunConfig preset_large() {
  RunConfig cfg;
  cfg.arena_preset = "large";
  cfg.env.arena.side = 40.0;
  cfg.env.arena.height = 14.0;
  cfg.env.arena.inner_lo = Vec3(10.0, 10.0, 5.0);
  cfg.env.arena.inner_hi = Vec3(30.0, 30.0, 9.0);
  cfg.env.obs.k_p = 40.0;
  return cfg;
}

RunConfig preset_by_name(const std::string& name) {
  if (name == "small") return preset_small();
  if (name == "large") return preset_large();
  if (name == "custom") return RunConfig{};
  throw std::runtime_error("unknown arena preset '" + name +
                           "' (expected small, large, or custom)");
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["version"] = 1;
  j["arena_preset"] = cfg.arena_preset;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;

  json& arena = j["arena"];
  arena["side"] = cfg.env.arena.side;
  arena["height"] = cfg.env.arena.height;
  arena["inner_lo"] = vec3_to_json(cfg.env.arena.inner_lo);
  arena["inner_hi"] = vec3_to_json(cfg.env.arena.inner_hi);
  arena["buffer_threshold"] = cfg.env.arena.buffer_threshold;
  arena["buffer_scale"] = cfg.env.arena.buffer_scale;
  arena["episode_max_steps"] = cfg.env.arena.episode_max_steps;
  arena["dt_control"] = cfg.env.arena.dt_control;
  arena["spawn_z_min"] = cfg.env.arena.spawn_z_min;
  arena["min_spawn_separation"] = cfg.env.arena.min_spawn_separation;

  json& net = j["net"];
  net["radius"] = cfg.env.net.radius;
  net["capture_dist"] = cfg.env.net.capture_dist;
  net["center_offset"] = vec3_to_json(cfg.env.net.center_offset);
  net["normal_axis"] = cfg.env.net.normal_axis;

  json& quad = j["quad"];
  quad["mass"] = cfg.env.quad.mass;
  quad["inertia_diag"] = vec3_to_json(cfg.env.quad.inertia_diag);
  quad["arm_length"] = cfg.env.quad.arm_length;
  quad["thrust_coeff"] = cfg.env.quad.thrust_coeff;
  quad["torque_coeff"] = cfg.env.quad.torque_coeff;
  quad["linear_drag_coeffs"] = vec3_to_json(cfg.env.quad.linear_drag_coeffs);
  quad["motor_time_constant"] = cfg.env.quad.motor_time_constant;
  quad["max_rotor_speed"] = cfg.env.quad.max_rotor_speed;
  quad["command_delay_steps"] = cfg.env.quad.command_delay_steps;
  quad["body_radius"] = cfg.env.quad.body_radius;
  quad["rate_gain"] = cfg.env.quad.rate_gain;
  quad["gravity"] = cfg.env.quad.gravity;
  quad["max_thrust"] = cfg.env.quad.max_thrust;
  quad["max_body_rate"] = cfg.env.quad.max_body_rate;
  quad["physics_dt"] = cfg.env.quad.physics_dt;
  quad["substeps_per_tick"] = cfg.env.quad.substeps_per_tick;

  json& rewards = j["rewards"];
  rewards["catch"] = cfg.env.rewards.catch_;
  rewards["dist"] = cfg.env.rewards.dist;
  rewards["coll"] = cfg.env.rewards.coll;
  rewards["fail"] = cfg.env.rewards.fail;
  rewards["cmd"] = cfg.env.rewards.cmd;
  rewards["bnd"] = cfg.env.rewards.bnd;

  json& obs = j["observation"];
  obs["k_p"] = cfg.env.obs.k_p;
  obs["k_v"] = cfg.env.obs.k_v;

  json& guidance = j["guidance"];
  guidance["se3_k_p"] = vec3_to_json(cfg.guidance.se3.k_p);
  guidance["se3_k_v"] = vec3_to_json(cfg.guidance.se3.k_v);
  guidance["se3_k_R"] = vec3_to_json(cfg.guidance.se3.k_R);
  guidance["pp_chase_speed"] = cfg.guidance.pp_chase_speed;
  guidance["pn_nav_gain"] = cfg.guidance.pn_nav_gain;
  guidance["pn_closing_speed"] = cfg.guidance.pn_closing_speed;
  guidance["apf_influence_dist"] = cfg.guidance.apf_influence_dist;
  guidance["apf_repulse_gain"] = cfg.guidance.apf_repulse_gain;
  guidance["apf_accel_cap"] = cfg.guidance.apf_accel_cap;

  json& ppo = j["ppo"];
  ppo["n_envs"] = cfg.ppo.n_envs;
  ppo["rollout_len"] = cfg.ppo.rollout_len;
  ppo["lr"] = cfg.ppo.lr;
  ppo["gamma"] = cfg.ppo.gamma;
  ppo["gae_lambda"] = cfg.ppo.gae_lambda;
  ppo["clip"] = cfg.ppo.clip;
  ppo["epochs"] = cfg.ppo.epochs;
  ppo["minibatches"] = cfg.ppo.minibatches;
  ppo["entropy_coef"] = cfg.ppo.entropy_coef;
  ppo["value_coef"] = cfg.ppo.value_coef;
  ppo["max_grad_norm"] = cfg.ppo.max_grad_norm;
  ppo["lr_decay"] = cfg.ppo.lr_decay;
  ppo["total_steps"] = cfg.ppo.total_steps;
  ppo["hidden_units"] = cfg.ppo.hidden_units;
  ppo["hidden_layers"] = cfg.ppo.hidden_layers;
  ppo["init_log_std"] = cfg.ppo.init_log_std;
  ppo["checkpoint_every"] = cfg.ppo.checkpoint_every;
  ppo["eval_every"] = cfg.ppo.eval_every;
  ppo["eval_episodes"] = cfg.ppo.eval_episodes;
  ppo["stop_at_catch_rate"] = cfg.ppo.stop_at_catch_rate;

  return j.dump(2) + "\n";
}

RunConfig run_config_from_json_text(const std::string& text) {
  const json j = json::parse(text, nullptr, /*allow_exceptions=*/true,
                             /*ignore_comments=*/true);
  RunConfig cfg = preset_by_name(j.value("arena_preset", "small"));
  maybe(j, "seed", cfg.seed);
  maybe(j, "out_dir", cfg.out_dir);

  if (j.contains("arena")) {
    const json& a = j.at("arena");
    maybe(a, "side", cfg.env.arena.side);
    maybe(a, "height", cfg.env.arena.height);
    maybe_vec3(a, "inner_lo", cfg.env.arena.inner_lo);
    maybe_vec3(a, "inner_hi", cfg.env.arena.inner_hi);
    maybe(a, "buffer_threshold", cfg.env.arena.buffer_threshold);
    maybe(a, "buffer_scale", cfg.env.arena.buffer_scale);
    maybe(a, "episode_max_steps", cfg.env.arena.episode_max_steps);
    maybe(a, "dt_control", cfg.env.arena.dt_control);
    maybe(a, "spawn_z_min", cfg.env.arena.spawn_z_min);
    maybe(a, "min_spawn_separation", cfg.env.arena.min_spawn_separation);
  }
  if (j.contains("net")) {
    const json& n = j.at("net");
    maybe(n, "radius", cfg.env.net.radius);
    maybe(n, "capture_dist", cfg.env.net.capture_dist);
    maybe_vec3(n, "center_offset", cfg.env.net.center_offset);
    maybe(n, "normal_axis", cfg.env.net.normal_axis);
  }
  if (j.contains("quad")) {
    const json& q = j.at("quad");
    maybe(q, "mass", cfg.env.quad.mass);
    maybe_vec3(q, "inertia_diag", cfg.env.quad.inertia_diag);
    maybe(q, "arm_length", cfg.env.quad.arm_length);
    maybe(q, "thrust_coeff", cfg.env.quad.thrust_coeff);
    maybe(q, "torque_coeff", cfg.env.quad.torque_coeff);
    maybe_vec3(q, "linear_drag_coeffs", cfg.env.quad.linear_drag_coeffs);
    maybe(q, "motor_time_constant", cfg.env.quad.motor_time_constant);
    maybe(q, "max_rotor_speed", cfg.env.quad.max_rotor_speed);
    maybe(q, "command_delay_steps", cfg.env.quad.command_delay_steps);
    maybe(q, "body_radius", cfg.env.quad.body_radius);
    maybe(q, "rate_gain", cfg.env.quad.rate_gain);
    maybe(q, "gravity", cfg.env.quad.gravity);
    maybe(q, "max_thrust", cfg.env.quad.max_thrust);
    maybe(q, "max_body_rate", cfg.env.quad.max_body_rate);
    maybe(q, "physics_dt", cfg.env.quad.physics_dt);
    maybe(q, "substeps_per_tick", cfg.env.quad.substeps_per_tick);
  }
  if (j.contains("rewards")) {
    const json& r = j.at("rewards");
    maybe(r, "catch", cfg.env.rewards.catch_);
    maybe(r, "dist", cfg.env.rewards.dist);
    maybe(r, "coll", cfg.env.rewards.coll);
    maybe(r, "fail", cfg.env.rewards.fail);
    maybe(r, "cmd", cfg.env.rewards.cmd);
    maybe(r, "bnd", cfg.env.rewards.bnd);
  }
  if (j.contains("observation")) {
    const json& o = j.at("observation");
    maybe(o, "k_p", cfg.env.obs.k_p);
    maybe(o, "k_v", cfg.env.obs.k_v);
  }
  if (j.contains("guidance")) {
    const json& g = j.at("guidance");
    maybe_vec3(g, "se3_k_p", cfg.guidance.se3.k_p);
    maybe_vec3(g, "se3_k_v", cfg.guidance.se3.k_v);
    maybe_vec3(g, "se3_k_R", cfg.guidance.se3.k_R);
    maybe(g, "pp_chase_speed", cfg.guidance.pp_chase_speed);
    maybe(g, "pn_nav_gain", cfg.guidance.pn_nav_gain);
    maybe(g, "pn_closing_speed", cfg.guidance.pn_closing_speed);
    maybe(g, "apf_influence_dist", cfg.guidance.apf_influence_dist);
    maybe(g, "apf_repulse_gain", cfg.guidance.apf_repulse_gain);
    maybe(g, "apf_accel_cap", cfg.guidance.apf_accel_cap);
  }
  if (j.contains("ppo")) {
    const json& p = j.at("ppo");
    maybe(p, "n_envs", cfg.ppo.n_envs);
    maybe(p, "rollout_len", cfg.ppo.rollout_len);
    maybe(p, "lr", cfg.ppo.lr);
    maybe(p, "gamma", cfg.ppo.gamma);
    maybe(p, "gae_lambda", cfg.ppo.gae_lambda);
    maybe(p, "clip", cfg.ppo.clip);
    maybe(p, "epochs", cfg.ppo.epochs);
    maybe(p, "minibatches", cfg.ppo.minibatches);
    maybe(p, "entropy_coef", cfg.ppo.entropy_coef);
    maybe(p, "value_coef", cfg.ppo.value_coef);
    maybe(p, "max_grad_norm", cfg.ppo.max_grad_norm);
    maybe(p, "lr_decay", cfg.ppo.lr_decay);
    maybe(p, "total_steps", cfg.ppo.total_steps);
    maybe(p, "hidden_units", cfg.ppo.hidden_units);
    maybe(p, "hidden_layers", cfg.ppo.hidden_layers);
    maybe(p, "init_log_std", cfg.ppo.init_log_std);
    maybe(p, "checkpoint_every", cfg.ppo.checkpoint_every);
    maybe(p, "eval_every", cfg.ppo.eval_every);
    maybe(p, "eval_episodes", cfg.ppo.eval_episodes);
    maybe(p, "stop_at_catch_rate", cfg.ppo.stop_at_catch_rate);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  RunConfig cfg = run_config_from_json_text(buf.str());
  validate_run_config(cfg);
  return cfg;
}

void validate_run_config(const RunConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::runtime_error(std::string("invalid config: ") + what);
  };
  const ArenaConfig& a = cfg.env.arena;
  require(a.side > 0.0 && a.height > 0.0, "arena dimensions must be positive");
  for (int i = 0; i < 3; ++i) {
    require(a.inner_lo[i] < a.inner_hi[i], "inner box must not be empty");
  }
  require(a.inner_lo.x() >= 0.0 && a.inner_lo.y() >= 0.0 &&
              a.inner_lo.z() >= 0.0 && a.inner_hi.x() <= a.side &&
              a.inner_hi.y() <= a.side && a.inner_hi.z() <= a.height,
          "inner box must lie inside the arena");
  require(a.episode_max_steps > 0 && a.dt_control > 0.0,
          "episode length and control period must be positive");

  const QuadParams& q = cfg.env.quad;
  require(q.mass > 0.0 && q.arm_length > 0.0 && q.thrust_coeff > 0.0 &&
              q.torque_coeff > 0.0 && q.motor_time_constant > 0.0 &&
              q.max_rotor_speed > 0.0 && q.body_radius > 0.0 &&
              q.rate_gain > 0.0 && q.gravity > 0.0 && q.max_thrust > 0.0 &&
              q.max_body_rate > 0.0 && q.physics_dt > 0.0 &&
              q.substeps_per_tick > 0,
          "airframe parameters must be strictly positive");
  require(q.inertia_diag.minCoeff() > 0.0, "inertia must be strictly positive");
  require(q.command_delay_steps >= 0, "command delay must be non-negative");

  require(cfg.env.net.radius > 0.0 && cfg.env.net.capture_dist > 0.0,
          "net radius and capture distance must be positive");
  require(cfg.env.net.normal_axis >= 0 && cfg.env.net.normal_axis < 3,
          "net normal axis must be 0, 1, or 2");
  require(cfg.env.obs.k_p > 0.0 && cfg.env.obs.k_v > 0.0,
          "observation normalization constants must be positive");

  const PpoConfig& p = cfg.ppo;
  require(p.n_envs > 0 && p.rollout_len > 0 && p.epochs > 0 &&
              p.minibatches > 0 && p.hidden_units > 0 && p.hidden_layers > 0,
          "ppo shape parameters must be positive");
  require(p.lr > 0.0 && p.gamma > 0.0 && p.gae_lambda >= 0.0 &&
              p.value_coef > 0.0 && p.max_grad_norm > 0.0 &&
              p.total_steps > 0.0,
          "ppo scalar hyperparameters must be positive");
  require(p.clip > 0.0 && p.clip < 1.0, "clip must be in (0, 1)");
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/resolved_config.json";
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << run_config_to_json(cfg);
}

}  // namespace pev
