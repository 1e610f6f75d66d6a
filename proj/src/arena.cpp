#include "pev/arena.hpp"

#include <limits>
#include <tuple>

namespace pev {

namespace {

AgentPhysical spawn_agent(const Vec3& p, const EnvConfig& cfg) {
  AgentPhysical a;
  a.body.p = p;
  a.spawn_pos = p;
  a.motors.rotor_speeds.setConstant(cfg.quad.hover_rotor_speed());
  a.delay = DelayLine(cfg.quad.command_delay_steps,
                      LowLevelCommand::hover(cfg.quad));
  return a;
}

Vec3 sample_position(Rng& rng, const ArenaConfig& arena) {
  return Vec3(rng.uniform(0.0, arena.side), rng.uniform(0.0, arena.side),
              rng.uniform(arena.spawn_z_min, arena.height));
}

bool outside_arena(const Vec3& p, const ArenaConfig& arena) {
  return p.x() < 0.0 || p.x() > arena.side || p.y() < 0.0 ||
         p.y() > arena.side || p.z() < 0.0 || p.z() > arena.height;
}

bool ground_crash(const RigidBodyState& body, const QuadParams& params) {
  return body.p.z() <= params.body_radius && body.v.z() <= 0.0;
}

double clamp_unit(double x) { return clamp(x, -1.0, 1.0); }

}  // namespace

WorldState reset(Rng& rng, const EnvConfig& cfg) {
  const ArenaConfig& arena = cfg.arena;
  Vec3 p_p, p_e;
  bool placed = false;
  for (int attempt = 0; attempt < 100; ++attempt) {
    p_p = sample_position(rng, arena);
    p_e = sample_position(rng, arena);
    if ((p_p - p_e).norm() >= arena.min_spawn_separation) {
      placed = true;
      break;
    }
  }
  if (!placed) {
    // Deterministic fallback: opposite quadrants at mid height.
    const double mid_z =
        0.5 * (arena.spawn_z_min + arena.height);
    p_p = Vec3(0.25 * arena.side, 0.25 * arena.side, mid_z);
    p_e = Vec3(0.75 * arena.side, 0.75 * arena.side, mid_z);
  }

  WorldState w;
  w.pursuer = spawn_agent(p_p, cfg);
  w.evader = spawn_agent(p_e, cfg);
  w.step_count = 0;
  w.rng_state = rng.state();
  const Vec4 hover_action = encode_action(LowLevelCommand::hover(cfg.quad), cfg.quad);
  w.last_action_p = hover_action;
  w.last_action_e = hover_action;
  w.done = false;
  return w;
}

CaptureResult capture_check(const RigidBodyState& pursuer, const Vec3& p_evader,
                            const NetConfig& net) {
  CaptureResult res;
  res.net_center = pursuer.p + pursuer.R * net.center_offset;
  const Vec3 normal = pursuer.R.col(net.normal_axis);
  const Vec3 w = p_evader - res.net_center;
  const double axial = w.dot(normal);
  const Vec3 radial = w - axial * normal;
  const double rho = radial.norm();
  if (rho <= net.radius) {
    res.dist = std::abs(axial);
  } else {
    const double over = rho - net.radius;
    res.dist = std::sqrt(over * over + axial * axial);
  }
  res.captured = res.dist <= net.capture_dist;
  return res;
}

bool collision_check(const RigidBodyState& a, const RigidBodyState& b,
                     const QuadParams& params) {
  return (a.p - b.p).norm() <= 2.0 * params.body_radius;
}

double inner_boundary_distance(const Vec3& p, const ArenaConfig& arena) {
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    d = std::min(d, p[i] - arena.inner_lo[i]);
    d = std::min(d, arena.inner_hi[i] - p[i]);
  }
  return std::max(d, 0.0);
}

double boundary_penalty(double d_bnd, const ArenaConfig& arena,
                        const RewardCoeffs& coeffs) {
  if (d_bnd >= arena.buffer_threshold) return 0.0;
  return coeffs.bnd * std::exp(-d_bnd / arena.buffer_scale);
}

ObsVec observe(const WorldState& world, AgentId agent, const EnvConfig& cfg) {
  const AgentPhysical& self = world.agent(agent);
  const AgentPhysical& opp =
      world.agent(agent == AgentId::Pursuer ? AgentId::Evader : AgentId::Pursuer);
  const double inv_kp = 1.0 / cfg.obs.k_p;
  const double inv_kv = 1.0 / cfg.obs.k_v;

  ObsVec o;
  int k = 0;
  for (int i = 0; i < 3; ++i) o[k++] = clamp_unit(self.body.v[i] * inv_kv);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) o[k++] = self.body.R(r, c);
  const Vec3 dp = opp.body.p - self.body.p;
  const Vec3 dv = opp.body.v - self.body.v;
  for (int i = 0; i < 3; ++i) o[k++] = clamp_unit(dp[i] * inv_kp);
  for (int i = 0; i < 3; ++i) o[k++] = clamp_unit(dv[i] * inv_kv);

  const Vec3& p = self.body.p;
  const double dists[6] = {p.x(),
                           cfg.arena.side - p.x(),
                           p.y(),
                           cfg.arena.side - p.y(),
                           cfg.arena.height - p.z(),
                           p.z()};
  for (double d : dists) o[k++] = clamp_unit(std::max(d, 0.0) * inv_kp);
  return o;
}

PrivObsVec observe_privileged(const WorldState& world, AgentId agent,
                              const Vec4& opp_action, const EnvConfig& cfg) {
  const AgentPhysical& self = world.agent(agent);
  const AgentPhysical& opp =
      world.agent(agent == AgentId::Pursuer ? AgentId::Evader : AgentId::Pursuer);
  const double inv_kp = 1.0 / cfg.obs.k_p;
  const double inv_kv = 1.0 / cfg.obs.k_v;

  PrivObsVec o;
  int k = 0;
  auto put_agent = [&](const AgentPhysical& a) {
    for (int i = 0; i < 3; ++i) o[k++] = clamp_unit(a.body.p[i] * inv_kp);
    for (int i = 0; i < 3; ++i) o[k++] = clamp_unit(a.body.v[i] * inv_kv);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) o[k++] = a.body.R(r, c);
  };
  put_agent(self);
  put_agent(opp);
  for (int i = 0; i < 4; ++i) o[k++] = clamp_unit(opp_action[i]);
  return o;
}

std::pair<RewardBreakdown, RewardBreakdown> compute_rewards(
    const WorldState& world_after, const Vec4& action_p, const Vec4& action_e,
    const StepEvents& events, const EnvConfig& cfg) {
  const RewardCoeffs& lam = cfg.rewards;
  const double catch_term = lam.catch_ * (events.catch_ ? 1.0 : 0.0);
  const double dist_term = lam.dist * events.net_center_dist;
  const double coll_term = lam.coll * (events.contact ? 1.0 : 0.0);

  RewardBreakdown p, e;
  p.catch_ = events.fail_evader ? 0.0 : catch_term;
  p.dist = events.fail_evader ? 0.0 : dist_term;
  p.coll = coll_term;
  p.fail = lam.fail * (events.fail_pursuer ? 1.0 : 0.0);
  p.cmd = lam.cmd * action_body_rates(action_p, cfg.quad).norm();

  e.catch_ = events.fail_pursuer ? 0.0 : catch_term;
  e.dist = events.fail_pursuer ? 0.0 : dist_term;
  e.coll = coll_term;
  e.fail = lam.fail * (events.fail_evader ? 1.0 : 0.0);
  e.cmd = lam.cmd * action_body_rates(action_e, cfg.quad).norm();
  e.bnd = boundary_penalty(
      inner_boundary_distance(world_after.evader.body.p, cfg.arena), cfg.arena,
      cfg.rewards);
  return {p, e};
}

Vec3 action_body_rates(const Vec4& action, const QuadParams& params) {
  return Vec3(clamp_unit(action[1]), clamp_unit(action[2]),
              clamp_unit(action[3])) *
         params.max_body_rate;
}

LowLevelCommand decode_action(const Vec4& action, const QuadParams& params) {
  const double thrust = 0.5 * (clamp_unit(action[0]) + 1.0) * params.max_thrust;
  return LowLevelCommand::clamped(thrust, action_body_rates(action, params),
                                  params);
}

Vec4 encode_action(const LowLevelCommand& cmd, const QuadParams& params) {
  Vec4 a;
  a[0] = clamp_unit(2.0 * cmd.thrust / params.max_thrust - 1.0);
  for (int i = 0; i < 3; ++i)
    a[i + 1] = clamp_unit(cmd.omega_des[i] / params.max_body_rate);
  return a;
}

StepResult env_step(WorldState& world, const Vec4& action_p,
                    const Vec4& action_e, const EnvConfig& cfg) {
  PEV_ASSERT(!world.done, "env_step: world already terminated");
  PEV_ASSERT(action_p.allFinite() && action_e.allFinite(),
             "env_step: non-finite action");

  const LowLevelCommand cmd_p = decode_action(action_p, cfg.quad);
  const LowLevelCommand cmd_e = decode_action(action_e, cfg.quad);
  control_tick(world.pursuer.body, world.pursuer.motors, world.pursuer.delay,
               cmd_p, cfg.quad);
  control_tick(world.evader.body, world.evader.motors, world.evader.delay,
               cmd_e, cfg.quad);
  world.last_action_p = action_p;
  world.last_action_e = action_e;
  world.step_count += 1;

  StepResult res;
  const CaptureResult cap =
      capture_check(world.pursuer.body, world.evader.body.p, cfg.net);
  res.events.catch_ = cap.captured;
  res.events.net_dist = cap.dist;
  res.events.net_center_dist = (world.evader.body.p - cap.net_center).norm();
  res.events.contact =
      collision_check(world.pursuer.body, world.evader.body, cfg.quad);
  res.events.fail_pursuer = ground_crash(world.pursuer.body, cfg.quad) ||
                            outside_arena(world.pursuer.body.p, cfg.arena);
  res.events.fail_evader = ground_crash(world.evader.body, cfg.quad) ||
                           outside_arena(world.evader.body.p, cfg.arena);

  std::tie(res.reward_p, res.reward_e) =
      compute_rewards(world, action_p, action_e, res.events, cfg);

  // Termination: catch wins over same-tick failures, failures over timeout.
  std::optional<OutcomeKind> kind;
  if (res.events.catch_) {
    kind = OutcomeKind::Catch;
  } else if (res.events.fail_pursuer && res.events.fail_evader) {
    kind = OutcomeKind::DoubleCrash;
  } else if (res.events.fail_pursuer) {
    kind = OutcomeKind::PursuerCrash;
  } else if (res.events.fail_evader) {
    kind = OutcomeKind::EvaderCrash;
  } else if (world.step_count >= cfg.arena.episode_max_steps) {
    kind = OutcomeKind::Timeout;
  }

  if (kind) {
    EpisodeOutcome outcome;
    outcome.kind = *kind;
    outcome.t_end = world.step_count * cfg.arena.dt_control;
    outcome.censored_time_to_catch = outcome.kind == OutcomeKind::Catch
                                         ? outcome.t_end
                                         : cfg.arena.horizon_seconds();
    res.outcome = outcome;
    res.done = true;
    world.done = true;
  }

  res.obs_p = observe(world, AgentId::Pursuer, cfg);
  res.obs_e = observe(world, AgentId::Evader, cfg);
  return res;
}

}  // namespace pev
