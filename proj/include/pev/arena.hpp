#pragma once

#include <optional>
#include <utility>

#include "pev/dynamics.hpp"
#include "pev/guidance.hpp"
#include "pev/types.hpp"

namespace pev {

inline constexpr int kObsDim = 24;
inline constexpr int kPrivObsDim = 34;
inline constexpr int kActionDim = 4;

using ObsVec = Eigen::Matrix<double, kObsDim, 1>;
using PrivObsVec = Eigen::Matrix<double, kPrivObsDim, 1>;

enum class AgentId { Pursuer = 0, Evader = 1 };

/// Rectangular arena of side L and height H. The inner box bounds the
/// evader's penalty-free volume; crossing the outer faces is a hard failure.
struct ArenaConfig {
  double side = 8.0;    // L, m
  double height = 5.0;  // H, m
  Vec3 inner_lo{1.0, 1.0, 0.5};
  Vec3 inner_hi{7.0, 7.0, 4.5};
  double buffer_threshold = 1.0;  // d_thr, m
  double buffer_scale = 0.25;     // d_scale, m
  int episode_max_steps = 1000;
  double dt_control = 0.01;  // s
  double spawn_z_min = 0.3;  // m, keeps spawns clear of ground contact
  double min_spawn_separation = 1.2;  // m, 2 * (capture_dist + net radius)

  double horizon_seconds() const { return episode_max_steps * dt_control; }
  ArenaBox box() const { return ArenaBox{side, height}; }
};

/// Rigid circular capture net fixed in the pursuer's body frame.
struct NetConfig {
  double radius = 0.5;        // R, m
  double capture_dist = 0.1;  // m
  Vec3 center_offset{0.2, 0.0, 0.0};  // m, body frame
  int normal_axis = 0;                // body axis index of the disc normal
};

/// Per-step reward coefficients.
struct RewardCoeffs {
  double catch_ = 10.0;
  double dist = 0.001;
  double coll = 0.1;
  double fail = 30.0;
  double cmd = 2e-4;
  double bnd = 1.0;
};

/// Observation normalization constants.
struct ObsNorm {
  double k_p = 10.0;  // m, max range of view
  double k_v = 8.0;   // m/s, max velocity
};

/// Everything env_step needs, bundled.
struct EnvConfig {
  ArenaConfig arena;
  NetConfig net;
  QuadParams quad;
  RewardCoeffs rewards;
  ObsNorm obs;
};

struct AgentPhysical {
  RigidBodyState body;
  MotorState motors;
  DelayLine delay;
  Vec3 spawn_pos = Vec3::Zero();
};

/// One two-agent environment instance; the unit of batching.
struct WorldState {
  AgentPhysical pursuer;
  AgentPhysical evader;
  int step_count = 0;
  std::uint64_t rng_state = 0;
  Vec4 last_action_p = Vec4::Zero();
  Vec4 last_action_e = Vec4::Zero();
  bool done = false;

  const AgentPhysical& agent(AgentId id) const {
    return id == AgentId::Pursuer ? pursuer : evader;
  }
  AgentPhysical& agent(AgentId id) {
    return id == AgentId::Pursuer ? pursuer : evader;
  }
  const Vec4& last_action(AgentId id) const {
    return id == AgentId::Pursuer ? last_action_p : last_action_e;
  }
};

/// Per-agent reward terms, stored as magnitudes with the failure-masking rule
/// already applied; total() applies the role's composition signs.
struct RewardBreakdown {
  double catch_ = 0.0;
  double dist = 0.0;
  double coll = 0.0;
  double fail = 0.0;
  double cmd = 0.0;
  double bnd = 0.0;

  double total(AgentId role) const {
    return role == AgentId::Pursuer
               ? catch_ - dist - coll - fail - cmd
               : -catch_ + dist - coll - fail - cmd - bnd;
  }
};

enum class OutcomeKind { Catch, Timeout, PursuerCrash, EvaderCrash, DoubleCrash };

struct EpisodeOutcome {
  OutcomeKind kind = OutcomeKind::Timeout;
  double t_end = 0.0;
  double censored_time_to_catch = 0.0;
};

struct StepEvents {
  bool catch_ = false;
  bool contact = false;
  bool fail_pursuer = false;
  bool fail_evader = false;
  double net_dist = 0.0;         // evader to the net disc (capture), m
  double net_center_dist = 0.0;  // evader to the net centre (reward), m
};

struct StepResult {
  ObsVec obs_p;
  ObsVec obs_e;
  RewardBreakdown reward_p;
  RewardBreakdown reward_e;
  StepEvents events;
  bool done = false;
  std::optional<EpisodeOutcome> outcome;
};

/// Fresh episode: both agents uniform in the arena volume (z floored at
/// spawn_z_min), level attitude, zero velocity, hover motor state, with the
/// minimum initial separation enforced by rejection sampling.
WorldState reset(Rng& rng, const EnvConfig& cfg);

/// Distance from the evader's centre to the closed net disc, and whether it
/// is a capture. Symmetric in the disc side.
struct CaptureResult {
  bool captured = false;
  double dist = 0.0;
  Vec3 net_center = Vec3::Zero();
};
CaptureResult capture_check(const RigidBodyState& pursuer, const Vec3& p_evader,
                            const NetConfig& net);

/// Body-sphere contact test (closed condition at exactly 2 * body_radius).
bool collision_check(const RigidBodyState& a, const RigidBodyState& b,
                     const QuadParams& params);

/// Evader wall-proximity penalty: lambda_bnd * exp(-d/d_scale) under the
/// threshold, zero beyond it. d_bnd is the distance to the nearest inner-box
/// face from inside (zero outside the box).
double boundary_penalty(double d_bnd, const ArenaConfig& arena,
                        const RewardCoeffs& coeffs);

/// Distance from p to the nearest face of the inner box, 0 if outside.
double inner_boundary_distance(const Vec3& p, const ArenaConfig& arena);

/// Local observation of one agent: [v, vec(R), p_opp - p, v_opp - v,
/// six boundary distances], normalized by k_p / k_v and clamped to [-1, 1].
ObsVec observe(const WorldState& world, AgentId agent, const EnvConfig& cfg);

/// Critic input: both agents' absolute position/velocity/attitude plus the
/// opponent's action this step, normalized.
PrivObsVec observe_privileged(const WorldState& world, AgentId agent,
                              const Vec4& opp_action, const EnvConfig& cfg);

/// Reward terms for both agents given the post-step world, the actions taken
/// and the step's event flags. An opponent failure masks the survivor's
/// catch/dist signal; each agent's fail term applies only to itself.
std::pair<RewardBreakdown, RewardBreakdown> compute_rewards(
    const WorldState& world_after, const Vec4& action_p, const Vec4& action_e,
    const StepEvents& events, const EnvConfig& cfg);

/// Commanded body rates (rad/s) encoded by a normalized action.
Vec3 action_body_rates(const Vec4& action, const QuadParams& params);

/// Decode a normalized action in [-1,1]^4 into a low-level command.
LowLevelCommand decode_action(const Vec4& action, const QuadParams& params);

/// Inverse of decode_action (exact for in-range commands).
Vec4 encode_action(const LowLevelCommand& cmd, const QuadParams& params);

/// Advances the world by one control tick for both agents, then applies
/// capture / collision / failure / timeout logic and the reward terms.
/// Catch takes precedence over same-tick failures.
StepResult env_step(WorldState& world, const Vec4& action_p,
                    const Vec4& action_e, const EnvConfig& cfg);

}  // namespace pev
