#pragma once

#include "pev/dynamics.hpp"
#include "pev/types.hpp"

namespace pev {

/// High-level tracking reference, world frame.
struct Reference {
  Vec3 p_ref = Vec3::Zero();
  Vec3 v_ref = Vec3::Zero();
  Vec3 a_ref = Vec3::Zero();
  double yaw_ref = 0.0;  // rad, in (-pi, pi]
};

struct Se3Gains {
  Vec3 k_p{6.0, 6.0, 6.0};  // 1/s^2
  Vec3 k_v{4.0, 4.0, 4.0};  // 1/s
  Vec3 k_R{8.0, 8.0, 8.0};  // 1/s
};

/// Constants for the heuristic agents, config-overridable.
struct GuidanceConfig {
  Se3Gains se3;
  double pp_chase_speed = 5.0;      // m/s
  double pn_nav_gain = 3.0;         // dimensionless N
  double pn_closing_speed = 5.0;    // m/s, axial drive (PN alone has none)
  double apf_influence_dist = 3.0;  // m, d0
  double apf_repulse_gain = 8.0;    // m^3/s^2, k_rep
  double apf_accel_cap = 2.0 * kDefaultGravity;  // m/s^2
};

/// Geometric tracking controller on SE(3): position/velocity feedback plus
/// gravity compensation sets the desired specific force; thrust is its
/// projection on the current body z, body rates come from the attitude error
/// towards the (a_des, yaw_ref) frame.
LowLevelCommand se3_control(const RigidBodyState& state, const Reference& ref,
                            const Se3Gains& gains, const QuadParams& params);

/// Straight-line chase at constant speed towards the target position.
Reference pure_pursuit(const Vec3& p_self, const Vec3& p_tgt,
                       double chase_speed, double dt_control);

/// True 3D proportional navigation: lateral acceleration N * Vc * (Omega x u)
/// orthogonal to the line of sight, plus a constant-speed closing drive along
/// it. Gravity compensation is left to se3_control downstream.
Reference prop_nav(const RigidBodyState& state_self, const Vec3& p_tgt,
                   const Vec3& v_tgt, double nav_gain, double closing_speed,
                   const QuadParams& params, double dt_control);

/// Arena box the heuristics need to know about (faces at 0..side, 0..height).
struct ArenaBox {
  double side = 8.0;
  double height = 5.0;
};

/// Repulsive potential-field evader: pushed away from the pursuer and from
/// all six arena faces, each source active inside the influence distance.
Reference apf_evader(const Vec3& p_self, const Vec3& v_self,
                     const Vec3& p_pursuer, const ArenaBox& arena,
                     const GuidanceConfig& cfg, double dt_control);

/// Hold a fixed position.
Reference hover_ref(const Vec3& p_hold);

}  // namespace pev
