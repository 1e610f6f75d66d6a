#include "pev/guidance.hpp"

namespace pev {

namespace {

constexpr double kDegenerateEps = 1e-6;

double wrap_pi(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace

LowLevelCommand se3_control(const RigidBodyState& state, const Reference& ref,
                            const Se3Gains& gains, const QuadParams& params) {
  const Vec3 a_des = ref.a_ref + gains.k_p.cwiseProduct(ref.p_ref - state.p) +
                     gains.k_v.cwiseProduct(ref.v_ref - state.v) +
                     Vec3(0.0, 0.0, params.gravity);

  // Thrust: projection of the demanded specific force on the current body z.
  // Floor keeps some control authority when the demand points away.
  const Vec3 body_z = state.R.col(2);
  const double thrust =
      std::max(a_des.dot(body_z), 0.05 * params.gravity);

  // Desired attitude: body z along a_des, heading from yaw_ref.
  Vec3 b3_des;
  if (a_des.norm() < kDegenerateEps) {
    b3_des = Vec3(0.0, 0.0, 1.0);  // level z, keep flying flat
  } else {
    b3_des = a_des.normalized();
  }
  const double yaw = a_des.norm() < kDegenerateEps
                         ? std::atan2(state.R(1, 0), state.R(0, 0))
                         : ref.yaw_ref;
  const Vec3 heading(std::cos(yaw), std::sin(yaw), 0.0);
  Vec3 b2_des = b3_des.cross(heading);
  if (b2_des.norm() < kDegenerateEps) {
    // a_des parallel to the heading; fall back to the current body y.
    b2_des = b3_des.cross(state.R.col(0));
  }
  b2_des.normalize();
  const Vec3 b1_des = b2_des.cross(b3_des);

  Mat3 R_des;
  R_des.col(0) = b1_des;
  R_des.col(1) = b2_des;
  R_des.col(2) = b3_des;

  const Vec3 e_R =
      0.5 * vee(R_des.transpose() * state.R - state.R.transpose() * R_des);
  const Vec3 omega_des = -gains.k_R.cwiseProduct(e_R);

  return LowLevelCommand::clamped(thrust, omega_des, params);
}

Reference pure_pursuit(const Vec3& p_self, const Vec3& p_tgt,
                       double chase_speed, double dt_control) {
  Reference ref;
  const Vec3 delta = p_tgt - p_self;
  const double dist = delta.norm();
  if (dist < kDegenerateEps) {
    ref.p_ref = p_self;
    return ref;
  }
  ref.v_ref = chase_speed * delta / dist;
  ref.p_ref = p_self + ref.v_ref * dt_control;
  ref.yaw_ref = wrap_pi(std::atan2(delta.y(), delta.x()));
  return ref;
}

Reference prop_nav(const RigidBodyState& state_self, const Vec3& p_tgt,
                   const Vec3& v_tgt, double nav_gain, double closing_speed,
                   const QuadParams& params, double dt_control) {
  Reference ref;
  const Vec3 r = p_tgt - state_self.p;
  const double range = r.norm();
  if (range < kDegenerateEps) {
    ref.p_ref = state_self.p;
    return ref;
  }
  const Vec3 u_los = r / range;
  const Vec3 v_rel = v_tgt - state_self.v;
  const double closing = -r.dot(v_rel) / range;           // Vc = -d|r|/dt
  const Vec3 omega_los = r.cross(v_rel) / (range * range);

  Vec3 a_cmd = nav_gain * closing * omega_los.cross(u_los);
  const double a_norm = a_cmd.norm();
  if (a_norm > params.max_thrust) {
    a_cmd *= params.max_thrust / a_norm;
  }

  ref.a_ref = a_cmd;
  ref.v_ref = closing_speed * u_los;
  ref.p_ref = state_self.p + ref.v_ref * dt_control;
  ref.yaw_ref = wrap_pi(std::atan2(r.y(), r.x()));
  return ref;
}

Reference apf_evader(const Vec3& p_self, const Vec3& v_self,
                     const Vec3& p_pursuer, const ArenaBox& arena,
                     const GuidanceConfig& cfg, double dt_control) {
  const double d0 = cfg.apf_influence_dist;
  const double cap = cfg.apf_accel_cap;

  auto repulsion = [&](double dist, const Vec3& away) -> Vec3 {
    if (dist >= d0) return Vec3::Zero();
    const double d = std::max(dist, 1e-9);
    double mag = cfg.apf_repulse_gain * (1.0 / d - 1.0 / d0) / (d * d);
    if (mag > cap) mag = cap;
    return mag * away;
  };

  Vec3 a = Vec3::Zero();
  const Vec3 from_pursuer = p_self - p_pursuer;
  a += repulsion(from_pursuer.norm(),
                 from_pursuer.norm() > kDegenerateEps
                     ? Vec3(from_pursuer.normalized())
                     : Vec3(0.0, 0.0, 1.0));
  a += repulsion(p_self.x(), Vec3(1.0, 0.0, 0.0));
  a += repulsion(arena.side - p_self.x(), Vec3(-1.0, 0.0, 0.0));
  a += repulsion(p_self.y(), Vec3(0.0, 1.0, 0.0));
  a += repulsion(arena.side - p_self.y(), Vec3(0.0, -1.0, 0.0));
  a += repulsion(p_self.z(), Vec3(0.0, 0.0, 1.0));
  a += repulsion(arena.height - p_self.z(), Vec3(0.0, 0.0, -1.0));

  const double a_norm = a.norm();
  if (a_norm > cap) a *= cap / a_norm;

  Reference ref;
  ref.a_ref = a;
  ref.v_ref = v_self + a * dt_control;
  ref.p_ref = p_self + ref.v_ref * dt_control;
  return ref;
}

Reference hover_ref(const Vec3& p_hold) {
  Reference ref;
  ref.p_ref = p_hold;
  return ref;
}

}  // namespace pev
