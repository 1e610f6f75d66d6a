#include "pev/dynamics.hpp"

namespace pev {

namespace {

// X configuration, body frame FLU (x forward, y left, z up).
// Rotor order: 0 front-left, 1 front-right, 2 rear-right, 3 rear-left.
// Diagonal pairs spin the same way; signs give the body yaw reaction torque.
constexpr double kSpinDir[4] = {+1.0, -1.0, +1.0, -1.0};
constexpr double kXSign[4] = {+1.0, +1.0, -1.0, -1.0};
constexpr double kYSign[4] = {+1.0, -1.0, -1.0, +1.0};

}  // namespace

Vec4 attitude_autopilot(const RigidBodyState& state, const LowLevelCommand& cmd,
                        const QuadParams& params) {
  const double total_thrust = params.mass * cmd.thrust;  // N
  const Vec3 torque = params.inertia_diag.cwiseProduct(
      params.rate_gain * (cmd.omega_des - state.omega));

  // Invert the allocation: f_i >= 0 rotor thrusts realizing (F, tau).
  const double d = params.arm_length / std::sqrt(2.0);
  const double kappa = params.torque_coeff / params.thrust_coeff;
  Vec4 setpoints;
  for (int i = 0; i < 4; ++i) {
    const double f = 0.25 * (total_thrust + torque.x() * kYSign[i] / d -
                             torque.y() * kXSign[i] / d +
                             torque.z() * kSpinDir[i] / kappa);
    const double w = f > 0.0 ? std::sqrt(f / params.thrust_coeff) : 0.0;
    setpoints[i] = clamp(w, 0.0, params.max_rotor_speed);
  }
  return setpoints;
}

void rotor_wrench(const Vec4& rotor_speeds, const QuadParams& params,
                  double* thrust, Vec3* torque) {
  const double d = params.arm_length / std::sqrt(2.0);
  double f_total = 0.0;
  Vec3 tau = Vec3::Zero();
  for (int i = 0; i < 4; ++i) {
    const double f = params.thrust_coeff * rotor_speeds[i] * rotor_speeds[i];
    f_total += f;
    tau.x() += d * kYSign[i] * f;
    tau.y() -= d * kXSign[i] * f;
    tau.z() += kSpinDir[i] * (params.torque_coeff / params.thrust_coeff) * f;
  }
  *thrust = f_total;
  *torque = tau;
}

MotorState motor_step(const MotorState& motors, const Vec4& setpoints,
                      const QuadParams& params, double dt) {
  const double alpha = std::exp(-dt / params.motor_time_constant);
  MotorState out;
  for (int i = 0; i < 4; ++i) {
    const double w = setpoints[i] + (motors.rotor_speeds[i] - setpoints[i]) * alpha;
    out.rotor_speeds[i] = clamp(w, 0.0, params.max_rotor_speed);
  }
  return out;
}

RigidBodyState physics_step(const RigidBodyState& state,
                            const MotorState& motors, const QuadParams& params,
                            double dt) {
  PEV_ASSERT(state.finite(), "physics_step: non-finite state");

  double thrust_n = 0.0;
  Vec3 torque;
  rotor_wrench(motors.rotor_speeds, params, &thrust_n, &torque);

  const Vec3 body_z_world = state.R.col(2);
  const Vec3 accel = Vec3(0.0, 0.0, -params.gravity) +
                     body_z_world * (thrust_n / params.mass) -
                     params.linear_drag_coeffs.cwiseProduct(state.v);

  const Vec3 inertia = params.inertia_diag;
  const Vec3 ang_mom = inertia.cwiseProduct(state.omega);
  const Vec3 omega_dot =
      (torque - state.omega.cross(ang_mom)).cwiseQuotient(inertia);

  RigidBodyState out;
  out.v = state.v + accel * dt;
  out.p = state.p + out.v * dt;
  out.omega = state.omega + omega_dot * dt;
  out.R = orthonormalize(state.R * so3_exp(out.omega * dt));
  return out;
}

void control_tick(RigidBodyState& state, MotorState& motors, DelayLine& delay,
                  const LowLevelCommand& cmd, const QuadParams& params) {
  for (int s = 0; s < params.substeps_per_tick; ++s) {
    const LowLevelCommand delayed = delay.push_pop(cmd);
    const Vec4 setpoints = attitude_autopilot(state, delayed, params);
    motors = motor_step(motors, setpoints, params, params.physics_dt);
    state = physics_step(state, motors, params, params.physics_dt);
  }
}

}  // namespace pev
