#pragma once

#include <array>
#include <vector>

#include "pev/types.hpp"

namespace pev {

/// Rigid-body state of one quadrotor. Position/velocity in world frame,
/// angular rates in body frame, R maps body -> world.
struct RigidBodyState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 omega = Vec3::Zero();

  bool finite() const {
    return is_finite(p) && is_finite(v) && is_finite(R) && is_finite(omega);
  }
};

struct MotorState {
  Vec4 rotor_speeds = Vec4::Zero();  // rad/s, each in [0, max_rotor_speed]
};

/// Physical and low-level-control parameters of the airframe.
/// Units are SI throughout; thrust limits are mass-normalized (m/s^2).
struct QuadParams {
  double mass = 0.75;                            // kg
  Vec3 inertia_diag{2.5e-3, 2.5e-3, 4.3e-3};     // kg m^2
  double arm_length = 0.12;                      // m, rotor distance from CoM
  double thrust_coeff = 4.5e-7;                  // N / (rad/s)^2
  double torque_coeff = 6.0e-9;                  // N m / (rad/s)^2
  Vec3 linear_drag_coeffs{0.3, 0.3, 0.4};        // 1/s per world axis
  double motor_time_constant = 0.03;             // s
  double max_rotor_speed = 4500.0;               // rad/s
  int command_delay_steps = 2;                   // physics ticks
  double body_radius = 0.15;                     // m, collision sphere
  double rate_gain = 20.0;                       // 1/s, body-rate P gain
  double gravity = kDefaultGravity;              // m/s^2

  double max_thrust = 4.0 * kDefaultGravity;     // m/s^2, mass-normalized
  double max_body_rate = 10.0;                   // rad/s per axis

  double physics_dt = 1e-3;                      // s, inner integration step
  int substeps_per_tick = 10;                    // physics steps per control tick

  double control_dt() const { return physics_dt * substeps_per_tick; }
  /// Rotor speed that balances gravity with all four motors equal.
  double hover_rotor_speed() const {
    return std::sqrt(mass * gravity / (4.0 * thrust_coeff));
  }
};

/// Mass-normalized collective thrust (m/s^2) plus desired body rates (rad/s).
struct LowLevelCommand {
  double thrust = 0.0;
  Vec3 omega_des = Vec3::Zero();

  /// Builds a command with the type invariants enforced by clamping.
  static LowLevelCommand clamped(double thrust, const Vec3& omega_des,
                                 const QuadParams& params) {
    LowLevelCommand c;
    c.thrust = clamp(thrust, 0.0, params.max_thrust);
    for (int i = 0; i < 3; ++i) {
      c.omega_des[i] =
          clamp(omega_des[i], -params.max_body_rate, params.max_body_rate);
    }
    return c;
  }

  static LowLevelCommand hover(const QuadParams& params) {
    return clamped(params.gravity, Vec3::Zero(), params);
  }
};

/// Fixed-length FIFO modelling command transmission delay at the physics rate.
/// Each physics substep pushes the newest command and reads the one issued
/// `delay` substeps earlier.
class DelayLine {
 public:
  DelayLine() : DelayLine(0, LowLevelCommand{}) {}
  DelayLine(int delay_steps, const LowLevelCommand& fill)
      : delay_(delay_steps), head_(0),
        buf_(static_cast<std::size_t>(delay_steps) + 1, fill) {}

  LowLevelCommand push_pop(const LowLevelCommand& cmd) {
    buf_[head_] = cmd;
    const int n = static_cast<int>(buf_.size());
    const LowLevelCommand out = buf_[(head_ - delay_ + n) % n];
    head_ = (head_ + 1) % n;
    return out;
  }

  int delay_steps() const { return delay_; }
  int size() const { return static_cast<int>(buf_.size()); }

  // Raw access for serialization.
  int head() const { return head_; }
  const std::vector<LowLevelCommand>& buffer() const { return buf_; }
  void restore(int head, std::vector<LowLevelCommand> buf) {
    head_ = head;
    buf_ = std::move(buf);
    delay_ = static_cast<int>(buf_.size()) - 1;
  }

 private:
  int delay_;
  int head_;
  std::vector<LowLevelCommand> buf_;
};

/// Rotor-speed setpoints solving the X-configuration mixer for the requested
/// collective thrust and the rate-loop torque demand. Infeasible demands are
/// absorbed by clamping to [0, max_rotor_speed].
Vec4 attitude_autopilot(const RigidBodyState& state, const LowLevelCommand& cmd,
                        const QuadParams& params);

/// Wrench produced by a set of rotor speeds: (total thrust N, body torque N m).
/// Inverse of the mixer, used for both the physics step and tests.
void rotor_wrench(const Vec4& rotor_speeds, const QuadParams& params,
                  double* thrust, Vec3* torque);

/// First-order motor lag with the exact discrete update factor exp(-dt/tau).
MotorState motor_step(const MotorState& motors, const Vec4& setpoints,
                      const QuadParams& params, double dt);

/// One semi-implicit Euler step of the rigid-body dynamics: gravity, body-z
/// rotor thrust, world-frame linear drag, mixer torques; attitude advanced by
/// the exponential map and re-orthonormalized.
RigidBodyState physics_step(const RigidBodyState& state,
                            const MotorState& motors, const QuadParams& params,
                            double dt);

/// One 100 Hz control tick: the command enters the delay line and
/// substeps_per_tick physics substeps run, each applying the delayed command
/// through autopilot -> motors -> rigid body.
void control_tick(RigidBodyState& state, MotorState& motors, DelayLine& delay,
                  const LowLevelCommand& cmd, const QuadParams& params);

}  // namespace pev
