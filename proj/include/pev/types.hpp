#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>

namespace pev {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

constexpr double kDefaultGravity = 9.81;

// Contract checks stay active in release builds; they guard cheap
// preconditions only (never hot inner loops).
#define PEV_ASSERT(cond, msg) \
  do { \
    if (!(cond)) { \
      std::fprintf(stderr, "contract violation: %s (%s:%d)\n", msg, __FILE__, \
                   __LINE__); \
      std::abort(); \
    } \
  } while (0)

inline bool is_finite(const Vec3& v) { return v.allFinite(); }
inline bool is_finite(const Mat3& m) { return m.allFinite(); }

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

/// Skew-symmetric matrix such that hat(a) * b == a x b.
inline Mat3 hat(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return m;
}

/// Inverse of hat() for (near-)skew-symmetric matrices.
inline Vec3 vee(const Mat3& m) {
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

/// Rotation matrix for a body-frame angular increment, via the exponential map.
inline Mat3 so3_exp(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const Mat3 k = hat(phi);
  if (theta2 < 1e-16) {
    // Second-order Taylor expansion; exact enough below the threshold.
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double theta = std::sqrt(theta2);
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / theta2;
  return Mat3::Identity() + a * k + b * k * k;
}

/// Projects a near-rotation matrix back onto SO(3).
/// Newton iteration for the polar factor; quadratic convergence makes two
/// passes plenty for the per-step drift seen here.
inline Mat3 orthonormalize(const Mat3& r) {
  Mat3 q = r;
  for (int i = 0; i < 2; ++i) {
    q = 0.5 * q * (3.0 * Mat3::Identity() - q.transpose() * q);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Deterministic RNG. splitmix64 streams keyed by explicit counters so any
// (seed, env, step) tuple regenerates the same draws; this is what makes
// batched rollouts and checkpoint resume reproducible.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  return splitmix64(s);
}

inline std::uint64_t hash_key(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
  return hash_mix(hash_mix(hash_mix(seed, a), b), c);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one value per call, no cached state).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace pev
