#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "pev/arena.hpp"

namespace pev {

/// Unit quaternion as (w, x, y, z).
Vec4 quat_from_rotation(const Mat3& R);
Mat3 rotation_from_quat(const Vec4& q);

struct TrajectoryAgentRecord {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec4 q = Vec4(1.0, 0.0, 0.0, 0.0);  // (w, x, y, z)
  Vec4 action = Vec4::Zero();
};

/// One control tick of an episode: post-step state of both agents, the
/// actions that produced it, and the event flags raised this tick.
struct TrajectoryRecord {
  double t = 0.0;
  TrajectoryAgentRecord pursuer;
  TrajectoryAgentRecord evader;
  bool catch_ = false;
  bool contact = false;
  bool fail_pursuer = false;
  bool fail_evader = false;
};

/// JSONL trajectory file: one header line (version, seed, arena preset),
/// then one self-contained record per line.
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::string& path, std::uint64_t seed,
                   const std::string& arena_preset, double dt_control);
  ~TrajectoryWriter();
  void append(const TrajectoryRecord& record);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct TrajectoryFile {
  int version = 0;
  std::uint64_t seed = 0;
  std::string arena_preset;
  double dt_control = 0.0;
  std::vector<TrajectoryRecord> records;
};

/// Parses a JSONL trajectory. Lines are independent; a truncated final line
/// is dropped rather than failing the whole file.
TrajectoryFile read_trajectory(const std::string& path);

TrajectoryRecord make_trajectory_record(const WorldState& world, double t,
                                        const Vec4& action_p,
                                        const Vec4& action_e,
                                        const StepEvents& events);

}  // namespace pev
