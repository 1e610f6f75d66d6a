#pragma once

#include <string>

#include "pev/arena.hpp"
#include "pev/guidance.hpp"
#include "pev/ppo.hpp"

namespace pev {

/// Full run configuration: arena preset (or custom), airframe, net, rewards,
/// observation normalization, guidance constants, PPO hyperparameters.
struct RunConfig {
  std::string arena_preset = "small";  // small | large | custom
  EnvConfig env;
  GuidanceConfig guidance;
  PpoConfig ppo;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
};

/// 8x8x5 arena, evader volume 6x6x4, k_p = 10 m.
RunConfig preset_small();
/// 40x40x14 arena, evader volume 20x20x4, k_p = 40 m.
RunConfig preset_large();
RunConfig preset_by_name(const std::string& name);

/// Loads a commented JSON config. Missing fields keep the preset defaults
/// (the preset is chosen by the file's "arena_preset" field).
RunConfig load_run_config(const std::string& path);

/// Structural invariants: positive physical constants, inner box inside the
/// arena, clip in (0,1). Throws std::runtime_error with the offending field.
void validate_run_config(const RunConfig& cfg);

/// Serializes the fully resolved configuration (canonical JSON, every field).
std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json_text(const std::string& text);

/// Writes json text to `<out_dir>/resolved_config.json`.
void write_resolved_config(const RunConfig& cfg, const std::string& out_dir);

}  // namespace pev
