#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pev/arena.hpp"
#include "pev/guidance.hpp"
#include "pev/nn.hpp"

namespace pev {

enum class AgentKind { PolicyCheckpoint, PurePursuit, PropNav, Apf, Hover };

/// One side of a matchup. Hover/APF are evader-only, PP/PN pursuer-only;
/// learned policies can play either role.
struct AgentSpec {
  AgentKind kind = AgentKind::Hover;
  std::string checkpoint_path;  // PolicyCheckpoint only

  static AgentSpec parse(const std::string& text);
  std::string label() const;
};

bool valid_for_role(const AgentSpec& spec, AgentId role);

/// Maps a world to a normalized action for one agent each control tick.
/// Heuristics read the opponent's position/velocity from the world and are
/// wrapped through the SE(3) controller; policies act on their observation.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual Vec4 act(const WorldState& world, AgentId role) const = 0;
  virtual void act_batch(const std::vector<const WorldState*>& worlds,
                         AgentId role, MatX& out) const;
};

std::unique_ptr<Controller> make_controller(const AgentSpec& spec,
                                            const EnvConfig& env,
                                            const GuidanceConfig& guidance);

/// Outcome statistics of one pursuer x evader pairing.
/// Percentages; evade rate counts timeouts and pursuer-alone crashes, so
/// catch + evade + evader crash + double crash partitions 100%.
struct MatchupReport {
  std::string pursuer_label;
  std::string evader_label;
  int n_episodes = 0;
  int n_catch = 0, n_timeout = 0, n_pursuer_crash = 0, n_evader_crash = 0,
      n_double_crash = 0;
  double catch_rate = 0.0;
  double evade_rate = 0.0;
  double timeout_share = 0.0;
  double crash_pursuer = 0.0;
  double crash_evader = 0.0;
  double crash_double = 0.0;
  double time_to_catch_mean = 0.0;  // right-censored, s
  double time_to_catch_std = 0.0;   // NaN when fewer than two episodes
};

using EpisodeSink = std::function<void(int episode, const EpisodeOutcome&)>;

/// RNG stream tag for matchup/rollout episodes: episode i of a run with seed
/// s resets from Rng(hash_key(s, kEpisodeStream, i)). Shared with the CLI's
/// single-episode rollout (episode 0) so logged episodes replay exactly.
inline constexpr std::uint64_t kEpisodeStream = 11;

/// Folds a set of episode outcomes into the report statistics (the metric
/// protocol: censored times over all episodes, evade rate = timeouts +
/// pursuer-alone crashes).
MatchupReport aggregate_outcomes(const std::vector<EpisodeOutcome>& outcomes);

/// Runs n seeded independent episodes (batched) and aggregates the outcome
/// taxonomy and the censored time-to-catch statistics over all of them.
MatchupReport run_matchup(const AgentSpec& pursuer, const AgentSpec& evader,
                          const EnvConfig& env, const GuidanceConfig& guidance,
                          int n_episodes, std::uint64_t seed,
                          const EpisodeSink& sink = nullptr);

struct MatchupGrid {
  std::vector<std::string> evader_labels;
  // One row per pursuer mode; rows[i][j] pairs pursuer i with evader j.
  std::vector<std::pair<std::string, std::vector<MatchupReport>>> rows;
};

/// Aligned text table, one block per pursuer mode (percentages to one
/// decimal, times to two; undefined std renders as an em dash).
std::string format_report(const MatchupGrid& grid);

std::string report_csv_header();
std::string report_csv_row(const MatchupReport& report);

}  // namespace pev
