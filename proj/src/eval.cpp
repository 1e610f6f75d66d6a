#include "pev/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pev {

namespace {

AgentId opponent_of(AgentId role) {
  return role == AgentId::Pursuer ? AgentId::Evader : AgentId::Pursuer;
}

class HoverController final : public Controller {
 public:
  HoverController(const EnvConfig& env, const GuidanceConfig& guidance)
      : env_(env), guidance_(guidance) {}
  Vec4 act(const WorldState& world, AgentId role) const override {
    const AgentPhysical& self = world.agent(role);
    const LowLevelCommand cmd = se3_control(
        self.body, hover_ref(self.spawn_pos), guidance_.se3, env_.quad);
    return encode_action(cmd, env_.quad);
  }

 private:
  EnvConfig env_;
  GuidanceConfig guidance_;
};

class PurePursuitController final : public Controller {
 public:
  PurePursuitController(const EnvConfig& env, const GuidanceConfig& guidance)
      : env_(env), guidance_(guidance) {}
  Vec4 act(const WorldState& world, AgentId role) const override {
    const AgentPhysical& self = world.agent(role);
    const AgentPhysical& opp = world.agent(opponent_of(role));
    const Reference ref =
        pure_pursuit(self.body.p, opp.body.p, guidance_.pp_chase_speed,
                     env_.arena.dt_control);
    return encode_action(se3_control(self.body, ref, guidance_.se3, env_.quad),
                         env_.quad);
  }

 private:
  EnvConfig env_;
  GuidanceConfig guidance_;
};

class PropNavController final : public Controller {
 public:
  PropNavController(const EnvConfig& env, const GuidanceConfig& guidance)
      : env_(env), guidance_(guidance) {}
  Vec4 act(const WorldState& world, AgentId role) const override {
    const AgentPhysical& self = world.agent(role);
    const AgentPhysical& opp = world.agent(opponent_of(role));
    const Reference ref =
        prop_nav(self.body, opp.body.p, opp.body.v, guidance_.pn_nav_gain,
                 guidance_.pn_closing_speed, env_.quad, env_.arena.dt_control);
    return encode_action(se3_control(self.body, ref, guidance_.se3, env_.quad),
                         env_.quad);
  }

 private:
  EnvConfig env_;
  GuidanceConfig guidance_;
};

class ApfController final : public Controller {
 public:
  ApfController(const EnvConfig& env, const GuidanceConfig& guidance)
      : env_(env), guidance_(guidance) {}
  Vec4 act(const WorldState& world, AgentId role) const override {
    const AgentPhysical& self = world.agent(role);
    const AgentPhysical& opp = world.agent(opponent_of(role));
    const Reference ref =
        apf_evader(self.body.p, self.body.v, opp.body.p, env_.arena.box(),
                   guidance_, env_.arena.dt_control);
    return encode_action(se3_control(self.body, ref, guidance_.se3, env_.quad),
                         env_.quad);
  }

 private:
  EnvConfig env_;
  GuidanceConfig guidance_;
};

class PolicyController final : public Controller {
 public:
  PolicyController(MlpParams params, const EnvConfig& env)
      : params_(std::move(params)), env_(env) {
    if (params_.input_dim() != kObsDim ||
        params_.output_dim() != 2 * kActionDim) {
      throw std::runtime_error(
          "policy checkpoint dimensions do not match this environment "
          "(expected " +
          std::to_string(kObsDim) + " -> " + std::to_string(2 * kActionDim) +
          ", got " + std::to_string(params_.input_dim()) + " -> " +
          std::to_string(params_.output_dim()) + ")");
    }
  }

  Vec4 act(const WorldState& world, AgentId role) const override {
    const ObsVec obs = observe(world, role, env_);
    const MatX head = mlp_forward(params_, obs);
    Vec4 action;
    for (int d = 0; d < kActionDim; ++d) action[d] = std::tanh(head(d, 0));
    return action;
  }

  void act_batch(const std::vector<const WorldState*>& worlds, AgentId role,
                 MatX& out) const override {
    const int n = static_cast<int>(worlds.size());
    MatX obs(kObsDim, n);
    for (int i = 0; i < n; ++i)
      obs.col(i) = observe(*worlds[i], role, env_);
    const MatX head = mlp_forward(params_, obs);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < kActionDim; ++d) out(d, i) = std::tanh(head(d, i));
  }

 private:
  MlpParams params_;
  EnvConfig env_;
};

std::string format_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string format_time(double v) {
  if (std::isnan(v)) return "—";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void Controller::act_batch(const std::vector<const WorldState*>& worlds,
                           AgentId role, MatX& out) const {
  for (std::size_t i = 0; i < worlds.size(); ++i)
    out.col(static_cast<int>(i)) = act(*worlds[i], role);
}

AgentSpec AgentSpec::parse(const std::string& text) {
  AgentSpec spec;
  if (text == "pp") {
    spec.kind = AgentKind::PurePursuit;
  } else if (text == "pn") {
    spec.kind = AgentKind::PropNav;
  } else if (text == "apf") {
    spec.kind = AgentKind::Apf;
  } else if (text == "hover") {
    spec.kind = AgentKind::Hover;
  } else if (text.rfind("policy:", 0) == 0) {
    spec.kind = AgentKind::PolicyCheckpoint;
    spec.checkpoint_path = text.substr(7);
  } else {
    throw std::invalid_argument(
        "unknown agent spec '" + text +
        "' (expected pp, pn, apf, hover, or policy:<path>)");
  }
  return spec;
}

std::string AgentSpec::label() const {
  switch (kind) {
    case AgentKind::PurePursuit: return "PP";
    case AgentKind::PropNav: return "PN";
    case AgentKind::Apf: return "APF";
    case AgentKind::Hover: return "Hover";
    case AgentKind::PolicyCheckpoint: return "DRL";
  }
  return "?";
}

bool valid_for_role(const AgentSpec& spec, AgentId role) {
  switch (spec.kind) {
    case AgentKind::Hover:
    case AgentKind::Apf:
      return role == AgentId::Evader;
    case AgentKind::PurePursuit:
    case AgentKind::PropNav:
      return role == AgentId::Pursuer;
    case AgentKind::PolicyCheckpoint:
      return true;
  }
  return false;
}

std::unique_ptr<Controller> make_controller(const AgentSpec& spec,
                                            const EnvConfig& env,
                                            const GuidanceConfig& guidance) {
  switch (spec.kind) {
    case AgentKind::Hover:
      return std::make_unique<HoverController>(env, guidance);
    case AgentKind::PurePursuit:
      return std::make_unique<PurePursuitController>(env, guidance);
    case AgentKind::PropNav:
      return std::make_unique<PropNavController>(env, guidance);
    case AgentKind::Apf:
      return std::make_unique<ApfController>(env, guidance);
    case AgentKind::PolicyCheckpoint:
      return std::make_unique<PolicyController>(
          load_mlp_file(spec.checkpoint_path), env);
  }
  throw std::logic_error("unreachable agent kind");
}

MatchupReport aggregate_outcomes(const std::vector<EpisodeOutcome>& outcomes) {
  MatchupReport report;
  report.n_episodes = static_cast<int>(outcomes.size());
  PEV_ASSERT(report.n_episodes >= 1, "aggregate_outcomes: empty batch");

  double ttc_sum = 0.0;
  for (const EpisodeOutcome& outcome : outcomes) {
    switch (outcome.kind) {
      case OutcomeKind::Catch: report.n_catch++; break;
      case OutcomeKind::Timeout: report.n_timeout++; break;
      case OutcomeKind::PursuerCrash: report.n_pursuer_crash++; break;
      case OutcomeKind::EvaderCrash: report.n_evader_crash++; break;
      case OutcomeKind::DoubleCrash: report.n_double_crash++; break;
    }
    ttc_sum += outcome.censored_time_to_catch;
  }

  const int n = report.n_episodes;
  const double pct = 100.0 / n;
  report.catch_rate = pct * report.n_catch;
  report.timeout_share = pct * report.n_timeout;
  report.crash_pursuer = pct * report.n_pursuer_crash;
  report.crash_evader = pct * report.n_evader_crash;
  report.crash_double = pct * report.n_double_crash;
  report.evade_rate = pct * (report.n_timeout + report.n_pursuer_crash);
  report.time_to_catch_mean = ttc_sum / n;
  if (n > 1) {
    double sq = 0.0;
    for (const EpisodeOutcome& outcome : outcomes) {
      const double d = outcome.censored_time_to_catch - report.time_to_catch_mean;
      sq += d * d;
    }
    report.time_to_catch_std = std::sqrt(sq / (n - 1));
  } else {
    report.time_to_catch_std = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

MatchupReport run_matchup(const AgentSpec& pursuer, const AgentSpec& evader,
                          const EnvConfig& env, const GuidanceConfig& guidance,
                          int n_episodes, std::uint64_t seed,
                          const EpisodeSink& sink) {
  PEV_ASSERT(n_episodes >= 1, "run_matchup: need at least one episode");
  if (!valid_for_role(pursuer, AgentId::Pursuer)) {
    throw std::invalid_argument("agent '" + pursuer.label() +
                                "' cannot play the pursuer role");
  }
  if (!valid_for_role(evader, AgentId::Evader)) {
    throw std::invalid_argument("agent '" + evader.label() +
                                "' cannot play the evader role");
  }
  const auto ctrl_p = make_controller(pursuer, env, guidance);
  const auto ctrl_e = make_controller(evader, env, guidance);

  std::vector<EpisodeOutcome> outcomes;
  outcomes.reserve(n_episodes);

  constexpr int kBatch = 128;
  std::vector<WorldState> worlds;
  std::vector<int> alive;
  std::vector<const WorldState*> alive_ptrs;
  MatX actions_p(kActionDim, kBatch), actions_e(kActionDim, kBatch);

  for (int start = 0; start < n_episodes; start += kBatch) {
    const int n = std::min(kBatch, n_episodes - start);
    worlds.clear();
    alive.clear();
    for (int i = 0; i < n; ++i) {
      Rng rng(hash_key(seed, kEpisodeStream, start + i));
      worlds.push_back(reset(rng, env));
      alive.push_back(i);
    }
    while (!alive.empty()) {
      alive_ptrs.clear();
      for (int k : alive) alive_ptrs.push_back(&worlds[k]);
      ctrl_p->act_batch(alive_ptrs, AgentId::Pursuer, actions_p);
      ctrl_e->act_batch(alive_ptrs, AgentId::Evader, actions_e);
      std::vector<int> next_alive;
      for (std::size_t k = 0; k < alive.size(); ++k) {
        WorldState& world = worlds[alive[k]];
        const StepResult sr =
            env_step(world, actions_p.col(static_cast<int>(k)),
                     actions_e.col(static_cast<int>(k)), env);
        if (!sr.done) {
          next_alive.push_back(alive[k]);
          continue;
        }
        outcomes.push_back(*sr.outcome);
        if (sink) sink(start + alive[k], *sr.outcome);
      }
      alive = std::move(next_alive);
    }
  }

  MatchupReport report = aggregate_outcomes(outcomes);
  report.pursuer_label = pursuer.label();
  report.evader_label = evader.label();
  return report;
}

std::string format_report(const MatchupGrid& grid) {
  std::ostringstream os;
  auto row = [&](const std::string& label,
                 const std::vector<MatchupReport>& reports,
                 double MatchupReport::*field, bool time) {
    os << "  ";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%-22s", label.c_str());
    os << buf;
    for (const MatchupReport& r : reports) {
      const std::string cell =
          time ? format_time(r.*field) : format_pct(r.*field);
      std::snprintf(buf, sizeof(buf), "%10s", cell.c_str());
      os << buf;
    }
    os << "\n";
  };

  for (const auto& [pursuer_label, reports] : grid.rows) {
    os << "Pursuer: " << pursuer_label << "  (" << reports.front().n_episodes
       << " episodes per pairing)\n";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "  %-22s", "Evader");
    os << buf;
    for (const std::string& e : grid.evader_labels) {
      std::snprintf(buf, sizeof(buf), "%10s", e.c_str());
      os << buf;
    }
    os << "\n";
    row("Catch rate (%)", reports, &MatchupReport::catch_rate, false);
    row("Evade rate (%)", reports, &MatchupReport::evade_rate, false);
    row(" of which timeout", reports, &MatchupReport::timeout_share, false);
    row("Crash pursuer (%)", reports, &MatchupReport::crash_pursuer, false);
    row("Crash evader (%)", reports, &MatchupReport::crash_evader, false);
    row("Crash double (%)", reports, &MatchupReport::crash_double, false);
    row("Time to catch mean (s)", reports, &MatchupReport::time_to_catch_mean,
        true);
    row("Time to catch std (s)", reports, &MatchupReport::time_to_catch_std,
        true);
    os << "\n";
  }
  return os.str();
}

std::string report_csv_header() {
  return "pursuer,evader,n_episodes,catch_rate,evade_rate,timeout_share,"
         "crash_pursuer,crash_evader,crash_double,time_to_catch_mean,"
         "time_to_catch_std";
}

std::string report_csv_row(const MatchupReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.1f,%.1f,%.1f,%.1f,%.1f,%.1f,%.2f,",
                r.pursuer_label.c_str(), r.evader_label.c_str(), r.n_episodes,
                r.catch_rate, r.evade_rate, r.timeout_share, r.crash_pursuer,
                r.crash_evader, r.crash_double, r.time_to_catch_mean);
  std::string row(buf);
  if (std::isnan(r.time_to_catch_std)) {
    return row;  // empty trailing field for an undefined std
  }
  std::snprintf(buf, sizeof(buf), "%.2f", r.time_to_catch_std);
  return row + buf;
}

}  // namespace pev
