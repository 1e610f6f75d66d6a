// pev: batched quadrotor pursuit-evasion simulator, PPO self-play trainer and
// matchup evaluation harness. Subcommands: train, eval, rollout, export-plots.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pev/config.hpp"
#include "pev/eval.hpp"
#include "pev/ppo.hpp"
#include "pev/trajectory.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string arena;  // empty = not given on the command line
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

/// Resolution order: preset defaults < config file < command-line flags.
/// The output directory is rooted at $PEV_OUTPUT_ROOT when relative.
pev::RunConfig resolve_config(const CommonOptions& opts) {
  pev::RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = pev::load_run_config(opts.config_path);
    if (!opts.arena.empty() && opts.arena != cfg.arena_preset) {
      pev::RunConfig preset = pev::preset_by_name(opts.arena);
      cfg.arena_preset = preset.arena_preset;
      cfg.env.arena = preset.env.arena;
      cfg.env.obs.k_p = preset.env.obs.k_p;
    }
  } else {
    cfg = pev::preset_by_name(opts.arena.empty() ? "small" : opts.arena);
  }
  if (opts.seed_set) cfg.seed = opts.seed;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;

  fs::path out(cfg.out_dir);
  if (out.is_relative()) {
    if (const char* root = std::getenv("PEV_OUTPUT_ROOT")) {
      out = fs::path(root) / out;
    }
  }
  cfg.out_dir = out.string();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--arena", opts.arena, "Arena preset: small or large")
      ->check(CLI::IsMember({"small", "large", "custom"}));
  cmd->add_option("--config", opts.config_path,
                  "JSON config file (comments allowed); flags override it");
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--seed", opts.seed, "RNG seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
}

int cmd_train(const CommonOptions& opts, const std::string& mode_name,
              std::optional<double> total_steps, const std::string& resume,
              std::optional<int> n_envs, std::optional<int> rollout_len,
              std::optional<int> hidden) {
  pev::RunConfig cfg = resolve_config(opts);
  if (total_steps) cfg.ppo.total_steps = *total_steps;
  if (n_envs) cfg.ppo.n_envs = *n_envs;
  if (rollout_len) cfg.ppo.rollout_len = *rollout_len;
  if (hidden) cfg.ppo.hidden_units = *hidden;

  pev::OpponentMode mode;
  if (mode_name == "selfplay") {
    mode = pev::OpponentMode::SelfPlay;
  } else if (mode_name == "vs-hover") {
    mode = pev::OpponentMode::FrozenHover;
  } else {
    std::fprintf(stderr, "error: unknown mode '%s' (selfplay or vs-hover)\n",
                 mode_name.c_str());
    return 2;
  }

  pev::write_resolved_config(cfg, cfg.out_dir);
  std::printf("training: arena=%s mode=%s seed=%llu total_steps=%.3g out=%s\n",
              cfg.arena_preset.c_str(), mode_name.c_str(),
              static_cast<unsigned long long>(cfg.seed), cfg.ppo.total_steps,
              cfg.out_dir.c_str());

  pev::TrainOptions train_opts;
  train_opts.out_dir = cfg.out_dir;
  train_opts.resume_from = resume;
  train_opts.on_iteration = [](const pev::IterationStats& st) {
    std::printf(
        "iter %5ld  steps %10ld  ret_P %8.2f  ret_E %8.2f  len %6.1f  "
        "catch %5.1f%%  endd %5.2f  vloss %8.2f  kl %.4f  clip %.2f  "
        "lstd %5.2f  gp %6.3f gv %6.3f  sps %.0f\n",
        st.iteration, st.env_steps, st.mean_return_p, st.mean_return_e,
        st.mean_ep_len, 100.0 * st.catch_rate, st.mean_final_net_dist,
        st.loss_p.value_loss, st.loss_p.approx_kl, st.loss_p.clip_fraction,
        st.loss_p.mean_log_std, st.loss_p.policy_grad_norm,
        st.loss_p.value_grad_norm, st.steps_per_second);
    std::fflush(stdout);
    return true;
  };
  pev::train_selfplay(cfg.env, cfg.guidance, cfg.ppo, mode, cfg.seed,
                      train_opts);
  std::printf("done; metrics and checkpoints in %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_eval(const CommonOptions& opts, const std::string& pursuer_text,
             const std::string& evader_text, int n_episodes,
             const std::string& episodes_out) {
  pev::RunConfig cfg = resolve_config(opts);
  const pev::AgentSpec pursuer = pev::AgentSpec::parse(pursuer_text);
  const pev::AgentSpec evader = pev::AgentSpec::parse(evader_text);
  pev::write_resolved_config(cfg, cfg.out_dir);

  std::optional<std::ofstream> episodes_file;
  pev::EpisodeSink sink;
  if (!episodes_out.empty()) {
    episodes_file.emplace(fs::path(cfg.out_dir) / episodes_out);
    sink = [&](int episode, const pev::EpisodeOutcome& outcome) {
      static const char* kKinds[] = {"catch", "timeout", "pursuer_crash",
                                     "evader_crash", "double_crash"};
      (*episodes_file) << "{\"episode\":" << episode << ",\"outcome\":\""
                       << kKinds[static_cast<int>(outcome.kind)]
                       << "\",\"t_end\":" << outcome.t_end
                       << ",\"censored_time_to_catch\":"
                       << outcome.censored_time_to_catch << "}\n";
    };
  }

  const pev::MatchupReport report = pev::run_matchup(
      pursuer, evader, cfg.env, cfg.guidance, n_episodes, cfg.seed, sink);

  pev::MatchupGrid grid;
  grid.evader_labels = {report.evader_label};
  grid.rows.push_back({report.pursuer_label, {report}});
  const std::string table = pev::format_report(grid);
  std::fputs(table.c_str(), stdout);

  std::ofstream txt(fs::path(cfg.out_dir) / "report.txt");
  txt << table;
  std::ofstream csv(fs::path(cfg.out_dir) / "report.csv");
  csv << pev::report_csv_header() << "\n" << pev::report_csv_row(report) << "\n";
  std::printf("report written to %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_rollout(const CommonOptions& opts, const std::string& pursuer_text,
                const std::string& evader_text) {
  pev::RunConfig cfg = resolve_config(opts);
  const pev::AgentSpec pursuer_spec = pev::AgentSpec::parse(pursuer_text);
  const pev::AgentSpec evader_spec = pev::AgentSpec::parse(evader_text);
  if (!pev::valid_for_role(pursuer_spec, pev::AgentId::Pursuer))
    throw std::invalid_argument("agent cannot play the pursuer role");
  if (!pev::valid_for_role(evader_spec, pev::AgentId::Evader))
    throw std::invalid_argument("agent cannot play the evader role");
  pev::write_resolved_config(cfg, cfg.out_dir);

  const auto ctrl_p = pev::make_controller(pursuer_spec, cfg.env, cfg.guidance);
  const auto ctrl_e = pev::make_controller(evader_spec, cfg.env, cfg.guidance);

  const fs::path traj_path = fs::path(cfg.out_dir) / "trajectory.jsonl";
  pev::TrajectoryWriter writer(traj_path.string(), cfg.seed, cfg.arena_preset,
                               cfg.env.arena.dt_control);

  pev::Rng rng(pev::hash_key(cfg.seed, pev::kEpisodeStream, 0));
  pev::WorldState world = pev::reset(rng, cfg.env);
  pev::EpisodeOutcome outcome;
  int steps = 0;
  while (!world.done) {
    const pev::Vec4 a_p = ctrl_p->act(world, pev::AgentId::Pursuer);
    const pev::Vec4 a_e = ctrl_e->act(world, pev::AgentId::Evader);
    const pev::StepResult sr = pev::env_step(world, a_p, a_e, cfg.env);
    steps += 1;
    writer.append(pev::make_trajectory_record(
        world, steps * cfg.env.arena.dt_control, a_p, a_e, sr.events));
    if (sr.done) outcome = *sr.outcome;
  }

  static const char* kKinds[] = {"Catch", "Timeout", "PursuerCrash",
                                 "EvaderCrash", "DoubleCrash"};
  std::printf("outcome=%s t_end=%.2fs censored_time_to_catch=%.2fs steps=%d\n",
              kKinds[static_cast<int>(outcome.kind)], outcome.t_end,
              outcome.censored_time_to_catch, steps);
  std::printf("trajectory written to %s\n", traj_path.c_str());
  return 0;
}

int cmd_export_plots(const std::string& metrics_path,
                     const std::string& trajectory_path,
                     const std::string& out_dir) {
  if (metrics_path.empty() && trajectory_path.empty()) {
    std::fprintf(stderr,
                 "error: nothing to export (pass --metrics and/or "
                 "--trajectory)\n");
    return 2;
  }
  fs::create_directories(out_dir);

  if (!metrics_path.empty()) {
    std::ifstream is(metrics_path);
    if (!is) {
      std::fprintf(stderr, "error: cannot open metrics file: %s\n",
                   metrics_path.c_str());
      return 2;
    }
    std::ofstream returns(fs::path(out_dir) / "returns.csv");
    std::ofstream lengths(fs::path(out_dir) / "episode_length.csv");
    returns << "iteration,env_steps,agent,mean_return\n";
    lengths << "iteration,env_steps,mean_ep_len\n";
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string iter, steps, ret_p, ret_e, len, rest;
      std::getline(ss, iter, ',');
      std::getline(ss, steps, ',');
      std::getline(ss, ret_p, ',');
      std::getline(ss, ret_e, ',');
      std::getline(ss, len, ',');
      returns << iter << ',' << steps << ",pursuer," << ret_p << "\n";
      returns << iter << ',' << steps << ",evader," << ret_e << "\n";
      lengths << iter << ',' << steps << ',' << len << "\n";
    }
    std::printf("wrote %s and %s\n",
                (fs::path(out_dir) / "returns.csv").c_str(),
                (fs::path(out_dir) / "episode_length.csv").c_str());
  }

  if (!trajectory_path.empty()) {
    if (!fs::exists(trajectory_path)) {
      std::fprintf(stderr, "error: cannot open trajectory file: %s\n",
                   trajectory_path.c_str());
      return 2;
    }
    const pev::TrajectoryFile traj = pev::read_trajectory(trajectory_path);
    for (const char* agent : {"pursuer", "evader"}) {
      std::ofstream os(fs::path(out_dir) /
                       (std::string("trajectory_") + agent + ".csv"));
      os << "t,x,y,z\n";
      char buf[128];
      for (const pev::TrajectoryRecord& r : traj.records) {
        const pev::TrajectoryAgentRecord& a =
            std::string(agent) == "pursuer" ? r.pursuer : r.evader;
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f\n", r.t, a.p.x(),
                      a.p.y(), a.p.z());
        os << buf;
      }
    }
    std::printf("wrote per-agent xyz series under %s\n", out_dir.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadrotor pursuit-evasion: simulator, PPO self-play trainer, "
               "and matchup evaluation"};
  app.require_subcommand(1);

  // train
  CommonOptions train_common;
  std::string train_mode = "selfplay";
  std::optional<double> train_total_steps;
  std::optional<int> train_n_envs, train_rollout, train_hidden;
  std::string train_resume;
  CLI::App* train = app.add_subcommand("train", "Train policies with PPO");
  add_common(train, train_common);
  train->add_option("--mode", train_mode,
                    "selfplay (both agents) or vs-hover (frozen evader)");
  train->add_option("--total-steps", train_total_steps,
                    "Environment steps to train for");
  train->add_option("--n-envs", train_n_envs, "Parallel environments");
  train->add_option("--rollout-len", train_rollout, "Rollout length");
  train->add_option("--hidden", train_hidden, "Hidden units per layer");
  train->add_option("--resume", train_resume,
                    "Resume from a trainer_state.bin");

  // eval
  CommonOptions eval_common;
  std::string eval_pursuer, eval_evader, eval_episodes_out;
  int eval_n = 1000;
  CLI::App* eval = app.add_subcommand("eval", "Run a matchup and report");
  add_common(eval, eval_common);
  eval->add_option("--pursuer", eval_pursuer,
                   "pp | pn | policy:<checkpoint>")->required();
  eval->add_option("--evader", eval_evader,
                   "hover | apf | policy:<checkpoint>")->required();
  eval->add_option("-n,--episodes", eval_n, "Number of episodes");
  eval->add_option("--episodes-out", eval_episodes_out,
                   "Optional per-episode JSONL dump (relative to --out)");

  // rollout
  CommonOptions rollout_common;
  std::string rollout_pursuer, rollout_evader;
  CLI::App* rollout =
      app.add_subcommand("rollout", "Record one episode as JSONL");
  add_common(rollout, rollout_common);
  rollout->add_option("--pursuer", rollout_pursuer, "pp | pn | policy:<path>")
      ->required();
  rollout->add_option("--evader", rollout_evader, "hover | apf | policy:<path>")
      ->required();

  // export-plots
  std::string plots_metrics, plots_trajectory, plots_out = "plots";
  CLI::App* plots = app.add_subcommand(
      "export-plots", "Convert metrics/trajectories to plot-ready CSV");
  plots->add_option("--metrics", plots_metrics, "metrics.csv from train");
  plots->add_option("--trajectory", plots_trajectory,
                    "trajectory.jsonl from rollout");
  plots->add_option("--out", plots_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return cmd_train(train_common, train_mode, train_total_steps,
                       train_resume, train_n_envs, train_rollout, train_hidden);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_common, eval_pursuer, eval_evader, eval_n,
                      eval_episodes_out);
    }
    if (rollout->parsed()) {
      return cmd_rollout(rollout_common, rollout_pursuer, rollout_evader);
    }
    if (plots->parsed()) {
      return cmd_export_plots(plots_metrics, plots_trajectory, plots_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
