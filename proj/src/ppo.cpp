#include "pev/ppo.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace pev {

namespace {

// Stream tags for the counter-based RNG.
constexpr std::uint64_t kStreamPursuer = 1;
constexpr std::uint64_t kStreamEvader = 2;
constexpr std::uint64_t kStreamWorldInit = 3;
constexpr std::uint64_t kStreamShuffle = 4;
constexpr std::uint64_t kStreamNetInit = 5;
constexpr std::uint64_t kStreamEval = 6;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("trainer state: truncated stream");
  return v;
}

void write_vec(std::ostream& os, const double* data, int n) {
  os.write(reinterpret_cast<const char*>(data), n * sizeof(double));
}

void read_vec(std::istream& is, double* data, int n) {
  is.read(reinterpret_cast<char*>(data), n * sizeof(double));
  if (!is) throw std::runtime_error("trainer state: truncated stream");
}

void save_command(std::ostream& os, const LowLevelCommand& c) {
  write_pod(os, c.thrust);
  write_vec(os, c.omega_des.data(), 3);
}

LowLevelCommand load_command(std::istream& is) {
  LowLevelCommand c;
  c.thrust = read_pod<double>(is);
  read_vec(is, c.omega_des.data(), 3);
  return c;
}

void save_agent(std::ostream& os, const AgentPhysical& a) {
  write_vec(os, a.body.p.data(), 3);
  write_vec(os, a.body.v.data(), 3);
  write_vec(os, a.body.R.data(), 9);
  write_vec(os, a.body.omega.data(), 3);
  write_vec(os, a.motors.rotor_speeds.data(), 4);
  write_vec(os, a.spawn_pos.data(), 3);
  write_pod(os, static_cast<std::uint32_t>(a.delay.head()));
  write_pod(os, static_cast<std::uint32_t>(a.delay.size()));
  for (const LowLevelCommand& c : a.delay.buffer()) save_command(os, c);
}

AgentPhysical load_agent(std::istream& is) {
  AgentPhysical a;
  read_vec(is, a.body.p.data(), 3);
  read_vec(is, a.body.v.data(), 3);
  read_vec(is, a.body.R.data(), 9);
  read_vec(is, a.body.omega.data(), 3);
  read_vec(is, a.motors.rotor_speeds.data(), 4);
  read_vec(is, a.spawn_pos.data(), 3);
  const auto head = read_pod<std::uint32_t>(is);
  const auto size = read_pod<std::uint32_t>(is);
  std::vector<LowLevelCommand> buf;
  buf.reserve(size);
  for (std::uint32_t i = 0; i < size; ++i) buf.push_back(load_command(is));
  a.delay.restore(static_cast<int>(head), std::move(buf));
  return a;
}

void save_world(std::ostream& os, const WorldState& w) {
  save_agent(os, w.pursuer);
  save_agent(os, w.evader);
  write_pod(os, static_cast<std::int32_t>(w.step_count));
  write_pod(os, w.rng_state);
  write_vec(os, w.last_action_p.data(), 4);
  write_vec(os, w.last_action_e.data(), 4);
  write_pod(os, static_cast<std::uint8_t>(w.done ? 1 : 0));
}

WorldState load_world(std::istream& is) {
  WorldState w;
  w.pursuer = load_agent(is);
  w.evader = load_agent(is);
  w.step_count = read_pod<std::int32_t>(is);
  w.rng_state = read_pod<std::uint64_t>(is);
  read_vec(is, w.last_action_p.data(), 4);
  read_vec(is, w.last_action_e.data(), 4);
  w.done = read_pod<std::uint8_t>(is) != 0;
  return w;
}

void save_adam(std::ostream& os, const AdamState& s) {
  save_mlp(os, s.m);
  save_mlp(os, s.v);
  write_pod(os, static_cast<std::int64_t>(s.step));
}

AdamState load_adam(std::istream& is) {
  AdamState s;
  s.m = load_mlp(is);
  s.v = load_mlp(is);
  s.step = read_pod<std::int64_t>(is);
  return s;
}

void save_actor_critic(std::ostream& os, const ActorCritic& ac) {
  save_mlp(os, ac.policy);
  save_mlp(os, ac.value);
  save_adam(os, ac.policy_adam);
  save_adam(os, ac.value_adam);
}

ActorCritic load_actor_critic(std::istream& is) {
  ActorCritic ac;
  ac.policy = load_mlp(is);
  ac.value = load_mlp(is);
  ac.policy_adam = load_adam(is);
  ac.value_adam = load_adam(is);
  return ac;
}

/// Batched critic evaluation, chunked to keep the GEMMs cache-friendly.
void value_forward_chunked(const MlpParams& value, const MatX& priv,
                           double* out, int n_cols) {
  constexpr int kChunk = 8192;
  for (int start = 0; start < n_cols; start += kChunk) {
    const int n = std::min(kChunk, n_cols - start);
    const MatX v = mlp_forward(value, priv.middleCols(start, n));
    for (int i = 0; i < n; ++i) out[start + i] = v(0, i);
  }
}

}  // namespace

void RolloutBatch::resize(int t, int e) {
  obs.resize(kObsDim, t * e);
  priv.resize(kPrivObsDim, t * e);
  actions_raw.resize(kActionDim, t * e);
  log_probs.resize(t * e);
  values.resize(t, e);
  rewards.resize(t, e);
  dones.resize(t, e);
  bootstrap_values.resize(e);
}

void compute_gae(const MatX& rewards, const MatX& values,
                 const VecX& bootstrap_values, const MatX& dones, double gamma,
                 double lambda, MatX* advantages, MatX* returns) {
  const int t_len = static_cast<int>(rewards.rows());
  const int n_envs = static_cast<int>(rewards.cols());
  advantages->resize(t_len, n_envs);
  returns->resize(t_len, n_envs);
  for (int e = 0; e < n_envs; ++e) {
    double gae = 0.0;
    for (int t = t_len - 1; t >= 0; --t) {
      const double not_done = 1.0 - dones(t, e);
      const double next_value =
          (t + 1 < t_len) ? values(t + 1, e) : bootstrap_values[e];
      const double delta =
          rewards(t, e) + gamma * next_value * not_done - values(t, e);
      gae = delta + gamma * lambda * not_done * gae;
      (*advantages)(t, e) = gae;
      (*returns)(t, e) = gae + values(t, e);
    }
  }
}

void normalize_advantages(VecX& advantages) {
  const double mean = advantages.mean();
  const double var =
      (advantages.array() - mean).square().sum() / advantages.size();
  const double std = std::sqrt(var);
  advantages = (advantages.array() - mean) / (std + 1e-8);
}

PpoLossStats ppo_loss_and_grads(const MlpParams& policy, const MlpParams& value,
                                const PpoMinibatch& mb, const PpoConfig& cfg,
                                MlpGrads* policy_grads, MlpGrads* value_grads) {
  const int batch = static_cast<int>(mb.obs.cols());
  const int action_dim = static_cast<int>(mb.actions_raw.rows());
  const double inv_b = 1.0 / batch;

  MlpWorkspace policy_ws;
  const MatX head =
      mlp_forward(policy, mb.obs, policy_grads ? &policy_ws : nullptr);
  MlpWorkspace value_ws;
  const MatX v_out =
      mlp_forward(value, mb.priv, value_grads ? &value_ws : nullptr);

  PpoLossStats stats;
  MatX head_grad;
  if (policy_grads) head_grad = MatX::Zero(2 * action_dim, batch);
  MatX v_grad;
  if (value_grads) v_grad = MatX::Zero(1, batch);

  const double ent_const = 0.5 * std::log(2.0 * M_PI * M_E);
  double pg_sum = 0.0, v_sum = 0.0, ent_sum = 0.0, clip_sum = 0.0, kl_sum = 0.0;
  double log_std_sum = 0.0;

  for (int i = 0; i < batch; ++i) {
    double logp = 0.0;
    for (int d = 0; d < action_dim; ++d) {
      const double s = clamp(head(action_dim + d, i), kLogStdMin, kLogStdMax);
      logp += squashed_log_prob(head(d, i), s, mb.actions_raw(d, i));
      ent_sum += s + ent_const;
      log_std_sum += s;
    }
    const double log_ratio = logp - mb.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double adv = mb.advantages[i];

    const double surr1 = ratio * adv;
    const double clipped_ratio = clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double surr2 = clipped_ratio * adv;
    pg_sum += -std::min(surr1, surr2);
    clip_sum += std::abs(ratio - 1.0) > cfg.clip ? 1.0 : 0.0;
    kl_sum += (ratio - 1.0) - log_ratio;

    const double v_err = v_out(0, i) - mb.returns[i];
    v_sum += v_err * v_err;

    if (policy_grads) {
      // d(-min(surr1, surr2))/dlogp; the clipped branch has zero slope
      // outside the trust region.
      double dloss_dlogp = 0.0;
      if (surr1 <= surr2) {
        dloss_dlogp = -adv * ratio;
      } else if (ratio > 1.0 - cfg.clip && ratio < 1.0 + cfg.clip) {
        dloss_dlogp = -adv * ratio;
      }
      dloss_dlogp *= inv_b;

      for (int d = 0; d < action_dim; ++d) {
        const double mean = head(d, i);
        const double s_raw = head(action_dim + d, i);
        const bool active = s_raw > kLogStdMin && s_raw < kLogStdMax;
        const double s = clamp(s_raw, kLogStdMin, kLogStdMax);
        const double inv_var = std::exp(-2.0 * s);
        const double du = mb.actions_raw(d, i) - mean;
        head_grad(d, i) += dloss_dlogp * du * inv_var;
        if (active) {
          head_grad(action_dim + d, i) +=
              dloss_dlogp * (du * du * inv_var - 1.0) -
              cfg.entropy_coef * inv_b;
        }
      }
    }
    if (value_grads) {
      v_grad(0, i) = cfg.value_coef * 2.0 * v_err * inv_b;
    }
  }

  stats.policy_loss = pg_sum * inv_b;
  stats.value_loss = v_sum * inv_b;
  stats.entropy = ent_sum * inv_b;
  stats.clip_fraction = clip_sum * inv_b;
  stats.approx_kl = kl_sum * inv_b;
  stats.mean_log_std = log_std_sum * inv_b / action_dim;
  stats.total_loss = stats.policy_loss + cfg.value_coef * stats.value_loss -
                     cfg.entropy_coef * stats.entropy;

  if (policy_grads) mlp_backward(policy, policy_ws, head_grad, *policy_grads);
  if (value_grads) mlp_backward(value, value_ws, v_grad, *value_grads);
  return stats;
}

ActorCritic ActorCritic::init(const PpoConfig& cfg, int obs_dim, int priv_dim,
                              int action_dim, Rng& rng,
                              double hover_action_bias) {
  MlpSpec policy_spec{obs_dim,
                      std::vector<int>(cfg.hidden_layers, cfg.hidden_units),
                      2 * action_dim};
  MlpSpec value_spec{priv_dim,
                     std::vector<int>(cfg.hidden_layers, cfg.hidden_units), 1};
  ActorCritic ac;
  ac.policy = init_mlp(policy_spec, rng, std::sqrt(2.0), 0.01);
  ac.value = init_mlp(value_spec, rng, std::sqrt(2.0), 1.0);
  // Start the thrust mean at hover and the exploration noise at a moderate
  // level; initial actions then stay near hover.
  ac.policy.b.back()[0] = hover_action_bias;
  for (int d = 0; d < action_dim; ++d)
    ac.policy.b.back()[action_dim + d] = cfg.init_log_std;
  ac.policy_adam = AdamState::init(ac.policy);
  ac.value_adam = AdamState::init(ac.value);
  return ac;
}

PpoLossStats ppo_update(ActorCritic& ac, const RolloutBatch& batch,
                        const MatX& advantages, const MatX& returns,
                        const PpoConfig& cfg, std::uint64_t seed,
                        long iteration) {
  const int t_len = static_cast<int>(batch.rewards.rows());
  const int n_envs = static_cast<int>(batch.rewards.cols());
  const int total = t_len * n_envs;

  VecX flat_adv(total), flat_ret(total);
  for (int t = 0; t < t_len; ++t)
    for (int e = 0; e < n_envs; ++e) {
      flat_adv[t * n_envs + e] = advantages(t, e);
      flat_ret[t * n_envs + e] = returns(t, e);
    }
  normalize_advantages(flat_adv);

  const int n_mb = std::max(1, cfg.minibatches);
  const int mb_size = total / n_mb;
  PEV_ASSERT(mb_size > 0, "ppo_update: empty minibatch");

  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);

  MlpGrads policy_grads = zeros_like(ac.policy);
  MlpGrads value_grads = zeros_like(ac.value);
  AdamConfig adam{cfg.lr};

  PpoLossStats last;
  PpoMinibatch mb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (n_mb > 1) {
      Rng shuffle_rng(hash_key(seed, kStreamShuffle,
                               static_cast<std::uint64_t>(iteration), epoch));
      for (int i = total - 1; i > 0; --i) {
        const int j = static_cast<int>(shuffle_rng.next_u64() % (i + 1));
        std::swap(order[i], order[j]);
      }
    }
    for (int m = 0; m < n_mb; ++m) {
      const int start = m * mb_size;
      const int count = (m + 1 == n_mb) ? total - start : mb_size;
      mb.obs.resize(kObsDim, count);
      mb.priv.resize(kPrivObsDim, count);
      mb.actions_raw.resize(kActionDim, count);
      mb.old_log_probs.resize(count);
      mb.advantages.resize(count);
      mb.returns.resize(count);
      for (int i = 0; i < count; ++i) {
        const int src = order[start + i];
        mb.obs.col(i) = batch.obs.col(src);
        mb.priv.col(i) = batch.priv.col(src);
        mb.actions_raw.col(i) = batch.actions_raw.col(src);
        mb.old_log_probs[i] = batch.log_probs[src];
        mb.advantages[i] = flat_adv[src];
        mb.returns[i] = flat_ret[src];
      }

      for (std::size_t l = 0; l < policy_grads.W.size(); ++l) {
        policy_grads.W[l].setZero();
        policy_grads.b[l].setZero();
      }
      for (std::size_t l = 0; l < value_grads.W.size(); ++l) {
        value_grads.W[l].setZero();
        value_grads.b[l].setZero();
      }

      last = ppo_loss_and_grads(ac.policy, ac.value, mb, cfg, &policy_grads,
                                &value_grads);
      last.policy_grad_norm = grad_global_norm({&policy_grads});
      last.value_grad_norm = grad_global_norm({&value_grads});
      if (!std::isfinite(last.total_loss)) {
        throw std::runtime_error(
            "ppo_update diverged: non-finite loss (policy=" +
            std::to_string(last.policy_loss) +
            ", value=" + std::to_string(last.value_loss) +
            ", entropy=" + std::to_string(last.entropy) + ") at iteration " +
            std::to_string(iteration));
      }
      // Each network is clipped over all of its parameters. A joint clip
      // would let the critic's large early errors scale the policy update
      // toward zero.
      clip_grad_norm({&policy_grads}, cfg.max_grad_norm);
      clip_grad_norm({&value_grads}, cfg.max_grad_norm);
      adam_update(ac.policy, policy_grads, ac.policy_adam, adam);
      adam_update(ac.value, value_grads, ac.value_adam, adam);
    }
  }
  return last;
}

Trainer::Trainer(const EnvConfig& env_cfg, const GuidanceConfig& guidance,
                 const PpoConfig& ppo_cfg, OpponentMode mode,
                 std::uint64_t seed)
    : env_cfg_(env_cfg),
      guidance_(guidance),
      cfg_(ppo_cfg),
      mode_(mode),
      seed_(seed) {
  const double hover_action =
      encode_action(LowLevelCommand::hover(env_cfg_.quad), env_cfg_.quad)[0];
  const double hover_bias = std::atanh(clamp(hover_action, -0.999, 0.999));

  Rng net_rng(hash_key(seed_, kStreamNetInit, 0));
  pursuer_ = ActorCritic::init(cfg_, kObsDim, kPrivObsDim, kActionDim, net_rng,
                               hover_bias);
  evader_ = ActorCritic::init(cfg_, kObsDim, kPrivObsDim, kActionDim, net_rng,
                              hover_bias);

  worlds_.reserve(cfg_.n_envs);
  obs_p_.resize(kObsDim, cfg_.n_envs);
  obs_e_.resize(kObsDim, cfg_.n_envs);
  for (int e = 0; e < cfg_.n_envs; ++e) {
    worlds_.push_back(initial_world(seed_, e, env_cfg_));
    obs_p_.col(e) = observe(worlds_[e], AgentId::Pursuer, env_cfg_);
    obs_e_.col(e) = observe(worlds_[e], AgentId::Evader, env_cfg_);
  }
  ep_return_p_ = VecX::Zero(cfg_.n_envs);
  ep_return_e_ = VecX::Zero(cfg_.n_envs);
  ep_len_.assign(cfg_.n_envs, 0);
}

Vec4 Trainer::scripted_evader_action(const WorldState& world) const {
  const Reference ref = hover_ref(world.evader.spawn_pos);
  const LowLevelCommand cmd =
      se3_control(world.evader.body, ref, guidance_.se3, env_cfg_.quad);
  return encode_action(cmd, env_cfg_.quad);
}

WorldState Trainer::initial_world(std::uint64_t seed, int env_index,
                                  const EnvConfig& cfg) {
  Rng world_rng(hash_key(seed, kStreamWorldInit, env_index));
  return reset(world_rng, cfg);
}

void Trainer::collect_rollouts(RolloutBatch* batch_p, RolloutBatch* batch_e,
                               IterationStats* stats) {
  const int t_len = cfg_.rollout_len;
  const int n_envs = cfg_.n_envs;
  batch_p->resize(t_len, n_envs);
  MatX priv_p_bootstrap(kPrivObsDim, n_envs);
  MatX priv_e_bootstrap;
  if (batch_e) {
    batch_e->resize(t_len, n_envs);
    priv_e_bootstrap.resize(kPrivObsDim, n_envs);
  }

  double sum_ret_p = 0.0, sum_ret_e = 0.0, sum_final_dist = 0.0;
  long sum_len = 0;
  int finished = 0, catches = 0;

  VecX u(kActionDim), a(kActionDim);
  for (int t = 0; t < t_len; ++t) {
    const std::uint64_t global_t =
        static_cast<std::uint64_t>(iteration_) * t_len + t;
    const MatX head_p = mlp_forward(pursuer_.policy, obs_p_);
    MatX head_e;
    if (batch_e) head_e = mlp_forward(evader_.policy, obs_e_);

    for (int e = 0; e < n_envs; ++e) {
      const int col = t * n_envs + e;
      WorldState& world = worlds_[e];

      const SquashedGaussian dist_p = SquashedGaussian::from_head(head_p.col(e));
      Rng rng_p(hash_key(seed_, kStreamPursuer, e, global_t));
      dist_p.sample(rng_p, &u, &a);
      const Vec4 action_p = a;
      batch_p->obs.col(col) = obs_p_.col(e);
      batch_p->actions_raw.col(col) = u;
      batch_p->log_probs[col] = dist_p.log_prob_presquash(u);

      Vec4 action_e;
      if (batch_e) {
        const SquashedGaussian dist_e =
            SquashedGaussian::from_head(head_e.col(e));
        Rng rng_e(hash_key(seed_, kStreamEvader, e, global_t));
        dist_e.sample(rng_e, &u, &a);
        action_e = a;
        batch_e->obs.col(col) = obs_e_.col(e);
        batch_e->actions_raw.col(col) = u;
        batch_e->log_probs[col] = dist_e.log_prob_presquash(u);
        batch_e->priv.col(col) =
            observe_privileged(world, AgentId::Evader, action_p, env_cfg_);
      } else {
        action_e = scripted_evader_action(world);
      }
      batch_p->priv.col(col) =
          observe_privileged(world, AgentId::Pursuer, action_e, env_cfg_);

      const StepResult sr = env_step(world, action_p, action_e, env_cfg_);
      const double r_p = sr.reward_p.total(AgentId::Pursuer);
      const double r_e = sr.reward_e.total(AgentId::Evader);
      batch_p->rewards(t, e) = r_p;
      batch_p->dones(t, e) = sr.done ? 1.0 : 0.0;
      if (batch_e) {
        batch_e->rewards(t, e) = r_e;
        batch_e->dones(t, e) = sr.done ? 1.0 : 0.0;
      }

      ep_return_p_[e] += r_p;
      ep_return_e_[e] += r_e;
      ep_len_[e] += 1;

      if (sr.done) {
        finished += 1;
        sum_ret_p += ep_return_p_[e];
        sum_ret_e += ep_return_e_[e];
        sum_len += ep_len_[e];
        sum_final_dist += sr.events.net_dist;
        if (sr.outcome && sr.outcome->kind == OutcomeKind::Catch) catches += 1;
        ep_return_p_[e] = 0.0;
        ep_return_e_[e] = 0.0;
        ep_len_[e] = 0;
        Rng world_rng(world.rng_state);
        world = reset(world_rng, env_cfg_);
        obs_p_.col(e) = observe(world, AgentId::Pursuer, env_cfg_);
        obs_e_.col(e) = observe(world, AgentId::Evader, env_cfg_);
      } else {
        obs_p_.col(e) = sr.obs_p;
        obs_e_.col(e) = sr.obs_e;
      }
    }
  }

  // Bootstrap privileged observations at s_T. The counter keying makes these
  // the exact actions the next iteration will take at t=0.
  const std::uint64_t global_T =
      static_cast<std::uint64_t>(iteration_) * t_len + t_len;
  const MatX head_p = mlp_forward(pursuer_.policy, obs_p_);
  MatX head_e;
  if (batch_e) head_e = mlp_forward(evader_.policy, obs_e_);
  for (int e = 0; e < cfg_.n_envs; ++e) {
    Vec4 action_p, action_e;
    {
      const SquashedGaussian dist = SquashedGaussian::from_head(head_p.col(e));
      Rng rng(hash_key(seed_, kStreamPursuer, e, global_T));
      dist.sample(rng, &u, &a);
      action_p = a;
    }
    if (batch_e) {
      const SquashedGaussian dist = SquashedGaussian::from_head(head_e.col(e));
      Rng rng(hash_key(seed_, kStreamEvader, e, global_T));
      dist.sample(rng, &u, &a);
      action_e = a;
    } else {
      action_e = scripted_evader_action(worlds_[e]);
    }
    priv_p_bootstrap.col(e) =
        observe_privileged(worlds_[e], AgentId::Pursuer, action_e, env_cfg_);
    if (batch_e)
      priv_e_bootstrap.col(e) =
          observe_privileged(worlds_[e], AgentId::Evader, action_p, env_cfg_);
  }

  // Critic pass over the whole batch plus bootstrap columns.
  const int total = t_len * n_envs;
  VecX values(total);
  value_forward_chunked(pursuer_.value, batch_p->priv, values.data(), total);
  for (int t = 0; t < t_len; ++t)
    for (int e = 0; e < n_envs; ++e)
      batch_p->values(t, e) = values[t * n_envs + e];
  value_forward_chunked(pursuer_.value, priv_p_bootstrap,
                        batch_p->bootstrap_values.data(), n_envs);
  if (batch_e) {
    value_forward_chunked(evader_.value, batch_e->priv, values.data(), total);
    for (int t = 0; t < t_len; ++t)
      for (int e = 0; e < n_envs; ++e)
        batch_e->values(t, e) = values[t * n_envs + e];
    value_forward_chunked(evader_.value, priv_e_bootstrap,
                          batch_e->bootstrap_values.data(), n_envs);
  }

  stats->episodes_finished = finished;
  if (finished > 0) {
    stats->mean_return_p = sum_ret_p / finished;
    stats->mean_return_e = sum_ret_e / finished;
    stats->mean_ep_len = static_cast<double>(sum_len) / finished;
    stats->catch_rate = static_cast<double>(catches) / finished;
    stats->mean_final_net_dist = sum_final_dist / finished;
  } else {
    // Nothing finished this iteration; report the in-progress averages so
    // the metrics stay finite.
    stats->mean_return_p = ep_return_p_.mean();
    stats->mean_return_e = ep_return_e_.mean();
    stats->mean_ep_len =
        std::accumulate(ep_len_.begin(), ep_len_.end(), 0.0) / cfg_.n_envs;
    stats->catch_rate = 0.0;
  }
}

IterationStats Trainer::iterate() {
  const auto start = std::chrono::steady_clock::now();
  IterationStats stats;
  stats.iteration = iteration_ + 1;

  RolloutBatch batch_p, batch_e;
  const bool selfplay = mode_ == OpponentMode::SelfPlay;
  collect_rollouts(&batch_p, selfplay ? &batch_e : nullptr, &stats);

  PpoConfig cfg = cfg_;
  if (cfg.lr_decay) {
    const double frac =
        1.0 - static_cast<double>(iteration_) /
                  std::max<long>(1, cfg_.num_iterations());
    cfg.lr = cfg_.lr * std::max(frac, 0.0);
  }

  MatX adv, ret;
  compute_gae(batch_p.rewards, batch_p.values, batch_p.bootstrap_values,
              batch_p.dones, cfg.gamma, cfg.gae_lambda, &adv, &ret);
  stats.loss_p = ppo_update(pursuer_, batch_p, adv, ret, cfg,
                            hash_key(seed_, kStreamPursuer, 0), iteration_);
  if (selfplay) {
    compute_gae(batch_e.rewards, batch_e.values, batch_e.bootstrap_values,
                batch_e.dones, cfg.gamma, cfg.gae_lambda, &adv, &ret);
    stats.loss_e = ppo_update(evader_, batch_e, adv, ret, cfg,
                              hash_key(seed_, kStreamEvader, 0), iteration_);
  }

  iteration_ += 1;
  global_step_ += cfg_.steps_per_iteration();
  stats.env_steps = global_step_;
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  stats.steps_per_second = cfg_.steps_per_iteration() / std::max(secs, 1e-9);
  return stats;
}

double Trainer::eval_catch_rate_vs_hover(int n_episodes,
                                         std::uint64_t eval_seed) const {
  int catches = 0;
  constexpr int kBatch = 64;
  std::vector<WorldState> worlds;
  std::vector<int> alive;
  MatX obs(kObsDim, kBatch);
  for (int start = 0; start < n_episodes; start += kBatch) {
    const int n = std::min(kBatch, n_episodes - start);
    worlds.clear();
    alive.clear();
    for (int i = 0; i < n; ++i) {
      Rng rng(hash_key(eval_seed, kStreamEval, start + i));
      worlds.push_back(reset(rng, env_cfg_));
      alive.push_back(i);
    }
    while (!alive.empty()) {
      for (std::size_t k = 0; k < alive.size(); ++k)
        obs.col(k) = observe(worlds[alive[k]], AgentId::Pursuer, env_cfg_);
      const MatX head =
          mlp_forward(pursuer_.policy, obs.leftCols(alive.size()));
      std::vector<int> next_alive;
      for (std::size_t k = 0; k < alive.size(); ++k) {
        WorldState& world = worlds[alive[k]];
        Vec4 action_p;
        for (int d = 0; d < kActionDim; ++d)
          action_p[d] = std::tanh(head(d, k));
        const Vec4 action_e = scripted_evader_action(world);
        const StepResult sr = env_step(world, action_p, action_e, env_cfg_);
        if (sr.done) {
          if (sr.outcome && sr.outcome->kind == OutcomeKind::Catch)
            catches += 1;
        } else {
          next_alive.push_back(alive[k]);
        }
      }
      alive = std::move(next_alive);
    }
  }
  return static_cast<double>(catches) / n_episodes;
}

namespace {
constexpr std::uint32_t kTrainerMagic = 0x54564550u;  // "PEVT"
constexpr std::uint32_t kTrainerVersion = 1;
}  // namespace

void Trainer::save_state(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write trainer state: " + path);
  write_pod(os, kTrainerMagic);
  write_pod(os, kTrainerVersion);
  write_pod(os, seed_);
  write_pod(os, static_cast<std::uint32_t>(mode_));
  write_pod(os, static_cast<std::int64_t>(iteration_));
  write_pod(os, static_cast<std::int64_t>(global_step_));
  write_pod(os, static_cast<std::uint32_t>(cfg_.n_envs));
  write_pod(os, static_cast<std::uint32_t>(cfg_.rollout_len));
  save_actor_critic(os, pursuer_);
  save_actor_critic(os, evader_);
  for (const WorldState& w : worlds_) save_world(os, w);
  write_vec(os, ep_return_p_.data(), cfg_.n_envs);
  write_vec(os, ep_return_e_.data(), cfg_.n_envs);
  for (int e = 0; e < cfg_.n_envs; ++e)
    write_pod(os, static_cast<std::int32_t>(ep_len_[e]));
}

void Trainer::load_state(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read trainer state: " + path);
  if (read_pod<std::uint32_t>(is) != kTrainerMagic)
    throw std::runtime_error("trainer state: bad magic");
  if (read_pod<std::uint32_t>(is) != kTrainerVersion)
    throw std::runtime_error("trainer state: unsupported version");
  seed_ = read_pod<std::uint64_t>(is);
  mode_ = static_cast<OpponentMode>(read_pod<std::uint32_t>(is));
  iteration_ = read_pod<std::int64_t>(is);
  global_step_ = read_pod<std::int64_t>(is);
  const auto n_envs = read_pod<std::uint32_t>(is);
  const auto rollout_len = read_pod<std::uint32_t>(is);
  if (static_cast<int>(n_envs) != cfg_.n_envs ||
      static_cast<int>(rollout_len) != cfg_.rollout_len) {
    throw std::runtime_error(
        "trainer state: config mismatch (n_envs/rollout_len)");
  }
  pursuer_ = load_actor_critic(is);
  evader_ = load_actor_critic(is);
  worlds_.clear();
  for (int e = 0; e < cfg_.n_envs; ++e) worlds_.push_back(load_world(is));
  ep_return_p_.resize(cfg_.n_envs);
  ep_return_e_.resize(cfg_.n_envs);
  read_vec(is, ep_return_p_.data(), cfg_.n_envs);
  read_vec(is, ep_return_e_.data(), cfg_.n_envs);
  ep_len_.resize(cfg_.n_envs);
  for (int e = 0; e < cfg_.n_envs; ++e)
    ep_len_[e] = read_pod<std::int32_t>(is);
  for (int e = 0; e < cfg_.n_envs; ++e) {
    obs_p_.col(e) = observe(worlds_[e], AgentId::Pursuer, env_cfg_);
    obs_e_.col(e) = observe(worlds_[e], AgentId::Evader, env_cfg_);
  }
}

IterationStats train_selfplay(const EnvConfig& env_cfg,
                              const GuidanceConfig& guidance,
                              const PpoConfig& ppo_cfg, OpponentMode mode,
                              std::uint64_t seed, const TrainOptions& options) {
  namespace fs = std::filesystem;
  fs::create_directories(options.out_dir);
  const fs::path out(options.out_dir);

  Trainer trainer(env_cfg, guidance, ppo_cfg, mode, seed);
  const bool resuming = !options.resume_from.empty();
  if (resuming) trainer.load_state(options.resume_from);

  const fs::path metrics_path = out / "metrics.csv";
  const bool write_header = !resuming || !fs::exists(metrics_path);
  std::ofstream metrics(metrics_path,
                        resuming ? std::ios::app : std::ios::trunc);
  if (!metrics)
    throw std::runtime_error("cannot write metrics: " + metrics_path.string());
  if (write_header)
    metrics << "iteration,env_steps,mean_return_P,mean_return_E,mean_ep_len,"
               "catch_rate\n";

  auto write_checkpoints = [&](long iteration) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_iter%06ld_pursuer.net",
                  iteration);
    save_mlp_file((out / name).string(), trainer.pursuer().policy);
    std::snprintf(name, sizeof(name), "checkpoint_iter%06ld_evader.net",
                  iteration);
    save_mlp_file((out / name).string(), trainer.evader().policy);
    trainer.save_state((out / "trainer_state.bin").string());
  };

  IterationStats stats;
  const long max_iterations = ppo_cfg.num_iterations();
  while (trainer.iteration() < max_iterations) {
    stats = trainer.iterate();
    char row[256];
    std::snprintf(row, sizeof(row), "%ld,%ld,%.6f,%.6f,%.2f,%.4f\n",
                  stats.iteration, stats.env_steps, stats.mean_return_p,
                  stats.mean_return_e, stats.mean_ep_len, stats.catch_rate);
    metrics << row;
    metrics.flush();

    bool stop = false;
    if (ppo_cfg.eval_every > 0 && mode == OpponentMode::FrozenHover &&
        stats.iteration % ppo_cfg.eval_every == 0) {
      const double rate = trainer.eval_catch_rate_vs_hover(
          ppo_cfg.eval_episodes, hash_key(seed, kStreamEval, 0xE7A1));
      std::printf("  eval: catch rate %.1f%% over %d episodes\n", 100.0 * rate,
                  ppo_cfg.eval_episodes);
      std::fflush(stdout);
      if (ppo_cfg.stop_at_catch_rate > 0.0 &&
          rate >= ppo_cfg.stop_at_catch_rate) {
        stop = true;
      }
    }
    if (options.on_iteration && !options.on_iteration(stats)) stop = true;
    if (ppo_cfg.checkpoint_every > 0 &&
        stats.iteration % ppo_cfg.checkpoint_every == 0) {
      write_checkpoints(stats.iteration);
    }
    if (stop) break;
  }
  write_checkpoints(trainer.iteration());
  return stats;
}

}  // namespace pev
