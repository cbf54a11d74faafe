// Copyright 2026 The memq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MEMQ_TRAINER_HPP_
#define MEMQ_TRAINER_HPP_

#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "memq/config.hpp"
#include "memq/engine.hpp"
#include "memq/optim.hpp"
#include "memq/replay.hpp"
#include "memq/world.hpp"

namespace memq {

/// Q-model facade over a network and its batched engine, including the
/// windowed acting state (the last K observations, front-padded with the
/// episode's first frame).
class NetModel {
 public:
  NetModel(const ArchConfig& cfg, std::uint64_t init_seed)
      : net_(AgentNet::init(cfg, init_seed)), engine_(net_) {}
  explicit NetModel(AgentNet net) : net_(std::move(net)), engine_(net_) {}

  ParamStore& params() { return net_.params; }
  const AgentNet& net() const { return net_; }
  AgentNet& net() { return net_; }
  std::size_t actions() const { return net_.cfg.actions; }
  std::size_t window() const { return net_.cfg.frames; }

  TensorF forward(const std::vector<std::vector<const TensorF*>>& windows,
                  bool with_grads) {
    return engine_.forward(windows, with_grads);
  }
  void backward(const TensorF& dq) { engine_.backward(dq); }

  void act_reset(const TensorF& first_obs) {
    if (net_.cfg.variant == Arch::kDqn) {
      act_obs_.assign(net_.cfg.frames, first_obs);
    } else {
      act_frames_.assign(net_.cfg.frames, engine_.make_frame(first_obs));
    }
  }

  void act_push(const TensorF& obs) {
    if (net_.cfg.variant == Arch::kDqn) {
      act_obs_.push_back(obs);
      act_obs_.pop_front();
    } else {
      act_frames_.push_back(engine_.make_frame(obs));
      act_frames_.pop_front();
    }
  }

  TensorF act_q() const {
    if (net_.cfg.variant == Arch::kDqn) {
      std::vector<const TensorF*> w;
      for (const TensorF& o : act_obs_) w.push_back(&o);
      return engine_.q_single(w);
    }
    std::vector<const BatchEngine::FrameCtx*> w;
    for (const auto& f : act_frames_) w.push_back(&f);
    return engine_.q_from_frames(w);
  }

 private:
  AgentNet net_;
  BatchEngine engine_;
  std::deque<TensorF> act_obs_;
  std::deque<BatchEngine::FrameCtx> act_frames_;
};

/// One-step TD targets from the target model over successor windows:
/// y = r for terminal transitions, r + gamma * max_a q otherwise.
template <class Model>
std::vector<double> td_targets(Model& target, const Batch& batch,
                               double gamma) {
  TensorF q = target.forward(batch.succ_windows, false);
  std::vector<double> y(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch.terminal[b]) {
      y[b] = batch.rewards[b];
    } else {
      double best = q.at(b, 0);
      for (std::size_t a = 1; a < q.shape[1]; ++a)
        best = std::max(best, q.at(b, a));
      y[b] = batch.rewards[b] + gamma * best;
    }
  }
  return y;
}

/// Mean squared TD error with gradients flowing only through the taken
/// actions of the online network; targets are fixed numbers. Accumulates
/// into the model's grad buffers (zero them first).
template <class Model>
double loss_and_grad(Model& online, const Batch& batch,
                     const std::vector<double>& targets) {
  const std::size_t B = batch.size();
  TensorF q = online.forward(batch.windows, true);
  TensorF dq({B, q.shape[1]});
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double err = q.at(b, batch.actions[b]) - targets[b];
    loss += err * err;
    dq.at(b, batch.actions[b]) = 2.0 * err / B;
  }
  loss /= B;
  if (!std::isfinite(loss)) throw NumericError("non-finite TD loss");
  online.backward(dq);
  return loss;
}

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t step = 0;  // environment steps taken so far
  double epsilon = 0.0;
  double loss_mean = 0.0;
  std::size_t updates = 0;
  std::size_t episodes = 0;
};

/// Deep Q-learning loop: epsilon-greedy acting on sampled episodes, whole
/// episodes into replay, a batch update every `update_every` steps with a
/// soft target update after each one, and an epoch callback every
/// `epoch_steps` environment steps (return false to stop).
///
/// `make_env` is called with a per-episode stream and must return an
/// environment exposing `TensorF obs() const` and
/// `std::pair<double,bool> apply(std::size_t action)`.
template <class Model, class MakeEnv>
void train_loop(Model& online, Model& target, MakeEnv&& make_env,
                const TrainConfig& cfg,
                const std::function<bool(const EpochStats&)>& on_epoch) {
  target.params().copy_values_from(online.params());
  RmsProp opt(online.params(), cfg.rmsprop_momentum, cfg.rmsprop_sq_momentum,
              cfg.grad_clip);
  ReplayMemory replay(cfg.replay_capacity);
  Rng root(cfg.seed);
  Rng explore = root.split("explore");
  Rng replay_rng = root.split("replay");
  Rng episode_root = root.split("episodes");

  using Env = std::decay_t<decltype(make_env(std::declval<Rng&>()))>;
  std::optional<Env> env;
  Episode pending;
  std::size_t episode_idx = 0;
  EpochStats stats;
  double loss_sum = 0.0;

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    if (!env) {
      Rng er = episode_root.split(episode_idx++);
      env.emplace(make_env(er));
      pending = Episode{};
      pending.frames.push_back(StoredObs::from(env->obs()));
      online.act_reset(env->obs());
      ++stats.episodes;
    }
    const double eps =
        epsilon_at(step, cfg.eps_start, cfg.eps_end, cfg.eps_steps);
    std::size_t action;
    if (explore.uniform() < eps)
      action = explore.uniform_int(online.actions());
    else
      action = argmax_action(online.act_q());

    auto [reward, done] = env->apply(action);
    const TensorF next_obs = env->obs();
    pending.actions.push_back(action);
    pending.rewards.push_back(reward);
    pending.frames.push_back(StoredObs::from(next_obs));
    if (done) {
      replay.add(std::move(pending));
      pending = Episode{};
      env.reset();
    } else {
      online.act_push(next_obs);
    }

    if ((step + 1) % cfg.update_every == 0 && replay.ready(cfg.batch)) {
      Batch batch =
          sample_batch(replay, replay_rng, online.window(), cfg.batch);
      const std::vector<double> y = td_targets(target, batch, cfg.gamma);
      online.params().zero_grad();
      loss_sum += loss_and_grad(online, batch, y);
      opt.step(online.params(), cfg.lr);
      soft_update(target.params(), online.params(), cfg.target_momentum);
      ++stats.updates;
    }

    if ((step + 1) % cfg.epoch_steps == 0) {
      ++stats.epoch;
      stats.step = step + 1;
      stats.epsilon = eps;
      stats.loss_mean = stats.updates ? loss_sum / stats.updates : 0.0;
      if (!on_epoch(stats)) return;
      loss_sum = 0.0;
      stats.updates = 0;
      stats.episodes = 0;
    }
  }
}

/// Environment adapter over the grid world: samples a map per episode,
/// renders first-person frames, and forwards actions.
class WorldEnv {
 public:
  WorldEnv(const MapSpec& map, Rng& rng) : state_(reset(map, rng)) {
    obs_ = render(state_);
  }

  const TensorF& obs() const { return obs_; }
  const EpisodeState& state() const { return state_; }

  std::pair<double, bool> apply(std::size_t action) {
    StepResult r = step(state_, static_cast<Action>(action));
    obs_ = render(state_);
    return {r.reward, r.done};
  }

 private:
  EpisodeState state_;
  TensorF obs_;
};

/// Uniformly samples a training map for each new episode.
class WorldEnvFactory {
 public:
  explicit WorldEnvFactory(std::vector<MapSpec> maps)
      : maps_(std::move(maps)) {
    if (maps_.empty()) throw std::invalid_argument("no training maps");
  }

  WorldEnv operator()(Rng& rng) const {
    const MapSpec& map = maps_[rng.uniform_int(maps_.size())];
    return WorldEnv(map, rng);
  }

 private:
  std::vector<MapSpec> maps_;
};

}  // namespace memq

#endif  // MEMQ_TRAINER_HPP_
