#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "dhrl/mlp.hpp"

namespace dhrl {

struct Td3Config {
  std::vector<int> hidden{256, 256, 256};
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double gamma = 0.99;
  double tau = 0.005;
  int target_update_freq = 1;
  int actor_update_freq = 2;
  /// Target smoothing noise std and clip, as fractions of the action half-range.
  double policy_noise = 0.2;
  double noise_clip = 0.5;
  /// Optional clamp on Bellman targets (lower, upper).
  std::optional<std::pair<double, double>> target_clip;
};

/// Column batch of (obs, action, reward, done, next_obs). `done` is 1 for an
/// absorbing terminal (bootstrap masked) and 0 otherwise, including timeouts.
struct Batch {
  Matrix obs;
  Matrix action;
  Vector reward;
  Vector done;
  Matrix next_obs;

  Eigen::Index size() const { return obs.cols(); }
};

struct Td3Stats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  bool actor_updated = false;
  bool targets_updated = false;
  int rejected_updates = 0;
};

/// Stacks observation rows over action rows, the critic input layout.
Matrix critic_input(const Matrix& obs, const Matrix& action);

/// y = r + gamma * (1 - done) * min(Q1', Q2')(s', clip(pi'(s') + noise)).
/// `smoothing_noise` is added to the target action before clipping to the
/// actor's output bounds; pass a zero matrix for no smoothing.
Vector td3_critic_target(const Mlp& q1_target, const Mlp& q2_target, const Mlp& actor_target, const Batch& batch,
                         double gamma, const Matrix& smoothing_noise,
                         const std::optional<std::pair<double, double>>& clip = std::nullopt);

/// Twin-critic deterministic actor-critic learner.
class Td3 {
 public:
  Td3() = default;
  Td3(int obs_dim, OutputMap action_bounds, Td3Config config, Rng& rng);

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }
  const Td3Config& config() const { return config_; }
  const OutputMap& action_bounds() const { return actor.online.output_map(); }

  Matrix act(const Matrix& obs) const { return actor.online.forward(obs); }
  Matrix q1_value(const Matrix& obs, const Matrix& action) const;

  /// Gaussian smoothing noise clipped per TD3, scaled to the action range.
  Matrix smoothing_noise(Eigen::Index batch, Rng& rng) const;

  /// One critic update, plus an actor update every actor_update_freq calls
  /// and a Polyak step of all targets every target_update_freq calls.
  Td3Stats update(const Batch& batch, Rng& rng);

  /// Gradient of -mean Q1(s, pi(s)) w.r.t. the actor parameters.
  Vector actor_gradient(const Matrix& obs, double* loss = nullptr) const;

  void set_learning_rates(double actor_lr, double critic_lr);
  std::int64_t update_count() const { return updates_; }

  void save(BinaryWriter& out) const;
  static Td3 load(BinaryReader& in);

  TargetPair actor;
  TargetPair q1;
  TargetPair q2;

 private:
  double critic_step(TargetPair& critic, const Matrix& input, const Vector& y, int& rejected);

  int obs_dim_ = 0;
  int action_dim_ = 0;
  Td3Config config_;
  std::int64_t updates_ = 0;
};

std::vector<int> layer_widths(int in, const std::vector<int>& hidden, int out);

}  // namespace dhrl
