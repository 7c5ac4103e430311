#pragma once

#include <cstdint>
#include <vector>

#include "dhrl/distance.hpp"
#include "dhrl/env.hpp"
#include "dhrl/replay.hpp"
#include "dhrl/td3.hpp"

namespace dhrl {

struct LowAgentConfig {
  Td3Config td3;
  double gamma = 0.99;
  double action_limit = 0.5;
  /// Exploration noise std as a fraction of action_limit.
  double explore_noise = 0.1;
  double critic_relabel_fraction = 0.8;
  double graph_relabel_fraction = 1.0;
  /// Waypoint achievement radius; the environment success threshold.
  double success_threshold = 2.5;
  /// With false, distances are read from the first policy critic instead of
  /// a dedicated graph Q-network (the single-Q ablation).
  bool separate_graph_q = true;
  double floor_eps = 1e-6;
};

/// A low-level training batch pair drawn from one set of buffer indices.
struct LowBatches {
  Batch critic;
  Batch graph;
  std::vector<bool> critic_relabeled;
  std::vector<bool> graph_relabeled;
};

struct LowTrainStats {
  bool trained = false;
  Td3Stats critic;
  double graph_loss = 0.0;
};

/// Goal-conditioned low-level agent with separate Q-networks for the graph
/// and for the policy critic.
///
/// Observations are the state and the goal offset (goal - state), both scaled
/// by the maze half-extents. The twin critics and the actor are trained on
/// batches whose goals are hindsight-relabeled with probability 0.8; the graph
/// Q-network sees only relabeled goals and never feeds the actor gradient.
class LowAgent : public DistanceModel {
 public:
  LowAgent() = default;
  LowAgent(const MazeSpec& spec, LowAgentConfig config, Rng& rng);

  const LowAgentConfig& config() const { return config_; }

  Vec2 act(const Vec2& state, const Vec2& waypoint, bool explore, Rng& rng) const;

  /// Dist(s -> g) recovered from the graph Q-network.
  double recover_distance(const Vec2& state, const Vec2& goal) const;

  Matrix distances(std::span<const Vec2> from, std::span<const Vec2> to) const override;
  Matrix values(std::span<const Vec2> from, std::span<const Vec2> to) const override;

  LowBatches make_batches(const LowBuffer& buffer, std::size_t batch_size, Rng& rng) const;

  /// One training iteration; a no-op when the buffer holds fewer than batch_size items.
  LowTrainStats train(const LowBuffer& buffer, std::size_t batch_size, Rng& rng);
  LowTrainStats train_on(const LowBatches& batches, Rng& rng);

  Matrix encode(std::span<const Vec2> states, std::span<const Vec2> goals) const;

  /// Network whose values are turned into distances.
  const Mlp& distance_network() const { return config_.separate_graph_q ? q_graph.online : policy.q1.online; }

  void set_learning_rates(double actor_lr, double critic_lr);

  void save(BinaryWriter& out) const;
  static LowAgent load(BinaryReader& in);

  Td3 policy;
  TargetPair q_graph;

 private:
  double train_graph(const Batch& batch);

  LowAgentConfig config_;
  Vec2 center_{0.0, 0.0};
  Vec2 half_{1.0, 1.0};
  std::int64_t graph_updates_ = 0;
};

}  // namespace dhrl
