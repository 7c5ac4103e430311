#pragma once

#include <span>
#include <vector>

#include "dhrl/distance.hpp"
#include "dhrl/env.hpp"
#include "dhrl/graph.hpp"
#include "dhrl/replay.hpp"
#include "dhrl/td3.hpp"

namespace dhrl {

struct HighAgentConfig {
  Td3Config td3;
  double gamma = 0.99;
  /// Env steps between subgoals.
  int c_h = 50;
  /// Edge cutoff / low-level leg horizon. Kept for the c_h >= c_l check.
  double c_l = 30.0;
  /// Unachieved subgoal near the graph, and far from it. p2 <= p1 <= 0.
  double p1 = -50.0;
  double p2 = -100.0;
  /// Gradual-penalty nearness threshold in steps.
  double zeta1 = 30.0;
  /// Frontier goal-shifting cut-off in steps.
  double zeta2 = 30.0;
  /// Exploration noise std as a fraction of the maze half-extents.
  double explore_noise = 0.1;
  /// Compare the raw graph Q-value (instead of the distance) with zeta1.
  bool gradual_penalty_literal = false;
  /// Subgoal achievement radius; the environment success threshold.
  double success_threshold = 2.5;
};

/// Defaults tied to c_h and c_l: p1 = -c_h, p2 = -2 c_h, zeta1 = zeta2 = c_l.
HighAgentConfig default_high_config(int c_h, double c_l);

struct HighTrainStats {
  bool trained = false;
  Td3Stats td3;
  int penalized = 0;
  int far_penalized = 0;
};

/// Original transitions followed by copies whose subgoal is replaced by the
/// goal achieved at the end of the window. Rewards are left untouched.
std::vector<HighTransition> hindsight_action_relabel(std::span<const HighTransition> batch);

/// Reward for one original high-level transition.
///
/// Achieved subgoals keep `base_reward`. Otherwise the subgoal is near the
/// graph when min over landmarks v of Dist(v -> sg) < zeta1 and gets p1, and
/// p2 when it is far. With `literal` set the minimum graph Q-value is compared
/// with zeta1 instead of the distance. An empty graph yields p1.
double gradual_penalty(const WaypointGraph& graph, const Vec2& subgoal, const DistanceModel& model, bool achieved,
                       double zeta1, double p1, double p2, double base_reward, bool literal = false);

/// Frontier-based goal shifting at episode reset.
///
/// When some landmark is within zeta2 of the goal the goal is replaced by a
/// landmark drawn with probability proportional to -Q(s0, pi(s0, v) | v), plus
/// Gaussian noise of std `noise_scale`, kept inside the maze extents (and out
/// of walls; the bare landmark is used if ten noisy draws all land in walls).
Vec2 fgs_shift(const WaypointGraph& graph, const Vec2& env_goal, const Vec2& initial_state, const DistanceModel& model,
               double zeta2, double noise_scale, const MazeSpec& spec, Rng& rng);

/// High-level TD3 agent emitting subgoals bounded to the maze extents.
class HighAgent {
 public:
  HighAgent() = default;
  HighAgent(const MazeSpec& spec, HighAgentConfig config, Rng& rng);

  const HighAgentConfig& config() const { return config_; }

  Vec2 propose_subgoal(const Vec2& state, const Vec2& env_goal, bool explore, Rng& rng) const;

  /// Rewards for a sampled batch after relabeling: originals with unachieved
  /// subgoals are penalized, relabeled copies keep their reward.
  Vector shaped_rewards(std::span<const HighTransition> relabeled, std::size_t originals, const WaypointGraph* graph,
                        const DistanceModel* low, bool use_gradual_penalty, bool ramp_in, HighTrainStats* stats) const;

  /// Samples a batch, doubles it with hindsight subgoals, shapes rewards and
  /// runs one TD3 update. No-op below batch_size stored transitions.
  HighTrainStats train(const HighBuffer& buffer, std::size_t batch_size, const WaypointGraph* graph,
                       const DistanceModel* low, bool use_gradual_penalty, bool ramp_in, Rng& rng);

  Matrix encode(std::span<const Vec2> states, std::span<const Vec2> goals) const;

  void set_learning_rates(double actor_lr, double critic_lr) { policy.set_learning_rates(actor_lr, critic_lr); }

  void save(BinaryWriter& out) const;
  static HighAgent load(BinaryReader& in);

  Td3 policy;

 private:
  HighAgentConfig config_;
  Vec2 center_{0.0, 0.0};
  Vec2 half_{1.0, 1.0};
};

}  // namespace dhrl
