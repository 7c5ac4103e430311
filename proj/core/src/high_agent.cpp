#include "dhrl/high_agent.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dhrl/serialize.hpp"

namespace dhrl {

HighAgentConfig default_high_config(int c_h, double c_l) {
  HighAgentConfig c;
  c.c_h = c_h;
  c.c_l = c_l;
  c.p1 = -static_cast<double>(c_h);
  c.p2 = -2.0 * c_h;
  c.zeta1 = c_l;
  c.zeta2 = c_l;
  return c;
}

std::vector<HighTransition> hindsight_action_relabel(std::span<const HighTransition> batch) {
  std::vector<HighTransition> out(batch.begin(), batch.end());
  out.reserve(2 * batch.size());
  for (const HighTransition& tr : batch) {
    HighTransition copy = tr;
    copy.subgoal = tr.achieved_goal;
    out.push_back(copy);
  }
  return out;
}

double gradual_penalty(const WaypointGraph& graph, const Vec2& subgoal, const DistanceModel& model, bool achieved,
                       double zeta1, double p1, double p2, double base_reward, bool literal) {
  if (achieved) return base_reward;
  if (graph.empty()) return p1;
  const std::span<const Vec2> sg(&subgoal, 1);
  const double nearest = literal ? model.values(graph.nodes, sg).minCoeff() : model.distances(graph.nodes, sg).minCoeff();
  return nearest < zeta1 ? p1 : p2;
}

Vec2 fgs_shift(const WaypointGraph& graph, const Vec2& env_goal, const Vec2& initial_state, const DistanceModel& model,
               double zeta2, double noise_scale, const MazeSpec& spec, Rng& rng) {
  if (graph.empty()) return env_goal;
  const double nearest = model.distances(graph.nodes, std::span<const Vec2>(&env_goal, 1)).minCoeff();
  if (!(nearest < zeta2)) return env_goal;

  const Matrix q = model.values(std::span<const Vec2>(&initial_state, 1), graph.nodes);
  std::vector<double> weights(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) weights[i] = std::max(0.0, -q(0, static_cast<Eigen::Index>(i)));
  if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) std::fill(weights.begin(), weights.end(), 1.0);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const Vec2 node = graph.nodes[pick(rng)];

  std::normal_distribution<double> noise(0.0, noise_scale);
  for (int attempt = 0; attempt < 10; ++attempt) {
    Vec2 g = node + Vec2(noise(rng), noise(rng));
    g = g.cwiseMax(Vec2::Zero()).cwiseMin(spec.extents);
    if (!spec.in_wall(g)) return g;
  }
  return node.cwiseMax(Vec2::Zero()).cwiseMin(spec.extents);
}

HighAgent::HighAgent(const MazeSpec& spec, HighAgentConfig config, Rng& rng)
    : config_(std::move(config)), center_(0.5 * spec.extents), half_(0.5 * spec.extents) {
  if (config_.c_h < 1) throw std::invalid_argument("c_h must be at least 1");
  if (config_.p2 > config_.p1 || config_.p1 > 0.0) throw std::invalid_argument("penalties must satisfy p2 <= p1 <= 0");
  config_.td3.gamma = config_.gamma;
  // Window rewards are at least p2 (penalized) or -c_h (summed env rewards).
  const double worst = std::min(config_.p2, -static_cast<double>(config_.c_h));
  config_.td3.target_clip = std::make_pair(worst / (1.0 - config_.gamma), 0.0);
  policy = Td3(4, OutputMap::bounded(half_, center_), config_.td3, rng);
}

Matrix HighAgent::encode(std::span<const Vec2> states, std::span<const Vec2> goals) const {
  Matrix obs(4, static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    obs.block<2, 1>(0, c) = (states[i] - center_).cwiseQuotient(half_);
    obs.block<2, 1>(2, c) = (goals[i] - center_).cwiseQuotient(half_);
  }
  return obs;
}

Vec2 HighAgent::propose_subgoal(const Vec2& state, const Vec2& env_goal, bool explore, Rng& rng) const {
  Vec2 sg = policy.act(encode({&state, 1}, {&env_goal, 1})).col(0);
  if (explore) {
    std::normal_distribution<double> noise(0.0, 1.0);
    sg.x() += noise(rng) * config_.explore_noise * half_.x();
    sg.y() += noise(rng) * config_.explore_noise * half_.y();
  }
  return sg.cwiseMax(center_ - half_).cwiseMin(center_ + half_);
}

Vector HighAgent::shaped_rewards(std::span<const HighTransition> relabeled, std::size_t originals,
                                 const WaypointGraph* graph, const DistanceModel* low, bool use_gradual_penalty,
                                 bool ramp_in, HighTrainStats* stats) const {
  Vector r(static_cast<Eigen::Index>(relabeled.size()));
  std::vector<std::size_t> missed;
  for (std::size_t i = 0; i < relabeled.size(); ++i) {
    const HighTransition& tr = relabeled[i];
    r[static_cast<Eigen::Index>(i)] = tr.reward;
    const bool achieved = sparse_reward(tr.achieved_goal, tr.subgoal, config_.success_threshold) == 0.0;
    if (i < originals && !achieved) missed.push_back(i);
  }
  if (missed.empty()) return r;

  const bool graded = use_gradual_penalty && low != nullptr && graph != nullptr && !graph->empty();
  Eigen::RowVectorXd nearest;
  if (graded) {
    // One batched evaluation of every landmark against every missed subgoal.
    std::vector<Vec2> subgoals;
    for (std::size_t i : missed) subgoals.push_back(relabeled[i].subgoal);
    const Matrix m = config_.gradual_penalty_literal ? low->values(graph->nodes, subgoals)
                                                     : low->distances(graph->nodes, subgoals);
    nearest = m.colwise().minCoeff();
  }
  // During the ramp-in period far subgoals are treated like near ones.
  const double far = ramp_in ? config_.p1 : config_.p2;
  for (std::size_t k = 0; k < missed.size(); ++k) {
    double reward = config_.p1;
    if (graded) reward = nearest[static_cast<Eigen::Index>(k)] < config_.zeta1 ? config_.p1 : far;
    r[static_cast<Eigen::Index>(missed[k])] = reward;
    if (stats) {
      ++stats->penalized;
      if (graded && reward == far && !ramp_in) ++stats->far_penalized;
    }
  }
  return r;
}

HighTrainStats HighAgent::train(const HighBuffer& buffer, std::size_t batch_size, const WaypointGraph* graph,
                                const DistanceModel* low, bool use_gradual_penalty, bool ramp_in, Rng& rng) {
  HighTrainStats stats;
  if (batch_size == 0 || buffer.size() < batch_size) return stats;
  std::vector<HighTransition> sampled;
  sampled.reserve(batch_size);
  for (auto s : buffer.sample(batch_size, rng)) sampled.push_back(buffer.at(s));
  const auto all = hindsight_action_relabel(sampled);

  std::vector<Vec2> states, goals, next_states;
  for (const auto& tr : all) {
    states.push_back(tr.state);
    goals.push_back(tr.env_goal);
    next_states.push_back(tr.next_state);
  }
  Batch b;
  b.obs = encode(states, goals);
  b.next_obs = encode(next_states, goals);
  b.action.resize(2, static_cast<Eigen::Index>(all.size()));
  b.done.resize(static_cast<Eigen::Index>(all.size()));
  for (std::size_t i = 0; i < all.size(); ++i) {
    b.action.col(static_cast<Eigen::Index>(i)) = all[i].subgoal;
    b.done[static_cast<Eigen::Index>(i)] = all[i].goal_reached ? 1.0 : 0.0;
  }
  b.reward = shaped_rewards(all, sampled.size(), graph, low, use_gradual_penalty, ramp_in, &stats);
  stats.td3 = policy.update(b, rng);
  stats.trained = true;
  return stats;
}

void HighAgent::save(BinaryWriter& out) const {
  out.f64(config_.gamma);
  out.i64(config_.c_h);
  out.f64(config_.c_l);
  out.f64(config_.p1);
  out.f64(config_.p2);
  out.f64(config_.zeta1);
  out.f64(config_.zeta2);
  out.f64(config_.explore_noise);
  out.boolean(config_.gradual_penalty_literal);
  out.f64(config_.success_threshold);
  out.f64(center_.x());
  out.f64(center_.y());
  out.f64(half_.x());
  out.f64(half_.y());
  policy.save(out);
}

HighAgent HighAgent::load(BinaryReader& in) {
  HighAgent a;
  a.config_.gamma = in.f64();
  a.config_.c_h = static_cast<int>(in.i64());
  a.config_.c_l = in.f64();
  a.config_.p1 = in.f64();
  a.config_.p2 = in.f64();
  a.config_.zeta1 = in.f64();
  a.config_.zeta2 = in.f64();
  a.config_.explore_noise = in.f64();
  a.config_.gradual_penalty_literal = in.boolean();
  a.config_.success_threshold = in.f64();
  a.center_.x() = in.f64();
  a.center_.y() = in.f64();
  a.half_.x() = in.f64();
  a.half_.y() = in.f64();
  a.policy = Td3::load(in);
  a.config_.td3 = a.policy.config();
  return a;
}

}  // namespace dhrl
