#include "dhrl/low_agent.hpp"

#include <cmath>
#include <stdexcept>

#include "dhrl/serialize.hpp"

namespace dhrl {

double distance_from_q(double q, double gamma, double floor_eps) {
  if (!std::isfinite(q)) return kInf;
  if (q >= 0.0) return 0.0;
  const double arg = 1.0 + (1.0 - gamma) * q;
  if (arg <= floor_eps) return kInf;
  return std::log(arg) / std::log(gamma);
}

double q_from_distance(double steps, double gamma) {
  if (std::isinf(steps)) return -1.0 / (1.0 - gamma);
  return -(1.0 - std::pow(gamma, steps)) / (1.0 - gamma);
}

LowAgent::LowAgent(const MazeSpec& spec, LowAgentConfig config, Rng& rng)
    : config_(std::move(config)), center_(0.5 * spec.extents), half_(0.5 * spec.extents) {
  config_.td3.gamma = config_.gamma;
  config_.td3.target_clip = std::make_pair(-1.0 / (1.0 - config_.gamma), 0.0);
  const OutputMap bounds =
      OutputMap::bounded(Vector::Constant(2, config_.action_limit), Vector::Zero(2));
  policy = Td3(4, bounds, config_.td3, rng);
  Mlp graph_net(layer_widths(6, config_.td3.hidden, 1));
  graph_net.init_uniform(rng);
  q_graph = TargetPair(std::move(graph_net), {config_.td3.critic_lr}, config_.td3.tau, config_.td3.target_update_freq);
}

Matrix LowAgent::encode(std::span<const Vec2> states, std::span<const Vec2> goals) const {
  Matrix obs(4, static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    obs.block<2, 1>(0, c) = (states[i] - center_).cwiseQuotient(half_);
    obs.block<2, 1>(2, c) = (goals[i] - states[i]).cwiseQuotient(half_);
  }
  return obs;
}

Vec2 LowAgent::act(const Vec2& state, const Vec2& waypoint, bool explore, Rng& rng) const {
  Vec2 a = policy.act(encode({&state, 1}, {&waypoint, 1})).col(0);
  if (explore) {
    std::normal_distribution<double> noise(0.0, config_.explore_noise * config_.action_limit);
    a.x() += noise(rng);
    a.y() += noise(rng);
  }
  return a.cwiseMax(-config_.action_limit).cwiseMin(config_.action_limit);
}

Matrix LowAgent::values(std::span<const Vec2> from, std::span<const Vec2> to) const {
  const auto rows = static_cast<Eigen::Index>(from.size());
  const auto cols = static_cast<Eigen::Index>(to.size());
  Matrix out(rows, cols);
  if (rows == 0 || cols == 0) return out;
  std::vector<Vec2> s, g;
  s.reserve(from.size() * to.size());
  g.reserve(from.size() * to.size());
  for (const Vec2& a : from) {
    for (const Vec2& b : to) {
      s.push_back(a);
      g.push_back(b);
    }
  }
  // Chunked to bound the size of intermediate activations.
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < s.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, s.size() - start);
    const Matrix obs = encode({s.data() + start, n}, {g.data() + start, n});
    const Matrix action = policy.act(obs);
    const Matrix q = distance_network().forward(critic_input(obs, action));
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t idx = start + k;
      out(static_cast<Eigen::Index>(idx / to.size()), static_cast<Eigen::Index>(idx % to.size())) =
          q(0, static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

Matrix LowAgent::distances(std::span<const Vec2> from, std::span<const Vec2> to) const {
  Matrix q = values(from, to);
  return q.unaryExpr([this](double v) { return distance_from_q(v, config_.gamma, config_.floor_eps); });
}

double LowAgent::recover_distance(const Vec2& state, const Vec2& goal) const { return distance(state, goal); }

LowBatches LowAgent::make_batches(const LowBuffer& buffer, std::size_t batch_size, Rng& rng) const {
  const auto seqs = buffer.sample(batch_size, rng);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(batch_size);

  LowBatches out;
  auto alloc = [n](Batch& b) {
    b.obs.resize(4, n);
    b.next_obs.resize(4, n);
    b.action.resize(2, n);
    b.reward.resize(n);
    b.done.resize(n);
  };
  alloc(out.critic);
  alloc(out.graph);
  out.critic_relabeled.resize(batch_size);
  out.graph_relabeled.resize(batch_size);

  auto fill = [&](Batch& b, Eigen::Index col, const LowTransition& tr, const Vec2& goal) {
    b.obs.col(col) = encode({&tr.state, 1}, {&goal, 1}).col(0);
    b.next_obs.col(col) = encode({&tr.next_state, 1}, {&goal, 1}).col(0);
    b.action.col(col) = tr.action;
    const double r = sparse_reward(tr.achieved_goal, goal, config_.success_threshold);
    b.reward[col] = r;
    b.done[col] = r == 0.0 ? 1.0 : 0.0;
  };
  auto future_goal = [&](LowBuffer::Seq seq) {
    const auto last = buffer.episode_last(seq);
    std::uniform_int_distribution<LowBuffer::Seq> offset(0, last - seq);
    return buffer.at(seq + offset(rng)).achieved_goal;
  };

  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const LowTransition& tr = buffer.at(seqs[i]);
    Vec2 goal = tr.waypoint_goal;
    if (coin(rng) < config_.critic_relabel_fraction) {
      goal = future_goal(seqs[i]);
      out.critic_relabeled[i] = true;
    }
    fill(out.critic, col, tr, goal);

    goal = tr.waypoint_goal;
    if (coin(rng) < config_.graph_relabel_fraction) {
      goal = future_goal(seqs[i]);
      out.graph_relabeled[i] = true;
    }
    fill(out.graph, col, tr, goal);
  }
  return out;
}

double LowAgent::train_graph(const Batch& batch) {
  const Matrix next_action = policy.actor.target.forward(batch.next_obs);
  const Matrix next_q = q_graph.target.forward(critic_input(batch.next_obs, next_action));
  Vector y = batch.reward.array() + config_.gamma * (1.0 - batch.done.array()) * next_q.row(0).transpose().array();
  y = y.cwiseMax(-1.0 / (1.0 - config_.gamma)).cwiseMin(0.0);

  Mlp::Tape tape;
  const Matrix q = q_graph.online.forward(critic_input(batch.obs, batch.action), tape);
  const Eigen::RowVectorXd err = q.row(0) - y.transpose();
  const double n = static_cast<double>(y.size());
  Vector grad;
  q_graph.online.backward(tape, (2.0 / n) * err, &grad);
  gradient_step(q_graph.online, q_graph.optimizer, grad);
  if (++graph_updates_ % q_graph.target_update_freq == 0) polyak_update(q_graph);
  return err.squaredNorm() / n;
}

LowTrainStats LowAgent::train_on(const LowBatches& batches, Rng& rng) {
  LowTrainStats stats;
  stats.critic = policy.update(batches.critic, rng);
  if (config_.separate_graph_q) stats.graph_loss = train_graph(batches.graph);
  stats.trained = true;
  return stats;
}

LowTrainStats LowAgent::train(const LowBuffer& buffer, std::size_t batch_size, Rng& rng) {
  if (buffer.size() < batch_size || batch_size == 0) return {};
  return train_on(make_batches(buffer, batch_size, rng), rng);
}

void LowAgent::set_learning_rates(double actor_lr, double critic_lr) {
  policy.set_learning_rates(actor_lr, critic_lr);
  q_graph.optimizer.set_lr(critic_lr);
}

void LowAgent::save(BinaryWriter& out) const {
  out.f64(config_.gamma);
  out.f64(config_.action_limit);
  out.f64(config_.explore_noise);
  out.f64(config_.critic_relabel_fraction);
  out.f64(config_.graph_relabel_fraction);
  out.f64(config_.success_threshold);
  out.boolean(config_.separate_graph_q);
  out.f64(config_.floor_eps);
  out.f64(center_.x());
  out.f64(center_.y());
  out.f64(half_.x());
  out.f64(half_.y());
  out.i64(graph_updates_);
  policy.save(out);
  q_graph.save(out);
}

LowAgent LowAgent::load(BinaryReader& in) {
  LowAgent a;
  a.config_.gamma = in.f64();
  a.config_.action_limit = in.f64();
  a.config_.explore_noise = in.f64();
  a.config_.critic_relabel_fraction = in.f64();
  a.config_.graph_relabel_fraction = in.f64();
  a.config_.success_threshold = in.f64();
  a.config_.separate_graph_q = in.boolean();
  a.config_.floor_eps = in.f64();
  a.center_.x() = in.f64();
  a.center_.y() = in.f64();
  a.half_.x() = in.f64();
  a.half_.y() = in.f64();
  a.graph_updates_ = in.i64();
  a.policy = Td3::load(in);
  a.q_graph = TargetPair::load(in);
  a.config_.td3 = a.policy.config();
  return a;
}

}  // namespace dhrl
