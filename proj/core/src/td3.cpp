#include "dhrl/td3.hpp"

#include <stdexcept>

#include "dhrl/serialize.hpp"

namespace dhrl {

std::vector<int> layer_widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Matrix critic_input(const Matrix& obs, const Matrix& action) {
  Matrix x(obs.rows() + action.rows(), obs.cols());
  x.topRows(obs.rows()) = obs;
  x.bottomRows(action.rows()) = action;
  return x;
}

Vector td3_critic_target(const Mlp& q1_target, const Mlp& q2_target, const Mlp& actor_target, const Batch& batch,
                         double gamma, const Matrix& smoothing_noise,
                         const std::optional<std::pair<double, double>>& clip) {
  Matrix next_action = actor_target.forward(batch.next_obs) + smoothing_noise;
  const OutputMap& bounds = actor_target.output_map();
  if (bounds.kind == OutputMap::Kind::Bounded) {
    next_action = next_action.cwiseMax(bounds.lower().replicate(1, next_action.cols()))
                      .cwiseMin(bounds.upper().replicate(1, next_action.cols()));
  }
  const Matrix in = critic_input(batch.next_obs, next_action);
  const Vector q = q1_target.forward(in).row(0).cwiseMin(q2_target.forward(in).row(0)).transpose();
  Vector y = batch.reward.array() + gamma * (1.0 - batch.done.array()) * q.array();
  if (clip) y = y.cwiseMax(clip->first).cwiseMin(clip->second);
  return y;
}

Td3::Td3(int obs_dim, OutputMap action_bounds, Td3Config config, Rng& rng)
    : obs_dim_(obs_dim), action_dim_(static_cast<int>(action_bounds.scale.size())), config_(std::move(config)) {
  if (action_bounds.kind != OutputMap::Kind::Bounded) throw std::invalid_argument("TD3 actor needs bounded outputs");
  Mlp actor_net(layer_widths(obs_dim_, config_.hidden, action_dim_), std::move(action_bounds));
  actor_net.init_uniform(rng);
  Mlp q1_net(layer_widths(obs_dim_ + action_dim_, config_.hidden, 1));
  q1_net.init_uniform(rng);
  Mlp q2_net(layer_widths(obs_dim_ + action_dim_, config_.hidden, 1));
  q2_net.init_uniform(rng);
  actor = TargetPair(std::move(actor_net), {config_.actor_lr}, config_.tau, config_.target_update_freq);
  q1 = TargetPair(std::move(q1_net), {config_.critic_lr}, config_.tau, config_.target_update_freq);
  q2 = TargetPair(std::move(q2_net), {config_.critic_lr}, config_.tau, config_.target_update_freq);
}

Matrix Td3::q1_value(const Matrix& obs, const Matrix& action) const {
  return q1.online.forward(critic_input(obs, action));
}

Matrix Td3::smoothing_noise(Eigen::Index batch, Rng& rng) const {
  const OutputMap& bounds = actor.online.output_map();
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix noise(action_dim_, batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (int i = 0; i < action_dim_; ++i) {
      const double s = bounds.scale[i];
      noise(i, j) = std::clamp(gauss(rng) * config_.policy_noise * s, -config_.noise_clip * s, config_.noise_clip * s);
    }
  }
  return noise;
}

double Td3::critic_step(TargetPair& critic, const Matrix& input, const Vector& y, int& rejected) {
  Mlp::Tape tape;
  const Matrix q = critic.online.forward(input, tape);
  const Eigen::RowVectorXd err = q.row(0) - y.transpose();
  const double n = static_cast<double>(y.size());
  Vector grad;
  critic.online.backward(tape, (2.0 / n) * err, &grad);
  if (!gradient_step(critic.online, critic.optimizer, grad)) ++rejected;
  return err.squaredNorm() / n;
}

Vector Td3::actor_gradient(const Matrix& obs, double* loss) const {
  Mlp::Tape actor_tape;
  const Matrix action = actor.online.forward(obs, actor_tape);
  Mlp::Tape q_tape;
  const Matrix q = q1.online.forward(critic_input(obs, action), q_tape);
  const double n = static_cast<double>(obs.cols());
  if (loss) *loss = -q.mean();
  const Matrix dq = Matrix::Constant(1, obs.cols(), -1.0 / n);
  const Matrix d_in = q1.online.backward(q_tape, dq, nullptr);
  Vector grad;
  actor.online.backward(actor_tape, d_in.bottomRows(action_dim_), &grad);
  return grad;
}

Td3Stats Td3::update(const Batch& batch, Rng& rng) {
  Td3Stats stats;
  const Vector y = td3_critic_target(q1.target, q2.target, actor.target, batch, config_.gamma,
                                     smoothing_noise(batch.size(), rng), config_.target_clip);
  const Matrix in = critic_input(batch.obs, batch.action);
  stats.critic_loss = 0.5 * (critic_step(q1, in, y, stats.rejected_updates) +
                             critic_step(q2, in, y, stats.rejected_updates));
  ++updates_;
  if (updates_ % config_.actor_update_freq == 0) {
    const Vector grad = actor_gradient(batch.obs, &stats.actor_loss);
    if (!gradient_step(actor.online, actor.optimizer, grad)) ++stats.rejected_updates;
    stats.actor_updated = true;
  }
  if (updates_ % config_.target_update_freq == 0) {
    polyak_update(actor);
    polyak_update(q1);
    polyak_update(q2);
    stats.targets_updated = true;
  }
  return stats;
}

void Td3::set_learning_rates(double actor_lr, double critic_lr) {
  config_.actor_lr = actor_lr;
  config_.critic_lr = critic_lr;
  actor.optimizer.set_lr(actor_lr);
  q1.optimizer.set_lr(critic_lr);
  q2.optimizer.set_lr(critic_lr);
}

void Td3::save(BinaryWriter& out) const {
  out.i64(obs_dim_);
  out.i64(action_dim_);
  out.ints(config_.hidden);
  out.f64(config_.actor_lr);
  out.f64(config_.critic_lr);
  out.f64(config_.gamma);
  out.f64(config_.tau);
  out.i64(config_.target_update_freq);
  out.i64(config_.actor_update_freq);
  out.f64(config_.policy_noise);
  out.f64(config_.noise_clip);
  out.boolean(config_.target_clip.has_value());
  if (config_.target_clip) {
    out.f64(config_.target_clip->first);
    out.f64(config_.target_clip->second);
  }
  out.i64(updates_);
  actor.save(out);
  q1.save(out);
  q2.save(out);
}

Td3 Td3::load(BinaryReader& in) {
  Td3 t;
  t.obs_dim_ = static_cast<int>(in.i64());
  t.action_dim_ = static_cast<int>(in.i64());
  t.config_.hidden = in.ints();
  t.config_.actor_lr = in.f64();
  t.config_.critic_lr = in.f64();
  t.config_.gamma = in.f64();
  t.config_.tau = in.f64();
  t.config_.target_update_freq = static_cast<int>(in.i64());
  t.config_.actor_update_freq = static_cast<int>(in.i64());
  t.config_.policy_noise = in.f64();
  t.config_.noise_clip = in.f64();
  if (in.boolean()) {
    const double lo = in.f64();
    const double hi = in.f64();
    t.config_.target_clip = std::make_pair(lo, hi);
  }
  t.updates_ = in.i64();
  t.actor = TargetPair::load(in);
  t.q1 = TargetPair::load(in);
  t.q2 = TargetPair::load(in);
  return t;
}

}  // namespace dhrl
