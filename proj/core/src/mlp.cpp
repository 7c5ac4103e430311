#include "dhrl/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "dhrl/serialize.hpp"

namespace dhrl {

Mlp::Mlp(std::vector<int> widths, OutputMap output) : widths_(std::move(widths)), output_(std::move(output)) {
  if (widths_.size() < 2) throw std::invalid_argument("an Mlp needs at least an input and an output width");
  for (int w : widths_) {
    if (w <= 0) throw std::invalid_argument("Mlp layer widths must be positive");
  }
  if (output_.kind == OutputMap::Kind::Bounded &&
      (output_.scale.size() != widths_.back() || output_.offset.size() != widths_.back())) {
    throw std::invalid_argument("bounded output map does not match the output width");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(widths_[l + 1]) * (widths_[l] + 1);
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(total));
}

void Mlp::init_uniform(Rng& rng) {
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto w = weight(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    auto b = bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
  }
}

Eigen::Map<Matrix> Mlp::weight(std::size_t layer) {
  return {params_.data() + weight_offset(layer), widths_[layer + 1], widths_[layer]};
}
Eigen::Map<const Matrix> Mlp::weight(std::size_t layer) const {
  return {params_.data() + weight_offset(layer), widths_[layer + 1], widths_[layer]};
}
Eigen::Map<Vector> Mlp::bias(std::size_t layer) {
  return {params_.data() + bias_offset(layer), widths_[layer + 1]};
}
Eigen::Map<const Vector> Mlp::bias(std::size_t layer) const {
  return {params_.data() + bias_offset(layer), widths_[layer + 1]};
}

Matrix Mlp::apply_output(const Matrix& pre) const {
  if (output_.kind == OutputMap::Kind::Identity) return pre;
  Matrix out = pre.array().tanh();
  out = (out.array().colwise() * output_.scale.array()).colwise() + output_.offset.array();
  return out;
}

Matrix Mlp::forward(const Matrix& input) const {
  Tape tape;
  return forward(input, tape);
}

Matrix Mlp::forward(const Matrix& input, Tape& tape) const {
  if (input.rows() != input_dim()) throw std::invalid_argument("Mlp input has the wrong dimension");
  const std::size_t layers = layer_count();
  tape.inputs.resize(layers);
  tape.inputs[0] = input;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z(widths_[l + 1], input.cols());
    z.noalias() = weight(l) * tape.inputs[l];
    z.colwise() += bias(l);
    if (l + 1 < layers) {
      tape.inputs[l + 1] = z.cwiseMax(0.0);
    } else {
      tape.output_pre = std::move(z);
    }
  }
  return apply_output(tape.output_pre);
}

Matrix Mlp::backward(const Tape& tape, const Matrix& grad_output, Vector* grad_params) const {
  Matrix dz;
  if (output_.kind == OutputMap::Kind::Identity) {
    dz = grad_output;
  } else {
    const Matrix t = tape.output_pre.array().tanh();
    dz = (grad_output.array() * (1.0 - t.array().square())).colwise() * output_.scale.array();
  }
  if (grad_params && grad_params->size() != params_.size()) {
    *grad_params = Vector::Zero(params_.size());
  }
  for (std::size_t l = layer_count(); l-- > 0;) {
    const Matrix& a = tape.inputs[l];
    if (grad_params) {
      Eigen::Map<Matrix> gw(grad_params->data() + weight_offset(l), widths_[l + 1], widths_[l]);
      Eigen::Map<Vector> gb(grad_params->data() + bias_offset(l), widths_[l + 1]);
      gw.noalias() += dz * a.transpose();
      gb += dz.rowwise().sum();
    }
    Matrix da(widths_[l], dz.cols());
    da.noalias() = weight(l).transpose() * dz;
    if (l == 0) return da;
    dz = (a.array() > 0.0).select(da, 0.0);
  }
  return dz;  // unreachable: layer_count() >= 1
}

void Mlp::save(BinaryWriter& out) const {
  out.ints(widths_);
  out.u32(output_.kind == OutputMap::Kind::Bounded ? 1u : 0u);
  if (output_.kind == OutputMap::Kind::Bounded) {
    out.vec(output_.scale);
    out.vec(output_.offset);
  }
  out.vec(params_);
}

Mlp Mlp::load(BinaryReader& in) {
  auto widths = in.ints();
  OutputMap map;
  if (in.u32() == 1u) {
    Vector scale = in.vec();
    Vector offset = in.vec();
    map = OutputMap::bounded(std::move(scale), std::move(offset));
  }
  Mlp net(std::move(widths), std::move(map));
  Vector p = in.vec();
  if (p.size() != net.params_.size()) throw CheckpointError("checkpoint parameter count mismatch");
  net.params_ = std::move(p);
  return net;
}

Adam::Adam(std::size_t size, Config config)
    : config_(config), m_(Vector::Zero(static_cast<Eigen::Index>(size))), v_(Vector::Zero(static_cast<Eigen::Index>(size))) {}

bool Adam::step(Vector& params, const Vector& grad) {
  if (grad.size() != params.size() || params.size() != m_.size()) {
    throw std::invalid_argument("Adam step size mismatch");
  }
  if (!grad.allFinite()) {
    ++skipped_;
    return false;
  }
  ++t_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  params.array() -= config_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.eps);
  return true;
}

void Adam::save(BinaryWriter& out) const {
  out.f64(config_.lr);
  out.f64(config_.beta1);
  out.f64(config_.beta2);
  out.f64(config_.eps);
  out.vec(m_);
  out.vec(v_);
  out.i64(t_);
  out.i64(skipped_);
}

Adam Adam::load(BinaryReader& in) {
  Adam a;
  a.config_.lr = in.f64();
  a.config_.beta1 = in.f64();
  a.config_.beta2 = in.f64();
  a.config_.eps = in.f64();
  a.m_ = in.vec();
  a.v_ = in.vec();
  a.t_ = in.i64();
  a.skipped_ = in.i64();
  return a;
}

bool gradient_step(Mlp& net, Adam& optimizer, const Vector& grad) {
  const bool applied = optimizer.step(net.parameters(), grad);
  if (applied && !net.all_finite()) throw std::runtime_error("network parameters became non-finite");
  return applied;
}

TargetPair::TargetPair(Mlp net, Adam::Config opt, double tau_, int freq)
    : online(std::move(net)), target(online), optimizer(online.parameter_count(), opt), tau(tau_), target_update_freq(freq) {
  if (freq < 1) throw std::invalid_argument("target_update_freq must be at least 1");
}

void TargetPair::save(BinaryWriter& out) const {
  online.save(out);
  target.save(out);
  optimizer.save(out);
  out.f64(tau);
  out.i64(target_update_freq);
}

TargetPair TargetPair::load(BinaryReader& in) {
  TargetPair p;
  p.online = Mlp::load(in);
  p.target = Mlp::load(in);
  p.optimizer = Adam::load(in);
  p.tau = in.f64();
  p.target_update_freq = static_cast<int>(in.i64());
  return p;
}

void polyak_update(TargetPair& pair) {
  if (pair.tau == 1.0) {
    pair.hard_sync();
    return;
  }
  if (pair.tau == 0.0) return;
  pair.target.parameters() = (1.0 - pair.tau) * pair.target.parameters() + pair.tau * pair.online.parameters();
}

}  // namespace dhrl
