#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace dhrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

class BinaryWriter;
class BinaryReader;

/// Output layer transform. Bounded outputs are `offset + scale * tanh(z)`,
/// so a zero pre-activation lands on `offset`.
struct OutputMap {
  enum class Kind { Identity, Bounded };
  Kind kind = Kind::Identity;
  Vector scale;
  Vector offset;

  static OutputMap identity() { return {}; }
  static OutputMap bounded(Vector scale, Vector offset) {
    return {Kind::Bounded, std::move(scale), std::move(offset)};
  }
  Vector lower() const { return offset - scale; }
  Vector upper() const { return offset + scale; }
};

/// Fully connected network with rectifier hidden layers.
///
/// All weights and biases live in one flat parameter vector, layer by layer
/// (column-major weight block, then bias), so optimizers and target averaging
/// can work on the whole network at once. Inputs and outputs are column batches.
class Mlp {
 public:
  /// Activations recorded by a forward pass for the matching backward pass.
  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    Matrix output_pre;           // last layer before the output map
  };

  Mlp() = default;
  Mlp(std::vector<int> widths, OutputMap output = OutputMap::identity());

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  void init_uniform(Rng& rng);
  void set_zero() { params_.setZero(); }

  const std::vector<int>& widths() const { return widths_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  std::size_t layer_count() const { return widths_.size() - 1; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const OutputMap& output_map() const { return output_; }

  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  Eigen::Map<Matrix> weight(std::size_t layer);
  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;

  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, Tape& tape) const;

  /// Back-propagates d(loss)/d(output). Parameter gradients are added into
  /// `grad_params` when it is non-null; the return value is d(loss)/d(input).
  Matrix backward(const Tape& tape, const Matrix& grad_output, Vector* grad_params) const;

  bool all_finite() const { return params_.allFinite(); }

  void save(BinaryWriter& out) const;
  static Mlp load(BinaryReader& in);

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(widths_[layer + 1]) * widths_[layer];
  }
  Matrix apply_output(const Matrix& pre) const;

  std::vector<int> widths_;
  std::vector<std::size_t> offsets_;
  OutputMap output_;
  Vector params_;
};

/// Adam with the usual moment defaults. Non-finite gradients are rejected.
class Adam {
 public:
  struct Config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(std::size_t size, Config config);

  /// Returns false (and leaves everything untouched) on a non-finite gradient.
  bool step(Vector& params, const Vector& grad);

  const Config& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::int64_t steps() const { return t_; }
  std::int64_t skipped() const { return skipped_; }

  void save(BinaryWriter& out) const;
  static Adam load(BinaryReader& in);

 private:
  Config config_;
  Vector m_;
  Vector v_;
  std::int64_t t_ = 0;
  std::int64_t skipped_ = 0;
};

/// One Adam step on `net`. Returns false when the gradient was rejected.
bool gradient_step(Mlp& net, Adam& optimizer, const Vector& grad);

/// Online network, its slowly tracking target copy, and the online optimizer.
struct TargetPair {
  Mlp online;
  Mlp target;
  Adam optimizer;
  double tau = 0.005;
  int target_update_freq = 1;

  TargetPair() = default;
  TargetPair(Mlp net, Adam::Config opt, double tau, int target_update_freq);

  void hard_sync() { target.parameters() = online.parameters(); }

  void save(BinaryWriter& out) const;
  static TargetPair load(BinaryReader& in);
};

/// target <- (1 - tau) * target + tau * online.
void polyak_update(TargetPair& pair);

}  // namespace dhrl
