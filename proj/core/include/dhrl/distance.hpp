#pragma once

#include <span>

#include "dhrl/env.hpp"
#include "dhrl/mlp.hpp"

namespace dhrl {

/// Number of steps n such that the discounted sum of n rewards of -1 equals q:
/// log_gamma(1 + (1 - gamma) q). Returns 0 for q >= 0 and +inf when the log
/// argument is at or below `floor_eps` or q is not finite.
double distance_from_q(double q, double gamma, double floor_eps = 1e-6);

/// Inverse of distance_from_q on finite distances: -(1 - gamma^n) / (1 - gamma).
double q_from_distance(double steps, double gamma);

/// Temporal distances between goal-space points. Implemented by the learned
/// low-level agent and by the exact grid oracle used for verification.
class DistanceModel {
 public:
  virtual ~DistanceModel() = default;

  /// Row i, column j holds Dist(from_i -> to_j).
  virtual Matrix distances(std::span<const Vec2> from, std::span<const Vec2> to) const = 0;

  /// Row i, column j holds the goal-conditioned value Q(from_i, pi(from_i, to_j) | to_j).
  virtual Matrix values(std::span<const Vec2> from, std::span<const Vec2> to) const = 0;

  double distance(const Vec2& from, const Vec2& to) const {
    return distances(std::span<const Vec2>(&from, 1), std::span<const Vec2>(&to, 1))(0, 0);
  }
};

}  // namespace dhrl
