#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "dhrl/distance.hpp"
#include "dhrl/env.hpp"
#include "dhrl/graph.hpp"
#include "dhrl/grid_oracle.hpp"

namespace dhrl {

/// Exact grid distances behind the DistanceModel interface. Values are the
/// discounted returns matching each distance under `gamma`.
class OracleDistanceModel : public DistanceModel {
 public:
  explicit OracleDistanceModel(std::shared_ptr<const GridOracle> oracle, double gamma = 0.99);

  Matrix distances(std::span<const Vec2> from, std::span<const Vec2> to) const override;
  Matrix values(std::span<const Vec2> from, std::span<const Vec2> to) const override;

  const GridOracle& oracle() const { return *oracle_; }
  /// Move counts from one cell to all cells, cached.
  const std::vector<std::int32_t>& field(GridOracle::Cell source) const;

 private:
  std::shared_ptr<const GridOracle> oracle_;
  double gamma_;
  mutable std::unordered_map<GridOracle::Cell, std::vector<std::int32_t>> cache_;
};

struct ResolutionReport {
  double epsilon = 0.0;
  bool is_resolution_graph = false;
  /// max over sampled points s of min over nodes v of max(Dist(s -> v), Dist(v -> s)).
  double worst_gap = kInf;
  std::size_t samples = 0;
};

/// Checks the epsilon-resolution condition with oracle distances on free-space
/// points sampled on a grid of the given spacing (world units).
ResolutionReport check_resolution(const WaypointGraph& graph, const MazeSpec& spec, double epsilon,
                                  double spacing = 0.25, double oracle_resolution = 0.25);

/// Graph whose nodes are oracle grid cells chosen by farthest point sampling
/// until every free cell lies strictly within `epsilon` steps of a node. Edges
/// carry oracle distances below `cutoff`.
WaypointGraph build_resolution_graph(const OracleDistanceModel& model, double epsilon, double cutoff);

struct ErrorRateSample {
  Vec2 start{0.0, 0.0};
  Vec2 goal{0.0, 0.0};
  Vec2 traversed_endpoint{0.0, 0.0};
  /// Dist(endpoint -> goal) / Dist(start -> goal).
  double rho = 0.0;
  double total_steps = 0.0;
  std::size_t waypoints = 0;
};

enum class WaypointChain {
  /// Waypoints from plan() over the graph.
  Dijkstra,
  /// The geometric chain: landmarks near the points c_l - eps steps further
  /// along a shortest path from the previous waypoint.
  Constructive,
};

struct ErrorRateReport {
  std::vector<ErrorRateSample> samples;
  std::size_t skipped_degenerate = 0;
  std::size_t skipped_disconnected = 0;
  double max_rho = 0.0;
};

/// Draws random free (start, goal) cell pairs and follows the waypoint chain
/// with the greedy oracle policy for T = Dist(start -> goal) steps. Plans use
/// `planner` (the oracle itself or a learned model); motion and rho always use
/// the oracle. `epsilon` is only needed by the constructive chain.
ErrorRateReport measure_error_rate(const MazeSpec& spec, const WaypointGraph& graph, double c_l, std::size_t trials,
                                   Rng& rng, const OracleDistanceModel& oracle, const DistanceModel& planner,
                                   WaypointChain chain = WaypointChain::Dijkstra, double epsilon = 0.0);

/// Value iteration on an n-state corridor: from state s toward goal g, actions
/// move one state left, right or stay; every step off the goal costs -1 and the
/// goal is absorbing with value 0. Entry (s, g) is max_a Q(s, a | g).
Matrix corridor_q_iteration(int n_states, double gamma, double tolerance = 1e-12, int max_iterations = 100000);

}  // namespace dhrl
