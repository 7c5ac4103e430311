#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dhrl/distance.hpp"
#include "dhrl/env.hpp"
#include "dhrl/replay.hpp"

namespace dhrl {

/// Landmarks in goal space joined by directed temporal-distance edges.
/// cost(i, j) is finite iff Dist(i -> j) < cutoff; there are no self-loops.
struct WaypointGraph {
  std::vector<Vec2> nodes;
  Matrix cost;
  double cutoff = 30.0;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  bool has_edge(std::size_t i, std::size_t j) const;
  std::size_t edge_count() const;
  double mean_edge_cost() const;

  /// Keeps entries below the cutoff (off the diagonal) and drops the rest.
  static WaypointGraph from_distances(std::vector<Vec2> nodes, const Matrix& full, double cutoff);
};

struct FpsResult {
  std::vector<std::size_t> selected;
  /// Running min-distance maximum at the moment each point was picked
  /// (+inf for the first pick).
  std::vector<double> pick_radius;
  /// max over the pool of the distance from the nearest selected point.
  double covering_radius = kInf;
};

/// Greedy farthest point sampling over a pool of `pool_size` items.
/// `dist_from(i)` returns Dist(i -> j) for every pool index j. Starts from
/// index 0; ties go to the lower index; a point is never picked twice.
FpsResult fps_select(std::size_t pool_size, std::size_t k, const std::function<Vector(std::size_t)>& dist_from);

std::vector<std::size_t> fps_select(std::span<const Vec2> points, std::size_t k,
                                    const std::function<double(const Vec2&, const Vec2&)>& dist);

/// Removes points closer than `tolerance` to an earlier kept point.
std::vector<Vec2> deduplicate(std::span<const Vec2> points, double tolerance = 1e-6);

struct GraphBuildResult {
  WaypointGraph graph;
  /// The pool had fewer than n points and every pool point became a node.
  bool undersized = false;
  std::size_t pool_size = 0;
};

/// FPS landmarks from a pool, then the full edge matrix from `model`.
GraphBuildResult build_graph_from_pool(std::span<const Vec2> pool, const DistanceModel& model, std::size_t n,
                                       double cutoff);

/// Samples `pool_size` achieved states uniformly from the buffer and builds the graph.
GraphBuildResult build_graph(const LowBuffer& buffer, const DistanceModel& model, std::size_t n, double cutoff,
                             std::size_t pool_size, Rng& rng);

struct ShortestPaths {
  std::vector<double> dist;
  std::vector<std::ptrdiff_t> pred;  // -1 for the source and unreached vertices
};

/// Dense Dijkstra on a cost matrix (+inf = no edge). Among equal tentative
/// distances the lower vertex index is settled first, and predecessors change
/// only on strict improvement.
ShortestPaths dijkstra(const Matrix& cost, std::size_t source);

struct WaypointPlan {
  std::vector<Vec2> waypoints;
  std::vector<int> budgets;  // budgets[i] is the step budget for reaching waypoints[i + 1]
  std::size_t current_index = 1;
  int steps_on_current_leg = 0;
  bool exhausted = false;
  /// The subgoal was unreachable and the plan ends at the closest reachable node.
  bool secondary = false;
  /// No landmark was reachable; the plan pursues the subgoal directly.
  bool degenerate = false;
  double total_cost = 0.0;

  const Vec2& current_waypoint() const { return waypoints[current_index]; }
  const Vec2& final_waypoint() const { return waypoints.back(); }
  int current_budget() const { return budgets[current_index - 1]; }
};

/// Plans from `current` to `subgoal` over the graph temporarily augmented with
/// both points. Falls back to the reachable node closest to the subgoal, and
/// to direct pursuit with `fallback_budget` steps when nothing is reachable.
WaypointPlan plan(const WaypointGraph& graph, const Vec2& current, const Vec2& subgoal, const DistanceModel& model,
                  int fallback_budget);

/// One tracking step: moves on when the waypoint was achieved or the leg
/// budget is spent. The final waypoint is held once reached.
void advance(WaypointPlan& plan, bool achieved);

std::string graph_to_json(const WaypointGraph& graph);
WaypointGraph graph_from_json(const std::string& text);
void save_graph_file(const WaypointGraph& graph, const std::string& path);
WaypointGraph load_graph_file(const std::string& path);

}  // namespace dhrl
