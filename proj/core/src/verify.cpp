#include "dhrl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dhrl {

namespace {

constexpr std::size_t kFieldCacheLimit = 4096;

double moves_to_steps(std::int32_t moves, double steps_per_move) {
  return moves == GridOracle::kUnreached ? kInf : moves * steps_per_move;
}

// Cells along a shortest path from `from` to the cell whose field is given.
std::vector<GridOracle::Cell> descend(const GridOracle& oracle, GridOracle::Cell from,
                                      const std::vector<std::int32_t>& field) {
  std::vector<GridOracle::Cell> path{from};
  GridOracle::Cell cur = from;
  while (field[static_cast<std::size_t>(cur)] > 0) {
    GridOracle::Cell next = cur;
    for (GridOracle::Cell nb : oracle.neighbours(cur)) {
      const auto d = field[static_cast<std::size_t>(nb)];
      if (d != GridOracle::kUnreached && d < field[static_cast<std::size_t>(next)]) next = nb;
    }
    if (next == cur) break;
    path.push_back(next);
    cur = next;
  }
  return path;
}

struct Leg {
  GridOracle::Cell target;
  std::int64_t budget_moves;
};

}  // namespace

OracleDistanceModel::OracleDistanceModel(std::shared_ptr<const GridOracle> oracle, double gamma)
    : oracle_(std::move(oracle)), gamma_(gamma) {
  if (!oracle_) throw std::invalid_argument("oracle must not be null");
}

const std::vector<std::int32_t>& OracleDistanceModel::field(GridOracle::Cell source) const {
  auto it = cache_.find(source);
  if (it != cache_.end()) return it->second;
  if (cache_.size() >= kFieldCacheLimit) cache_.clear();
  return cache_.emplace(source, oracle_->bfs(source)).first->second;
}

Matrix OracleDistanceModel::distances(std::span<const Vec2> from, std::span<const Vec2> to) const {
  const double spm = oracle_->steps_per_move();
  Matrix out(static_cast<Eigen::Index>(from.size()), static_cast<Eigen::Index>(to.size()));
  std::vector<GridOracle::Cell> from_cells, to_cells;
  for (const Vec2& p : from) from_cells.push_back(oracle_->snap(p));
  for (const Vec2& p : to) to_cells.push_back(oracle_->snap(p));
  // Grid moves are symmetric, so one BFS serves a whole row or column.
  const bool by_target = to.size() <= from.size();
  const auto& outer = by_target ? to_cells : from_cells;
  const auto& inner = by_target ? from_cells : to_cells;
  for (std::size_t a = 0; a < outer.size(); ++a) {
    if (outer[a] == GridOracle::kNoCell) {
      for (std::size_t b = 0; b < inner.size(); ++b) {
        (by_target ? out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a))
                   : out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) = kInf;
      }
      continue;
    }
    const auto& f = field(outer[a]);
    for (std::size_t b = 0; b < inner.size(); ++b) {
      const double d = inner[b] == GridOracle::kNoCell ? kInf : moves_to_steps(f[static_cast<std::size_t>(inner[b])], spm);
      (by_target ? out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a))
                 : out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) = d;
    }
  }
  return out;
}

Matrix OracleDistanceModel::values(std::span<const Vec2> from, std::span<const Vec2> to) const {
  Matrix d = distances(from, to);
  const double floor_value = -1.0 / (1.0 - gamma_);
  return d.unaryExpr([&](double x) { return std::isfinite(x) ? q_from_distance(x, gamma_) : floor_value; });
}

ResolutionReport check_resolution(const WaypointGraph& graph, const MazeSpec& spec, double epsilon, double spacing,
                                  double oracle_resolution) {
  if (!(spacing > 0.0)) throw std::invalid_argument("sampling spacing must be positive");
  ResolutionReport r;
  r.epsilon = epsilon;
  const GridOracle oracle(spec, oracle_resolution);
  std::vector<GridOracle::Cell> sources;
  for (const Vec2& v : graph.nodes) {
    const auto c = oracle.snap(v);
    if (c != GridOracle::kNoCell) sources.push_back(c);
  }
  const auto field = sources.empty() ? std::vector<std::int32_t>(oracle.cell_count(), GridOracle::kUnreached)
                                     : oracle.bfs(sources);
  double worst = 0.0;
  const int nx = static_cast<int>(std::floor(spec.extents.x() / spacing + 1e-9));
  const int ny = static_cast<int>(std::floor(spec.extents.y() / spacing + 1e-9));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      const Vec2 p(i * spacing, j * spacing);
      if (!spec.is_free(p)) continue;
      ++r.samples;
      const auto c = oracle.snap(p);
      const double gap = c == GridOracle::kNoCell ? kInf
                                                  : moves_to_steps(field[static_cast<std::size_t>(c)],
                                                                   oracle.steps_per_move());
      worst = std::max(worst, gap);
    }
  }
  r.worst_gap = graph.empty() ? kInf : worst;
  r.is_resolution_graph = r.worst_gap < epsilon;
  return r;
}

WaypointGraph build_resolution_graph(const OracleDistanceModel& model, double epsilon, double cutoff) {
  const GridOracle& oracle = model.oracle();
  const auto cells = oracle.free_cells();
  if (cells.empty()) throw std::invalid_argument("maze has no free grid cells");
  const double spm = oracle.steps_per_move();
  std::vector<double> gap(cells.size(), kInf);
  std::vector<Vec2> nodes;
  std::size_t pick = 0;
  for (;;) {
    nodes.push_back(oracle.position(cells[pick]));
    const auto& f = model.field(cells[pick]);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      gap[j] = std::min(gap[j], moves_to_steps(f[static_cast<std::size_t>(cells[j])], spm));
    }
    pick = static_cast<std::size_t>(std::max_element(gap.begin(), gap.end()) - gap.begin());
    if (gap[pick] < epsilon) break;
  }
  return WaypointGraph::from_distances(nodes, model.distances(nodes, nodes), cutoff);
}

ErrorRateReport measure_error_rate(const MazeSpec& spec, const WaypointGraph& graph, double c_l, std::size_t trials,
                                   Rng& rng, const OracleDistanceModel& oracle_model, const DistanceModel& planner,
                                   WaypointChain chain, double epsilon) {
  (void)spec;
  const GridOracle& oracle = oracle_model.oracle();
  const double spm = oracle.steps_per_move();
  const auto cells = oracle.free_cells();
  std::vector<GridOracle::Cell> node_cells;
  for (const Vec2& v : graph.nodes) node_cells.push_back(oracle.snap(v));
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);

  ErrorRateReport report;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const GridOracle::Cell s = cells[pick(rng)];
    const GridOracle::Cell g = cells[pick(rng)];
    const auto& to_goal = oracle_model.field(g);
    const std::int32_t total_moves = to_goal[static_cast<std::size_t>(s)];
    if (total_moves == GridOracle::kUnreached) {
      ++report.skipped_disconnected;
      continue;
    }
    if (total_moves == 0) {
      ++report.skipped_degenerate;
      continue;
    }

    std::vector<Leg> legs;
    if (chain == WaypointChain::Dijkstra) {
      const WaypointPlan p = plan(graph, oracle.position(s), oracle.position(g), planner, 1);
      if (p.degenerate || p.secondary) {
        ++report.skipped_disconnected;
        continue;
      }
      for (std::size_t i = 1; i < p.waypoints.size(); ++i) {
        const auto moves = static_cast<std::int64_t>(std::ceil(p.budgets[i - 1] / spm - 1e-9));
        legs.push_back({oracle.snap(p.waypoints[i]), std::max<std::int64_t>(1, moves)});
      }
    } else {
      // Landmark nearest to the point c_l - eps steps along a shortest path
      // from the previous waypoint, until the goal is within the cutoff.
      const auto advance_moves = static_cast<std::size_t>(std::floor((c_l - epsilon) / spm));
      GridOracle::Cell cur = s;
      bool ok = true;
      for (std::size_t guard = 0; moves_to_steps(to_goal[static_cast<std::size_t>(cur)], spm) >= c_l; ++guard) {
        const auto path = descend(oracle, cur, to_goal);
        const GridOracle::Cell p = path[std::min(advance_moves, path.size() - 1)];
        const auto& near_p = oracle_model.field(p);
        GridOracle::Cell best = GridOracle::kNoCell;
        for (GridOracle::Cell v : node_cells) {
          if (best == GridOracle::kNoCell ||
              near_p[static_cast<std::size_t>(v)] < near_p[static_cast<std::size_t>(best)]) {
            best = v;
          }
        }
        if (best == GridOracle::kNoCell || guard > cells.size()) {
          ok = false;
          break;
        }
        const double leg = moves_to_steps(oracle_model.field(best)[static_cast<std::size_t>(cur)], spm);
        legs.push_back({best, static_cast<std::int64_t>(std::ceil(std::max(1.0, std::ceil(leg)) / spm - 1e-9))});
        cur = best;
      }
      if (!ok) {
        ++report.skipped_disconnected;
        continue;
      }
      const double last = moves_to_steps(to_goal[static_cast<std::size_t>(cur)], spm);
      legs.push_back({g, static_cast<std::int64_t>(std::ceil(std::max(1.0, std::ceil(last)) / spm - 1e-9))});
    }

    // Greedy oracle policy: one move per iteration toward the current waypoint.
    GridOracle::Cell pos = s;
    std::size_t leg = 0;
    std::int64_t on_leg = 0;
    const std::size_t last_leg = legs.size() - 1;
    for (std::int32_t m = 0; m < total_moves; ++m) {
      const auto& f = oracle_model.field(legs[leg].target);
      GridOracle::Cell next = pos;
      for (GridOracle::Cell nb : oracle.neighbours(pos)) {
        const auto d = f[static_cast<std::size_t>(nb)];
        if (d != GridOracle::kUnreached && d < f[static_cast<std::size_t>(next)]) next = nb;
      }
      pos = next;
      ++on_leg;
      if (leg < last_leg && (pos == legs[leg].target || on_leg >= legs[leg].budget_moves)) {
        ++leg;
        on_leg = 0;
      }
    }

    ErrorRateSample sample;
    sample.start = oracle.position(s);
    sample.goal = oracle.position(g);
    sample.traversed_endpoint = oracle.position(pos);
    sample.total_steps = total_moves * spm;
    sample.rho = moves_to_steps(to_goal[static_cast<std::size_t>(pos)], spm) / sample.total_steps;
    sample.waypoints = legs.size();
    report.max_rho = std::max(report.max_rho, sample.rho);
    report.samples.push_back(sample);
  }
  return report;
}

Matrix corridor_q_iteration(int n_states, double gamma, double tolerance, int max_iterations) {
  if (n_states < 1) throw std::invalid_argument("corridor needs at least one state");
  const Eigen::Index n = n_states;
  Matrix v = Matrix::Zero(n, n);
  for (int it = 0; it < max_iterations; ++it) {
    Matrix next = Matrix::Zero(n, n);
    for (Eigen::Index g = 0; g < n; ++g) {
      for (Eigen::Index s = 0; s < n; ++s) {
        if (s == g) continue;
        double best = -kInf;
        for (int a = -1; a <= 1; ++a) {
          const Eigen::Index s2 = std::clamp<Eigen::Index>(s + a, 0, n - 1);
          best = std::max(best, -1.0 + gamma * v(s2, g));
        }
        next(s, g) = best;
      }
    }
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (delta < tolerance) break;
  }
  return v;
}

}  // namespace dhrl
