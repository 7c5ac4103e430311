#include "dhrl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dhrl {

bool WaypointGraph::has_edge(std::size_t i, std::size_t j) const {
  return std::isfinite(cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
}

std::size_t WaypointGraph::edge_count() const {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < cost.size(); ++i) n += std::isfinite(cost.data()[i]) ? 1 : 0;
  return n;
}

double WaypointGraph::mean_edge_cost() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < cost.size(); ++i) {
    if (std::isfinite(cost.data()[i])) {
      sum += cost.data()[i];
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

WaypointGraph WaypointGraph::from_distances(std::vector<Vec2> nodes, const Matrix& full, double cutoff) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  if (full.rows() != n || full.cols() != n) throw std::invalid_argument("distance matrix does not match node count");
  WaypointGraph g;
  g.nodes = std::move(nodes);
  g.cutoff = cutoff;
  g.cost = Matrix::Constant(n, n, kInf);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = full(i, j);
      if (i != j && d < cutoff) g.cost(i, j) = std::max(d, 0.0);
    }
  }
  return g;
}

FpsResult fps_select(std::size_t pool_size, std::size_t k, const std::function<Vector(std::size_t)>& dist_from) {
  if (pool_size == 0) throw std::invalid_argument("fps_select needs a non-empty pool");
  if (k > pool_size) throw std::invalid_argument("fps_select cannot pick more points than the pool holds");
  FpsResult out;
  std::vector<double> min_dist(pool_size, kInf);
  std::vector<bool> taken(pool_size, false);
  for (std::size_t round = 0; round < k; ++round) {
    std::size_t best = pool_size;
    for (std::size_t j = 0; j < pool_size; ++j) {
      if (taken[j]) continue;
      if (best == pool_size || min_dist[j] > min_dist[best]) best = j;
    }
    out.selected.push_back(best);
    out.pick_radius.push_back(min_dist[best]);
    taken[best] = true;
    const Vector d = dist_from(best);
    for (std::size_t j = 0; j < pool_size; ++j) min_dist[j] = std::min(min_dist[j], d[static_cast<Eigen::Index>(j)]);
  }
  out.covering_radius = k == 0 ? kInf : *std::max_element(min_dist.begin(), min_dist.end());
  return out;
}

std::vector<std::size_t> fps_select(std::span<const Vec2> points, std::size_t k,
                                    const std::function<double(const Vec2&, const Vec2&)>& dist) {
  return fps_select(points.size(), k, [&](std::size_t i) {
           Vector d(static_cast<Eigen::Index>(points.size()));
           for (std::size_t j = 0; j < points.size(); ++j) d[static_cast<Eigen::Index>(j)] = dist(points[i], points[j]);
           return d;
         })
      .selected;
}

std::vector<Vec2> deduplicate(std::span<const Vec2> points, double tolerance) {
  std::vector<Vec2> out;
  for (const Vec2& p : points) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const Vec2& q) { return (p - q).norm() < tolerance; });
    if (!dup) out.push_back(p);
  }
  return out;
}

GraphBuildResult build_graph_from_pool(std::span<const Vec2> pool, const DistanceModel& model, std::size_t n,
                                       double cutoff) {
  if (pool.empty()) throw std::invalid_argument("cannot build a graph from an empty pool");
  GraphBuildResult out;
  out.pool_size = pool.size();
  std::vector<Vec2> nodes;
  if (pool.size() <= n) {
    out.undersized = pool.size() < n;
    nodes.assign(pool.begin(), pool.end());
  } else {
    const auto fps = fps_select(pool.size(), n, [&](std::size_t i) -> Vector {
      return model.distances(pool.subspan(i, 1), pool).row(0).transpose();
    });
    for (std::size_t idx : fps.selected) nodes.push_back(pool[idx]);
  }
  const Matrix full = model.distances(nodes, nodes);
  out.graph = WaypointGraph::from_distances(std::move(nodes), full, cutoff);
  return out;
}

GraphBuildResult build_graph(const LowBuffer& buffer, const DistanceModel& model, std::size_t n, double cutoff,
                             std::size_t pool_size, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("cannot build a graph from an empty buffer");
  std::vector<Vec2> pool;
  if (buffer.size() <= pool_size) {
    for (auto s = buffer.oldest(); s < buffer.total_added(); ++s) pool.push_back(buffer.at(s).achieved_goal);
  } else {
    for (auto s : buffer.sample(pool_size, rng)) pool.push_back(buffer.at(s).achieved_goal);
  }
  pool = deduplicate(pool);
  return build_graph_from_pool(pool, model, n, cutoff);
}

ShortestPaths dijkstra(const Matrix& cost, std::size_t source) {
  const auto n = static_cast<std::size_t>(cost.rows());
  ShortestPaths sp;
  sp.dist.assign(n, kInf);
  sp.pred.assign(n, -1);
  std::vector<bool> done(n, false);
  sp.dist[source] = 0.0;
  for (std::size_t round = 0; round < n; ++round) {
    std::size_t u = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (!done[v] && std::isfinite(sp.dist[v]) && (u == n || sp.dist[v] < sp.dist[u])) u = v;
    }
    if (u == n) break;
    done[u] = true;
    for (std::size_t v = 0; v < n; ++v) {
      const double c = cost(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
      if (done[v] || !std::isfinite(c)) continue;
      if (sp.dist[u] + c < sp.dist[v]) {
        sp.dist[v] = sp.dist[u] + c;
        sp.pred[v] = static_cast<std::ptrdiff_t>(u);
      }
    }
  }
  return sp;
}

namespace {

int leg_budget(double cost) { return std::max(1, static_cast<int>(std::ceil(cost))); }

}  // namespace

WaypointPlan plan(const WaypointGraph& graph, const Vec2& current, const Vec2& subgoal, const DistanceModel& model,
                  int fallback_budget) {
  const std::size_t n = graph.size();
  const std::size_t src = n;
  const std::size_t dst = n + 1;

  // Only edges out of the current point and into the subgoal can lie on a
  // path from one to the other, so the reverse directions are not evaluated.
  std::vector<Vec2> sources(graph.nodes);
  sources.push_back(current);
  const Matrix to_sub = model.distances(sources, std::span<const Vec2>(&subgoal, 1));
  const Matrix from_cur = model.distances(std::span<const Vec2>(&current, 1), graph.nodes);

  Matrix cost = Matrix::Constant(static_cast<Eigen::Index>(n + 2), static_cast<Eigen::Index>(n + 2), kInf);
  if (n > 0) cost.topLeftCorner(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = graph.cost;
  auto keep = [&](double d) { return d < graph.cutoff ? std::max(d, 0.0) : kInf; };
  for (std::size_t j = 0; j < n; ++j) {
    cost(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(j)) = keep(from_cur(0, static_cast<Eigen::Index>(j)));
    cost(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(dst)) = keep(to_sub(static_cast<Eigen::Index>(j), 0));
  }
  cost(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(dst)) = keep(to_sub(static_cast<Eigen::Index>(n), 0));

  const ShortestPaths sp = dijkstra(cost, src);
  WaypointPlan out;
  std::size_t target = dst;
  if (!std::isfinite(sp.dist[dst])) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(sp.dist[j])) continue;
      if (best == n || to_sub(static_cast<Eigen::Index>(j), 0) < to_sub(static_cast<Eigen::Index>(best), 0)) best = j;
    }
    if (best == n) {
      out.waypoints = {current, subgoal};
      out.budgets = {std::max(1, fallback_budget)};
      out.degenerate = true;
      out.total_cost = kInf;
      return out;
    }
    target = best;
    out.secondary = true;
  }

  std::vector<std::size_t> path;
  for (auto v = static_cast<std::ptrdiff_t>(target); v >= 0; v = sp.pred[static_cast<std::size_t>(v)]) {
    path.push_back(static_cast<std::size_t>(v));
  }
  std::reverse(path.begin(), path.end());
  for (std::size_t v : path) out.waypoints.push_back(v == src ? current : v == dst ? subgoal : graph.nodes[v]);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    out.budgets.push_back(leg_budget(cost(static_cast<Eigen::Index>(path[i]), static_cast<Eigen::Index>(path[i + 1]))));
  }
  out.total_cost = sp.dist[target];
  return out;
}

void advance(WaypointPlan& plan, bool achieved) {
  if (plan.exhausted) return;
  ++plan.steps_on_current_leg;
  if (!achieved && plan.steps_on_current_leg < plan.current_budget()) return;
  if (plan.current_index + 1 >= plan.waypoints.size()) {
    plan.exhausted = true;
    return;
  }
  ++plan.current_index;
  plan.steps_on_current_leg = 0;
}

std::string graph_to_json(const WaypointGraph& graph) {
  nlohmann::ordered_json j;
  j["format"] = "dhrl-graph";
  j["version"] = 1;
  j["cutoff"] = graph.cutoff;
  auto nodes = nlohmann::ordered_json::array();
  for (const Vec2& v : graph.nodes) nodes.push_back({v.x(), v.y()});
  j["nodes"] = nodes;
  auto edges = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < graph.size(); ++a) {
    for (std::size_t b = 0; b < graph.size(); ++b) {
      if (graph.has_edge(a, b)) edges.push_back({a, b, graph.cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))});
    }
  }
  j["edges"] = edges;
  return j.dump(1);
}

WaypointGraph graph_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", std::string{}) != "dhrl-graph") throw std::invalid_argument("not a dhrl graph snapshot");
  WaypointGraph g;
  g.cutoff = j.at("cutoff").get<double>();
  for (const auto& v : j.at("nodes")) g.nodes.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  g.cost = Matrix::Constant(n, n, kInf);
  for (const auto& e : j.at("edges")) {
    const auto a = e.at(0).get<Eigen::Index>();
    const auto b = e.at(1).get<Eigen::Index>();
    if (a < 0 || b < 0 || a >= n || b >= n) throw std::invalid_argument("graph edge refers to a missing node");
    g.cost(a, b) = e.at(2).get<double>();
  }
  return g;
}

void save_graph_file(const WaypointGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file " + path);
  out << graph_to_json(graph) << '\n';
}

WaypointGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return graph_from_json(ss.str());
}

}  // namespace dhrl
