#include "dhrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dhrl/grid_oracle.hpp"

namespace dhrl {

namespace {

// Parameter interval (lo, hi) of the open slab a < p + t d < b along one axis.
// Returns false when the segment never enters the slab.
bool slab_interval(double p, double d, double a, double b, double& lo, double& hi) {
  if (d == 0.0) {
    if (p > a && p < b) {
      lo = -kInf;
      hi = kInf;
      return true;
    }
    return false;
  }
  double ta = (a - p) / d;
  double tb = (b - p) / d;
  if (ta > tb) std::swap(ta, tb);
  lo = ta;
  hi = tb;
  return true;
}

// A wall that reaches the maze boundary also owns its faces lying on that
// boundary, so no zero-width gap is left between wall and border.
Rect solid(const MazeSpec& spec, const Rect& r) {
  Rect e = r;
  if (e.x0 <= 0.0) e.x0 = -kInf;
  if (e.y0 <= 0.0) e.y0 = -kInf;
  if (e.x1 >= spec.extents.x()) e.x1 = kInf;
  if (e.y1 >= spec.extents.y()) e.y1 = kInf;
  return e;
}

}  // namespace

bool MazeSpec::in_wall(const Vec2& p) const {
  return std::any_of(walls.begin(), walls.end(), [&](const Rect& r) { return solid(*this, r).contains(p); });
}

void MazeSpec::validate() const {
  if (!(extents.x() > 0.0 && extents.y() > 0.0)) throw std::invalid_argument("maze extents must be positive");
  if (!(success_threshold > 0.0)) throw std::invalid_argument("success_threshold must be positive");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (!(action_limit > 0.0)) throw std::invalid_argument("action_limit must be positive");
  for (const Rect& r : walls) {
    if (!(r.x1 > r.x0 && r.y1 > r.y0)) throw std::invalid_argument("wall rectangle is degenerate");
  }
  if (!is_free(start)) throw std::invalid_argument("maze start is not in free space");
  if (!is_free(default_goal)) throw std::invalid_argument("maze default goal is not in free space");
}

EnvState reset(const MazeSpec& spec, const Vec2& goal) {
  if (!goal.allFinite() || !spec.in_extents(goal)) throw InvalidGoal("goal lies outside the maze extents");
  if (spec.in_wall(goal)) throw InvalidGoal("goal lies inside a wall");
  return EnvState{spec.start, 0};
}

Vec2 clip_motion(const MazeSpec& spec, const Vec2& from, const Vec2& delta) {
  double t_stop = 1.0;
  // Which coordinates must be snapped to which face value at the stop point.
  bool snap_x = false, snap_y = false;
  double face_x = 0.0, face_y = 0.0;

  auto consider = [&](double t, int axis, double face) {
    if (t < t_stop) {
      t_stop = t;
      snap_x = snap_y = false;
    }
    if (t == t_stop && std::isfinite(face)) {
      if (axis == 0) {
        snap_x = true;
        face_x = face;
      } else {
        snap_y = true;
        face_y = face;
      }
    }
  };

  for (int axis = 0; axis < 2; ++axis) {
    const double p = from[axis];
    const double d = delta[axis];
    const double hi = spec.extents[axis];
    if (d > 0.0 && p + d > hi) consider((hi - p) / d, axis, hi);
    if (d < 0.0 && p + d < 0.0) consider(-p / d, axis, 0.0);
  }

  for (const Rect& wall : spec.walls) {
    const Rect r = solid(spec, wall);
    double lx, hx, ly, hy;
    if (!slab_interval(from.x(), delta.x(), r.x0, r.x1, lx, hx)) continue;
    if (!slab_interval(from.y(), delta.y(), r.y0, r.y1, ly, hy)) continue;
    const double lo = std::max({lx, ly, 0.0});
    const double hi = std::min({hx, hy, 1.0});
    if (!(lo < hi)) continue;
    // The entering axis is the one whose slab opens last.
    if (lx >= ly) consider(lo, 0, delta.x() > 0.0 ? r.x0 : r.x1);
    if (ly >= lx) consider(lo, 1, delta.y() > 0.0 ? r.y0 : r.y1);
  }

  Vec2 out = from + t_stop * delta;
  if (snap_x) out.x() = face_x;
  if (snap_y) out.y() = face_y;
  return out;
}

StepResult step(const MazeSpec& spec, const EnvState& state, const Vec2& action, const Vec2& goal) {
  if (!action.allFinite()) throw InvalidAction("action has non-finite components");
  const Vec2 clipped = action.cwiseMax(-spec.action_limit).cwiseMin(spec.action_limit);

  StepResult out;
  out.next_state.position = clip_motion(spec, state.position, clipped);
  out.next_state.step_count = state.step_count + 1;
  out.achieved_goal = out.next_state.position;
  out.reward = sparse_reward(out.achieved_goal, goal, spec.success_threshold);
  out.done = out.reward == 0.0 || out.next_state.step_count >= spec.horizon;
  return out;
}

double oracle_distance(const MazeSpec& spec, const Vec2& a, const Vec2& b, double resolution) {
  if ((a - b).norm() == 0.0) return 0.0;
  GridOracle grid(spec, resolution);
  return grid.distance(a, b);
}

MazeSpec small_maze() {
  MazeSpec s;
  s.name = "small";
  s.extents = {12.0, 12.0};
  s.walls = {{0.0, 4.0, 8.0, 8.0}};
  s.start = {2.0, 2.0};
  s.default_goal = {2.0, 10.0};
  s.success_threshold = 2.5;
  s.horizon = 300;
  return s;
}

MazeSpec large_maze() {
  MazeSpec s;
  s.name = "large";
  s.extents = {24.0, 24.0};
  s.walls = {{0.0, 8.0, 16.0, 16.0}};
  s.start = {4.0, 4.0};
  s.default_goal = {4.0, 20.0};
  s.success_threshold = 5.0;
  s.horizon = 600;
  return s;
}

MazeSpec bottleneck_maze() {
  MazeSpec s = large_maze();
  s.name = "bottleneck";
  // The right-hand corridor is closed except for a 1.2-unit gap along the outer wall.
  s.walls.push_back({16.0, 11.0, 22.8, 13.0});
  return s;
}

MazeSpec complex_maze() {
  MazeSpec s;
  s.name = "complex";
  s.extents = {56.0, 56.0};
  s.walls = {
      {0.0, 12.0, 44.0, 16.0},
      {12.0, 26.0, 56.0, 30.0},
      {0.0, 40.0, 44.0, 44.0},
  };
  s.start = {4.0, 4.0};
  s.default_goal = {4.0, 52.0};
  s.success_threshold = 5.0;
  s.horizon = 1500;
  return s;
}

std::vector<std::string> builtin_maze_names() { return {"small", "large", "bottleneck", "complex"}; }

std::optional<MazeSpec> builtin_maze(const std::string& name) {
  if (name == "small") return small_maze();
  if (name == "large") return large_maze();
  if (name == "bottleneck") return bottleneck_maze();
  if (name == "complex") return complex_maze();
  return std::nullopt;
}

MazeSpec resolve_maze(const std::string& name_or_path) {
  if (auto s = builtin_maze(name_or_path)) return *s;
  std::ifstream probe(name_or_path);
  if (!probe) throw std::invalid_argument("unknown maze '" + name_or_path + "'");
  return load_maze_file(name_or_path);
}

std::string maze_to_json(const MazeSpec& spec) {
  nlohmann::ordered_json j;
  j["name"] = spec.name;
  j["extents"] = {spec.extents.x(), spec.extents.y()};
  auto walls = nlohmann::ordered_json::array();
  for (const Rect& r : spec.walls) walls.push_back({r.x0, r.y0, r.x1, r.y1});
  j["walls"] = walls;
  j["start"] = {spec.start.x(), spec.start.y()};
  j["goal"] = {spec.default_goal.x(), spec.default_goal.y()};
  j["success_threshold"] = spec.success_threshold;
  j["horizon"] = spec.horizon;
  j["action_limit"] = spec.action_limit;
  return j.dump(2);
}

MazeSpec maze_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  auto vec = [](const nlohmann::json& v) { return Vec2{v.at(0).get<double>(), v.at(1).get<double>()}; };
  MazeSpec s;
  s.name = j.at("name").get<std::string>();
  s.extents = vec(j.at("extents"));
  for (const auto& w : j.at("walls")) {
    s.walls.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(), w.at(3).get<double>()});
  }
  s.start = vec(j.at("start"));
  s.default_goal = vec(j.at("goal"));
  s.success_threshold = j.at("success_threshold").get<double>();
  s.horizon = j.at("horizon").get<int>();
  s.action_limit = j.value("action_limit", 0.5);
  s.validate();
  return s;
}

MazeSpec load_maze_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open maze file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return maze_from_json(ss.str());
}

void save_maze_file(const MazeSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write maze file " + path);
  out << maze_to_json(spec) << '\n';
}

}  // namespace dhrl
