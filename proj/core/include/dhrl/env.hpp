#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dhrl {

using Vec2 = Eigen::Vector2d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised for goals or states that are outside the extents or inside a wall.
class InvalidGoal : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidAction : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Axis-aligned wall. A point is blocked only if it is strictly inside;
/// faces and corners are free space.
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  bool contains(const Vec2& p) const {
    return p.x() > x0 && p.x() < x1 && p.y() > y0 && p.y() < y1;
  }
};

struct MazeSpec {
  std::string name;
  std::vector<Rect> walls;
  Vec2 extents{0.0, 0.0};
  Vec2 start{0.0, 0.0};
  Vec2 default_goal{0.0, 0.0};
  double success_threshold = 1.0;
  int horizon = 1;
  double action_limit = 0.5;

  bool in_extents(const Vec2& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= extents.x() && p.y() <= extents.y();
  }
  /// Wall interiors are blocked; faces are free unless they lie on the maze boundary.
  bool in_wall(const Vec2& p) const;
  bool is_free(const Vec2& p) const { return in_extents(p) && !in_wall(p); }

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

struct EnvState {
  Vec2 position{0.0, 0.0};
  int step_count = 0;
};

struct StepResult {
  EnvState next_state;
  double reward = -1.0;
  bool done = false;
  Vec2 achieved_goal{0.0, 0.0};

  bool success() const { return reward == 0.0; }
};

/// Sparse goal-conditioned reward: 0 inside the success ball, -1 elsewhere.
inline double sparse_reward(const Vec2& achieved, const Vec2& goal, double threshold) {
  return (achieved - goal).norm() <= threshold ? 0.0 : -1.0;
}

EnvState reset(const MazeSpec& spec, const Vec2& goal);

/// Moves the point by the clipped action. The motion stops at the first
/// wall face or extent boundary it would cross.
StepResult step(const MazeSpec& spec, const EnvState& state, const Vec2& action, const Vec2& goal);

/// Endpoint of the straight move from `from` by `delta`, stopped at the first
/// contact with a wall or the extent boundary.
Vec2 clip_motion(const MazeSpec& spec, const Vec2& from, const Vec2& delta);

/// Shortest path length in environment steps between two free points, measured
/// by BFS on an 8-connected grid of the given resolution. Infinite if disconnected.
double oracle_distance(const MazeSpec& spec, const Vec2& a, const Vec2& b, double resolution);

// Built-in mazes.
MazeSpec small_maze();
MazeSpec large_maze();
MazeSpec bottleneck_maze();
MazeSpec complex_maze();

std::vector<std::string> builtin_maze_names();
std::optional<MazeSpec> builtin_maze(const std::string& name);

/// Loads a built-in maze by name or, failing that, a JSON maze file at `name_or_path`.
MazeSpec resolve_maze(const std::string& name_or_path);

MazeSpec load_maze_file(const std::string& path);
void save_maze_file(const MazeSpec& spec, const std::string& path);
std::string maze_to_json(const MazeSpec& spec);
MazeSpec maze_from_json(const std::string& text);

}  // namespace dhrl
