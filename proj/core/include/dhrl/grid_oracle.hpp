#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dhrl/env.hpp"

namespace dhrl {

/// Exact shortest-path oracle on an 8-connected grid laid over a maze.
///
/// Grid nodes sit at (i * resolution, j * resolution). A node is usable when it
/// is not strictly inside a wall; a move between neighbours is allowed when the
/// straight segment between them does not enter any wall interior. Each move is
/// worth `resolution / action_limit` environment steps, so at resolution equal
/// to the action limit one move is exactly one maximal env step.
class GridOracle {
 public:
  using Cell = std::int32_t;
  static constexpr Cell kNoCell = -1;
  static constexpr std::int32_t kUnreached = -1;

  GridOracle(const MazeSpec& spec, double resolution);

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  double resolution() const { return resolution_; }
  double steps_per_move() const { return steps_per_move_; }
  std::size_t cell_count() const { return free_.size(); }

  bool is_free(Cell c) const { return c >= 0 && free_[static_cast<std::size_t>(c)]; }
  Vec2 position(Cell c) const;
  Cell cell_at(int col, int row) const;

  /// Nearest usable node to a world point, or kNoCell if none is usable.
  Cell snap(const Vec2& p) const;

  /// Free neighbours reachable in one move, in a fixed order.
  const std::vector<Cell>& neighbours(Cell c) const { return adjacency_[static_cast<std::size_t>(c)]; }

  /// Move counts from the given sources to every cell (kUnreached if disconnected).
  std::vector<std::int32_t> bfs(const std::vector<Cell>& sources) const;
  std::vector<std::int32_t> bfs(Cell source) const { return bfs(std::vector<Cell>{source}); }

  /// Distance in env steps between two cells; kInf when disconnected.
  double distance(Cell a, Cell b) const;
  double distance(const Vec2& a, const Vec2& b) const { return distance(snap(a), snap(b)); }

  std::vector<Cell> free_cells() const;

 private:
  bool segment_free(const Vec2& a, const Vec2& b) const;

  MazeSpec spec_;
  double resolution_;
  double steps_per_move_;
  int cols_ = 0;
  int rows_ = 0;
  std::vector<bool> free_;
  std::vector<std::vector<Cell>> adjacency_;
};

}  // namespace dhrl
