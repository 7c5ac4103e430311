#include "dhrl/grid_oracle.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace dhrl {

GridOracle::GridOracle(const MazeSpec& spec, double resolution)
    : spec_(spec), resolution_(resolution), steps_per_move_(resolution / spec.action_limit) {
  if (!(resolution > 0.0)) throw std::invalid_argument("grid resolution must be positive");
  cols_ = static_cast<int>(std::floor(spec.extents.x() / resolution + 1e-9)) + 1;
  rows_ = static_cast<int>(std::floor(spec.extents.y() / resolution + 1e-9)) + 1;
  free_.assign(static_cast<std::size_t>(cols_) * rows_, false);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      free_[static_cast<std::size_t>(r) * cols_ + c] = spec_.is_free(position(cell_at(c, r)));
    }
  }

  adjacency_.resize(free_.size());
  static constexpr int kDc[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDr[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const Cell from = cell_at(c, r);
      if (!is_free(from)) continue;
      for (int k = 0; k < 8; ++k) {
        const Cell to = cell_at(c + kDc[k], r + kDr[k]);
        if (!is_free(to)) continue;
        if (segment_free(position(from), position(to))) adjacency_[static_cast<std::size_t>(from)].push_back(to);
      }
    }
  }
}

Vec2 GridOracle::position(Cell c) const {
  const int col = c % cols_;
  const int row = c / cols_;
  return {col * resolution_, row * resolution_};
}

GridOracle::Cell GridOracle::cell_at(int col, int row) const {
  if (col < 0 || row < 0 || col >= cols_ || row >= rows_) return kNoCell;
  return row * cols_ + col;
}

GridOracle::Cell GridOracle::snap(const Vec2& p) const {
  const int c0 = static_cast<int>(std::lround(p.x() / resolution_));
  const int r0 = static_cast<int>(std::lround(p.y() / resolution_));
  if (is_free(cell_at(c0, r0))) return cell_at(c0, r0);
  // Nearest usable node in growing square rings.
  const int max_ring = std::max(cols_, rows_);
  for (int ring = 1; ring <= max_ring; ++ring) {
    Cell best = kNoCell;
    double best_d = kInf;
    for (int dr = -ring; dr <= ring; ++dr) {
      for (int dc = -ring; dc <= ring; ++dc) {
        if (std::max(std::abs(dr), std::abs(dc)) != ring) continue;
        const Cell cand = cell_at(c0 + dc, r0 + dr);
        if (!is_free(cand)) continue;
        const double d = (position(cand) - p).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = cand;
        }
      }
    }
    if (best != kNoCell) return best;
  }
  return kNoCell;
}

std::vector<std::int32_t> GridOracle::bfs(const std::vector<Cell>& sources) const {
  std::vector<std::int32_t> dist(free_.size(), kUnreached);
  std::deque<Cell> queue;
  for (Cell s : sources) {
    if (!is_free(s) || dist[static_cast<std::size_t>(s)] == 0) continue;
    dist[static_cast<std::size_t>(s)] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const std::int32_t next = dist[static_cast<std::size_t>(c)] + 1;
    for (Cell n : adjacency_[static_cast<std::size_t>(c)]) {
      auto& d = dist[static_cast<std::size_t>(n)];
      if (d == kUnreached) {
        d = next;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

double GridOracle::distance(Cell a, Cell b) const {
  if (!is_free(a) || !is_free(b)) return kInf;
  if (a == b) return 0.0;
  const auto d = bfs(a)[static_cast<std::size_t>(b)];
  return d == kUnreached ? kInf : d * steps_per_move_;
}

std::vector<GridOracle::Cell> GridOracle::free_cells() const {
  std::vector<Cell> out;
  for (std::size_t i = 0; i < free_.size(); ++i) {
    if (free_[i]) out.push_back(static_cast<Cell>(i));
  }
  return out;
}

bool GridOracle::segment_free(const Vec2& a, const Vec2& b) const {
  const Vec2 end = clip_motion(spec_, a, b - a);
  return (end - b).norm() <= 1e-9 * (1.0 + b.norm());
}

}  // namespace dhrl
