#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "dhrl/env.hpp"
#include "dhrl/mlp.hpp"

namespace dhrl {

struct LowTransition {
  Vec2 state{0.0, 0.0};
  Vec2 waypoint_goal{0.0, 0.0};
  Vec2 action{0.0, 0.0};
  double reward = -1.0;
  Vec2 next_state{0.0, 0.0};
  Vec2 achieved_goal{0.0, 0.0};
  std::int64_t episode_id = 0;
  int t = 0;
};

struct HighTransition {
  Vec2 state{0.0, 0.0};
  Vec2 env_goal{0.0, 0.0};
  Vec2 subgoal{0.0, 0.0};
  /// Sum of the per-step environment rewards (w.r.t. env_goal) over the window.
  double reward = 0.0;
  Vec2 next_state{0.0, 0.0};
  Vec2 achieved_goal{0.0, 0.0};
  /// Env steps actually covered; below c_h only when the episode ended first.
  int elapsed = 0;
  bool goal_reached = false;
  std::int64_t episode_id = 0;
  int t = 0;
};

/// Fixed-capacity ring of transitions with an index of episode extents.
///
/// Every item gets a global sequence number. Items of one episode must be
/// added contiguously; because eviction is oldest-first, the later part of
/// any stored item's episode is always still stored, which is all hindsight
/// relabeling needs.
template <typename T>
class ReplayBuffer {
 public:
  using Seq = std::uint64_t;

  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  }

  void add(const T& item) {
    if (items_.size() < capacity_) {
      items_.push_back(item);
    } else {
      items_[static_cast<std::size_t>(total_ % capacity_)] = item;
    }
    if (!episodes_.empty() && episodes_.back().episode_id == item.episode_id &&
        episodes_.back().first + episodes_.back().count == total_) {
      ++episodes_.back().count;
    } else {
      episodes_.push_back({item.episode_id, total_, 1});
    }
    ++total_;
    while (!episodes_.empty() && episodes_.front().first + episodes_.front().count <= oldest()) {
      episodes_.pop_front();
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  Seq total_added() const { return total_; }
  Seq oldest() const { return total_ - items_.size(); }

  const T& at(Seq seq) const {
    if (seq < oldest() || seq >= total_) throw std::out_of_range("replay sequence number not stored");
    return items_[static_cast<std::size_t>(seq % capacity_)];
  }

  Seq sample_one(Rng& rng) const {
    if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
    std::uniform_int_distribution<Seq> pick(oldest(), total_ - 1);
    return pick(rng);
  }

  std::vector<Seq> sample(std::size_t n, Rng& rng) const {
    std::vector<Seq> out(n);
    for (auto& s : out) s = sample_one(rng);
    return out;
  }

  /// Sequence number of the latest stored item in the same episode as `seq`.
  Seq episode_last(Seq seq) const {
    auto it = std::upper_bound(episodes_.begin(), episodes_.end(), seq,
                               [](Seq s, const Span& e) { return s < e.first; });
    if (it == episodes_.begin()) throw std::out_of_range("replay sequence number not stored");
    --it;
    return it->first + it->count - 1;
  }

  /// All stored items, oldest first.
  std::vector<T> snapshot() const {
    std::vector<T> out;
    out.reserve(items_.size());
    for (Seq s = oldest(); s < total_; ++s) out.push_back(at(s));
    return out;
  }

 private:
  struct Span {
    std::int64_t episode_id;
    Seq first;
    Seq count;
  };

  std::size_t capacity_;
  std::vector<T> items_;
  std::deque<Span> episodes_;
  Seq total_ = 0;
};

using LowBuffer = ReplayBuffer<LowTransition>;
using HighBuffer = ReplayBuffer<HighTransition>;

/// Future-goal hindsight relabeling of one episode.
///
/// Each transition is independently relabeled with probability `fraction`:
/// its goal becomes the achieved goal `t_ftr` steps later, t_ftr drawn
/// uniformly from {0, ..., steps remaining in the episode}, and its reward is
/// recomputed with the sparse rule. Per transition the rng is consumed as one
/// uniform real in [0, 1), then (if relabeled) one uniform integer.
std::vector<LowTransition> her_relabel_low(std::span<const LowTransition> episode, double fraction,
                                           double threshold, Rng& rng);

}  // namespace dhrl
