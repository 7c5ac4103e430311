#include "dhrl/replay.hpp"

namespace dhrl {

std::vector<LowTransition> her_relabel_low(std::span<const LowTransition> episode, double fraction,
                                           double threshold, Rng& rng) {
  std::vector<LowTransition> out(episode.begin(), episode.end());
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const int last = static_cast<int>(episode.size()) - 1;
  for (int i = 0; i <= last; ++i) {
    if (!(coin(rng) < fraction)) continue;
    std::uniform_int_distribution<int> offset(0, last - i);
    const int future = i + offset(rng);
    auto& tr = out[static_cast<std::size_t>(i)];
    tr.waypoint_goal = episode[static_cast<std::size_t>(future)].achieved_goal;
    tr.reward = sparse_reward(tr.achieved_goal, tr.waypoint_goal, threshold);
  }
  return out;
}

}  // namespace dhrl
