#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dhrl/env.hpp"
#include "dhrl/graph.hpp"
#include "dhrl/high_agent.hpp"
#include "dhrl/low_agent.hpp"
#include "dhrl/replay.hpp"

namespace dhrl {

/// Every knob of a training run. Penalties and thresholds left unset are
/// derived from c_h and c_l (p1 = -c_h, p2 = -2 c_h, zeta1 = zeta2 = c_l).
struct TrainConfig {
  std::string env = "small";
  std::uint64_t seed = 0;
  std::int64_t total_steps = 300000;
  int c_h = 50;
  double c_l = 30.0;
  std::size_t n_landmarks = 300;
  std::size_t pool_size = 5000;
  std::int64_t tau_randomwalk = 5000;
  int episodes_without_graph = 75;
  int graph_update_freq = 10;
  int high_train_freq = 10;

  /// Desk-scale default; the reference architecture is {256, 256, 256}.
  std::vector<int> hidden{64, 64};
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double tau = 0.005;
  double gamma = 0.99;
  int target_update_freq = 1;
  int actor_update_freq = 2;
  std::size_t batch_size = 128;
  std::size_t low_capacity = 1000000;
  std::size_t high_capacity = 100000;
  double low_explore_noise = 0.1;
  double high_explore_noise = 0.1;

  std::optional<double> p1;
  std::optional<double> p2;
  std::optional<double> zeta1;
  std::optional<double> zeta2;
  double fgs_noise = 1.0;
  bool use_fgs = false;
  bool use_gradual_penalty = true;
  bool gradual_penalty_literal = false;
  double gradual_penalty_transition = 0.2;

  /// With false the run never plans: subgoals are pursued directly for c_h
  /// steps (coupled vanilla HRL).
  bool use_graph = true;
  bool separate_graph_q = true;
  /// Training episode goals: "uniform" over free space or "fixed" (default goal).
  std::string train_goals = "uniform";

  std::int64_t eval_every = 10000;
  int eval_episodes = 20;
  /// When set, training ends after the first evaluation at or above this rate.
  std::optional<double> stop_at_success;

  /// Throws std::invalid_argument on violated invariants.
  void validate() const;

  double p1_value() const { return p1.value_or(-static_cast<double>(c_h)); }
  double p2_value() const { return p2.value_or(-2.0 * c_h); }
  double zeta1_value() const { return zeta1.value_or(c_l); }
  double zeta2_value() const { return zeta2.value_or(c_l); }
};

std::string config_to_json(const TrainConfig& config);
/// Fields missing from the JSON keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const std::string& text, TrainConfig base = {});
TrainConfig load_config_file(const std::string& path, TrainConfig base = {});

struct EvalRecord {
  std::int64_t step = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  std::size_t graph_size = 0;
  double mean_edge_cost = 0.0;
  double wall_clock_s = 0.0;
};

struct PhaseMarker {
  std::string name;
  std::int64_t step = 0;
  std::int64_t episode = 0;
};

struct RunMetrics {
  std::vector<EvalRecord> records;
  std::vector<PhaseMarker> markers;

  double final_success() const { return records.empty() ? 0.0 : records.back().success_rate; }
  double best_success() const;
};

inline constexpr const char* kMetricsCsvHeader = "step,success_rate,mean_return,graph_size,mean_edge_cost";

/// Deterministic metrics CSV (no timing columns).
void write_metrics_csv(const RunMetrics& metrics, std::ostream& out);
/// Wall-clock per evaluation, kept apart so the metrics file stays reproducible.
void write_timing_csv(const RunMetrics& metrics, std::ostream& out);
void write_markers_csv(const RunMetrics& metrics, std::ostream& out);

struct EvalResult {
  double success_rate = 0.0;
  double mean_return = 0.0;
};

/// Noise-free rollouts from the maze start to `goal` (the default goal when
/// unset). A goal already inside the success radius at reset counts as an
/// immediate success. Plans over `graph` when given, else pursues subgoals directly.
EvalResult evaluate(const LowAgent& low, const HighAgent& high, const WaypointGraph* graph, const MazeSpec& spec,
                    int episodes, std::optional<Vec2> goal = std::nullopt);

struct TrainerCounters {
  std::int64_t plans = 0;
  /// Step at which plan() was first invoked, -1 if never.
  std::int64_t first_plan_step = -1;
  std::int64_t secondary_plans = 0;
  std::int64_t degenerate_plans = 0;
  std::int64_t graph_builds = 0;
  std::int64_t undersized_builds = 0;
  std::int64_t truncated_windows = 0;
  std::int64_t low_updates = 0;
  std::int64_t high_updates = 0;
  std::int64_t episodes = 0;
};

/// Wall-clock seconds spent per activity; informational only.
struct TrainerTimings {
  double graph_builds = 0.0;
  double planning = 0.0;
  double training = 0.0;
  double evaluation = 0.0;
};

/// Runs the full hierarchy on one maze: random warm-up, vanilla HRL without
/// a graph, then graph-planned DHRL with periodic graph rebuilds.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  RunMetrics run();

  const TrainConfig& config() const { return config_; }
  const MazeSpec& spec() const { return spec_; }
  const LowAgent& low() const { return low_; }
  const HighAgent& high() const { return high_; }
  const std::optional<WaypointGraph>& graph() const { return graph_; }
  const LowBuffer& low_buffer() const { return low_buffer_; }
  const HighBuffer& high_buffer() const { return high_buffer_; }
  const TrainerCounters& counters() const { return counters_; }
  const TrainerTimings& timings() const { return timings_; }
  std::int64_t steps() const { return step_; }

  void save_checkpoint(const std::string& path) const;

 private:
  enum class Phase { RandomWalk, Vanilla, Graph };

  void run_episode(RunMetrics& metrics);
  void maybe_evaluate(RunMetrics& metrics);
  void rebuild_graph();
  Vec2 sample_training_goal();

  TrainConfig config_;
  MazeSpec spec_;
  Rng rng_;
  LowAgent low_;
  HighAgent high_;
  LowBuffer low_buffer_;
  HighBuffer high_buffer_;
  std::optional<WaypointGraph> graph_;
  TrainerCounters counters_;
  TrainerTimings timings_;
  std::int64_t step_ = 0;
  std::int64_t graph_init_step_ = -1;
  std::int64_t episodes_since_build_ = 0;
  bool stopped_ = false;
  double wall_start_ = 0.0;
};

RunMetrics run(const TrainConfig& config);

/// Contents of a checkpoint file written by Trainer::save_checkpoint.
struct Checkpoint {
  TrainConfig config;
  MazeSpec spec;
  LowAgent low;
  HighAgent high;
  std::optional<WaypointGraph> graph;
  std::int64_t step = 0;
  std::string rng_state;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace dhrl
