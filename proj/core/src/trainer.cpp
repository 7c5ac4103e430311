#include "dhrl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "dhrl/serialize.hpp"

namespace dhrl {

namespace {

constexpr char kCheckpointMagic[] = "DHRLCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

Td3Config td3_config(const TrainConfig& c) {
  Td3Config t;
  t.hidden = c.hidden;
  t.actor_lr = c.actor_lr;
  t.critic_lr = c.critic_lr;
  t.gamma = c.gamma;
  t.tau = c.tau;
  t.target_update_freq = c.target_update_freq;
  t.actor_update_freq = c.actor_update_freq;
  return t;
}

LowAgentConfig low_config(const TrainConfig& c, const MazeSpec& spec) {
  LowAgentConfig l;
  l.td3 = td3_config(c);
  l.gamma = c.gamma;
  l.action_limit = spec.action_limit;
  l.explore_noise = c.low_explore_noise;
  l.success_threshold = spec.success_threshold;
  l.separate_graph_q = c.separate_graph_q;
  return l;
}

HighAgentConfig high_config(const TrainConfig& c, const MazeSpec& spec) {
  HighAgentConfig h;
  h.td3 = td3_config(c);
  h.gamma = c.gamma;
  h.c_h = c.c_h;
  h.c_l = c.c_l;
  h.p1 = c.p1_value();
  h.p2 = c.p2_value();
  h.zeta1 = c.zeta1_value();
  h.zeta2 = c.zeta2_value();
  h.explore_noise = c.high_explore_noise;
  h.gradual_penalty_literal = c.gradual_penalty_literal;
  h.success_threshold = spec.success_threshold;
  return h;
}

Vec2 uniform_point(const MazeSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> ux(0.0, spec.extents.x());
  std::uniform_real_distribution<double> uy(0.0, spec.extents.y());
  return {ux(rng), uy(rng)};
}

Vec2 uniform_free_point(const MazeSpec& spec, Rng& rng) {
  for (;;) {
    const Vec2 p = uniform_point(spec, rng);
    if (!spec.in_wall(p)) return p;
  }
}

// Plans when a graph is available, otherwise pursues the subgoal directly.
WaypointPlan start_leg(const WaypointGraph* graph, const Vec2& state, const Vec2& subgoal, const DistanceModel& low,
                       int c_h) {
  if (graph != nullptr) return plan(*graph, state, subgoal, low, c_h);
  WaypointPlan direct;
  direct.waypoints = {state, subgoal};
  direct.budgets = {c_h};
  return direct;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  if (!builtin_maze(env)) {
    std::ifstream probe(env);
    require(static_cast<bool>(probe), "unknown environment name");
  }
  require(total_steps > tau_randomwalk, "total_steps must exceed tau_randomwalk");
  require(tau_randomwalk >= 0, "tau_randomwalk must be non-negative");
  require(c_h >= 1, "c_h must be at least 1");
  require(c_l > 0.0, "c_l must be positive");
  require(n_landmarks >= 1, "n_landmarks must be at least 1");
  require(pool_size >= 1, "pool_size must be at least 1");
  require(episodes_without_graph >= 0, "episodes_without_graph must be non-negative");
  require(graph_update_freq >= 1 && high_train_freq >= 1 && target_update_freq >= 1 && actor_update_freq >= 1,
          "all frequencies must be at least 1");
  require(eval_every >= 1 && eval_episodes >= 1, "evaluation frequency and episode count must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(low_capacity >= 1 && high_capacity >= 1, "buffer capacities must be positive");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(tau >= 0.0 && tau <= 1.0, "tau must lie in [0, 1]");
  require(actor_lr > 0.0 && critic_lr > 0.0, "learning rates must be positive");
  require(!hidden.empty(), "hidden layer list must not be empty");
  for (int w : hidden) require(w >= 1, "hidden widths must be positive");
  require(p2_value() <= p1_value() && p1_value() <= 0.0, "penalties must satisfy p2 <= p1 <= 0");
  require(gradual_penalty_transition >= 0.0 && gradual_penalty_transition <= 1.0,
          "gradual_penalty_transition must lie in [0, 1]");
  require(!stop_at_success || (*stop_at_success >= 0.0 && *stop_at_success <= 1.0),
          "stop_at_success must lie in [0, 1]");
  require(train_goals == "uniform" || train_goals == "fixed", "train_goals must be uniform or fixed");
}

std::string config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["env"] = c.env;
  j["seed"] = c.seed;
  j["total_steps"] = c.total_steps;
  j["c_h"] = c.c_h;
  j["c_l"] = c.c_l;
  j["n_landmarks"] = c.n_landmarks;
  j["pool_size"] = c.pool_size;
  j["tau_randomwalk"] = c.tau_randomwalk;
  j["episodes_without_graph"] = c.episodes_without_graph;
  j["graph_update_freq"] = c.graph_update_freq;
  j["high_train_freq"] = c.high_train_freq;
  j["hidden"] = c.hidden;
  j["actor_lr"] = c.actor_lr;
  j["critic_lr"] = c.critic_lr;
  j["tau"] = c.tau;
  j["gamma"] = c.gamma;
  j["target_update_freq"] = c.target_update_freq;
  j["actor_update_freq"] = c.actor_update_freq;
  j["batch_size"] = c.batch_size;
  j["low_capacity"] = c.low_capacity;
  j["high_capacity"] = c.high_capacity;
  j["low_explore_noise"] = c.low_explore_noise;
  j["high_explore_noise"] = c.high_explore_noise;
  j["p1"] = c.p1_value();
  j["p2"] = c.p2_value();
  j["zeta1"] = c.zeta1_value();
  j["zeta2"] = c.zeta2_value();
  j["fgs_noise"] = c.fgs_noise;
  j["use_fgs"] = c.use_fgs;
  j["use_gradual_penalty"] = c.use_gradual_penalty;
  j["gradual_penalty_literal"] = c.gradual_penalty_literal;
  j["gradual_penalty_transition"] = c.gradual_penalty_transition;
  j["use_graph"] = c.use_graph;
  j["separate_graph_q"] = c.separate_graph_q;
  j["train_goals"] = c.train_goals;
  j["eval_every"] = c.eval_every;
  j["eval_episodes"] = c.eval_episodes;
  j["stop_at_success"] = c.stop_at_success ? nlohmann::ordered_json(*c.stop_at_success) : nlohmann::ordered_json();
  return j.dump(2);
}

TrainConfig config_from_json(const std::string& text, TrainConfig c) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::set<std::string> known = {
      "env", "seed", "total_steps", "c_h", "c_l", "n_landmarks", "pool_size", "tau_randomwalk",
      "episodes_without_graph", "graph_update_freq", "high_train_freq", "hidden", "actor_lr", "critic_lr", "tau",
      "gamma", "target_update_freq", "actor_update_freq", "batch_size", "low_capacity", "high_capacity",
      "low_explore_noise", "high_explore_noise", "p1", "p2", "zeta1", "zeta2", "fgs_noise", "use_fgs",
      "use_gradual_penalty", "gradual_penalty_literal", "gradual_penalty_transition", "use_graph",
      "separate_graph_q", "train_goals", "eval_every", "eval_episodes", "stop_at_success"};
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw std::invalid_argument("unknown config key: " + item.key());
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  auto get_opt = [&](const char* key, std::optional<double>& field) {
    if (j.contains(key)) {
      if (j.at(key).is_null()) field.reset();
      else field = j.at(key).get<double>();
    }
  };
  get("env", c.env);
  get("seed", c.seed);
  get("total_steps", c.total_steps);
  get("c_h", c.c_h);
  get("c_l", c.c_l);
  get("n_landmarks", c.n_landmarks);
  get("pool_size", c.pool_size);
  get("tau_randomwalk", c.tau_randomwalk);
  get("episodes_without_graph", c.episodes_without_graph);
  get("graph_update_freq", c.graph_update_freq);
  get("high_train_freq", c.high_train_freq);
  get("hidden", c.hidden);
  get("actor_lr", c.actor_lr);
  get("critic_lr", c.critic_lr);
  get("tau", c.tau);
  get("gamma", c.gamma);
  get("target_update_freq", c.target_update_freq);
  get("actor_update_freq", c.actor_update_freq);
  get("batch_size", c.batch_size);
  get("low_capacity", c.low_capacity);
  get("high_capacity", c.high_capacity);
  get("low_explore_noise", c.low_explore_noise);
  get("high_explore_noise", c.high_explore_noise);
  get_opt("p1", c.p1);
  get_opt("p2", c.p2);
  get_opt("zeta1", c.zeta1);
  get_opt("zeta2", c.zeta2);
  get("fgs_noise", c.fgs_noise);
  get("use_fgs", c.use_fgs);
  get("use_gradual_penalty", c.use_gradual_penalty);
  get("gradual_penalty_literal", c.gradual_penalty_literal);
  get("gradual_penalty_transition", c.gradual_penalty_transition);
  get("use_graph", c.use_graph);
  get("separate_graph_q", c.separate_graph_q);
  get("train_goals", c.train_goals);
  get("eval_every", c.eval_every);
  get("eval_episodes", c.eval_episodes);
  get_opt("stop_at_success", c.stop_at_success);
  return c;
}

TrainConfig load_config_file(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), std::move(base));
}

double RunMetrics::best_success() const {
  double best = 0.0;
  for (const auto& r : records) best = std::max(best, r.success_rate);
  return best;
}

void write_metrics_csv(const RunMetrics& metrics, std::ostream& out) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : metrics.records) {
    out << r.step << ',' << format_double(r.success_rate) << ',' << format_double(r.mean_return) << ','
        << r.graph_size << ',' << format_double(r.mean_edge_cost) << '\n';
  }
}

void write_timing_csv(const RunMetrics& metrics, std::ostream& out) {
  out << "step,wall_clock_s\n";
  for (const auto& r : metrics.records) out << r.step << ',' << format_double(r.wall_clock_s) << '\n';
}

void write_markers_csv(const RunMetrics& metrics, std::ostream& out) {
  out << "name,step,episode\n";
  for (const auto& m : metrics.markers) out << m.name << ',' << m.step << ',' << m.episode << '\n';
}

EvalResult evaluate(const LowAgent& low, const HighAgent& high, const WaypointGraph* graph, const MazeSpec& spec,
                    int episodes, std::optional<Vec2> goal_override) {
  const Vec2 goal = goal_override.value_or(spec.default_goal);
  const int c_h = high.config().c_h;
  Rng unused(0);
  int successes = 0;
  double total_return = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    EnvState state = reset(spec, goal);
    if (sparse_reward(state.position, goal, spec.success_threshold) == 0.0) {
      ++successes;
      continue;
    }
    WaypointPlan leg;
    double ret = 0.0;
    bool success = false;
    for (int t = 0; t < spec.horizon && !success; ++t) {
      if (t % c_h == 0) {
        const Vec2 sg = high.propose_subgoal(state.position, goal, false, unused);
        leg = start_leg(graph, state.position, sg, low, c_h);
      }
      const Vec2 wp = leg.current_waypoint();
      const StepResult res = step(spec, state, low.act(state.position, wp, false, unused), goal);
      ret += res.reward;
      success = res.success();
      advance(leg, sparse_reward(res.achieved_goal, wp, spec.success_threshold) == 0.0);
      state = res.next_state;
      if (res.done) break;
    }
    successes += success ? 1 : 0;
    total_return += ret;
  }
  EvalResult out;
  out.success_rate = episodes > 0 ? static_cast<double>(successes) / episodes : 0.0;
  out.mean_return = episodes > 0 ? total_return / episodes : 0.0;
  return out;
}

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)),
      spec_((config_.validate(), resolve_maze(config_.env))),
      rng_(config_.seed),
      low_(spec_, low_config(config_, spec_), rng_),
      high_(spec_, high_config(config_, spec_), rng_),
      low_buffer_(config_.low_capacity),
      high_buffer_(config_.high_capacity) {
  if (config_.c_h < config_.c_l) {
    spdlog::debug("c_h = {} is below the cutoff c_l = {}", config_.c_h, config_.c_l);
  }
}

Vec2 Trainer::sample_training_goal() {
  if (config_.train_goals == "fixed") return spec_.default_goal;
  return uniform_free_point(spec_, rng_);
}

void Trainer::rebuild_graph() {
  const double t0 = now_seconds();
  GraphBuildResult built = build_graph(low_buffer_, low_, config_.n_landmarks, config_.c_l, config_.pool_size, rng_);
  ++counters_.graph_builds;
  if (built.undersized) ++counters_.undersized_builds;
  graph_ = std::move(built.graph);
  episodes_since_build_ = 0;
  timings_.graph_builds += now_seconds() - t0;
  spdlog::debug("graph rebuilt at step {}: {} nodes, {} edges", step_, graph_->size(), graph_->edge_count());
}

void Trainer::maybe_evaluate(RunMetrics& metrics) {
  if (step_ % config_.eval_every != 0) return;
  const WaypointGraph* g = graph_ ? &*graph_ : nullptr;
  const double t0 = now_seconds();
  const EvalResult e = evaluate(low_, high_, g, spec_, config_.eval_episodes);
  timings_.evaluation += now_seconds() - t0;
  EvalRecord r;
  r.step = step_;
  r.success_rate = e.success_rate;
  r.mean_return = e.mean_return;
  r.graph_size = g ? g->size() : 0;
  r.mean_edge_cost = g ? g->mean_edge_cost() : 0.0;
  r.wall_clock_s = now_seconds() - wall_start_;
  metrics.records.push_back(r);
  if (config_.stop_at_success && r.success_rate >= *config_.stop_at_success) stopped_ = true;
  spdlog::info("step {:>7}  success {:.2f}  return {:8.2f}  graph {}", r.step, r.success_rate, r.mean_return,
               r.graph_size);
}

void Trainer::run_episode(RunMetrics& metrics) {
  const std::int64_t episode = counters_.episodes;

  if (config_.use_graph && step_ >= config_.tau_randomwalk && episode >= config_.episodes_without_graph) {
    if (!graph_) {
      rebuild_graph();
      graph_init_step_ = step_;
      metrics.markers.push_back({"graph_init", step_, episode});
    } else if (episodes_since_build_ >= config_.graph_update_freq) {
      rebuild_graph();
    }
  }
  const WaypointGraph* g = graph_ ? &*graph_ : nullptr;

  Vec2 goal = sample_training_goal();
  if (config_.use_fgs && g != nullptr) {
    goal = fgs_shift(*g, goal, spec_.start, low_, config_.zeta2_value(), config_.fgs_noise, spec_, rng_);
  }
  EnvState state = reset(spec_, goal);

  std::uniform_real_distribution<double> uniform_action(-spec_.action_limit, spec_.action_limit);
  HighTransition window;
  bool window_open = false;
  WaypointPlan leg;

  auto close_window = [&](const Vec2& end_state) {
    if (!window_open) return;
    window.next_state = end_state;
    window.achieved_goal = end_state;
    if (window.elapsed < config_.c_h) ++counters_.truncated_windows;
    if (window.elapsed > 0) high_buffer_.add(window);
    window_open = false;
  };

  for (int t = 0; t < spec_.horizon && step_ < config_.total_steps && !stopped_; ++t) {
    const bool random_phase = step_ < config_.tau_randomwalk;
    if (t % config_.c_h == 0) {
      close_window(state.position);
      const Vec2 sg = random_phase ? uniform_point(spec_, rng_)
                                   : high_.propose_subgoal(state.position, goal, true, rng_);
      window = HighTransition{};
      window.state = state.position;
      window.env_goal = goal;
      window.subgoal = sg;
      window.episode_id = episode;
      window.t = t;
      window_open = true;
      if (g != nullptr) {
        ++counters_.plans;
        if (counters_.first_plan_step < 0) counters_.first_plan_step = step_;
        const double t0 = now_seconds();
        leg = start_leg(g, state.position, sg, low_, config_.c_h);
        timings_.planning += now_seconds() - t0;
        if (leg.secondary) ++counters_.secondary_plans;
        if (leg.degenerate) ++counters_.degenerate_plans;
      } else {
        leg = start_leg(nullptr, state.position, sg, low_, config_.c_h);
      }
    }

    const Vec2 wp = leg.current_waypoint();
    const Vec2 action = random_phase ? Vec2(uniform_action(rng_), uniform_action(rng_))
                                     : low_.act(state.position, wp, true, rng_);
    const StepResult res = step(spec_, state, action, goal);

    LowTransition lt;
    lt.state = state.position;
    lt.waypoint_goal = wp;
    lt.action = action;
    lt.achieved_goal = res.achieved_goal;
    lt.next_state = res.next_state.position;
    lt.reward = sparse_reward(res.achieved_goal, wp, spec_.success_threshold);
    lt.episode_id = episode;
    lt.t = t;
    low_buffer_.add(lt);

    window.reward += res.reward;
    ++window.elapsed;
    if (res.success()) window.goal_reached = true;
    advance(leg, lt.reward == 0.0);

    state = res.next_state;
    ++step_;
    if (step_ == config_.tau_randomwalk) metrics.markers.push_back({"randomwalk_end", step_, episode});

    const double t0 = now_seconds();
    if (low_.train(low_buffer_, config_.batch_size, rng_).trained) ++counters_.low_updates;
    if (step_ % config_.high_train_freq == 0) {
      const bool ramp_in =
          graph_init_step_ >= 0 &&
          static_cast<double>(step_ - graph_init_step_) <
              config_.gradual_penalty_transition * static_cast<double>(config_.total_steps - graph_init_step_);
      if (high_.train(high_buffer_, config_.batch_size, g, &low_, config_.use_gradual_penalty, ramp_in, rng_).trained) {
        ++counters_.high_updates;
      }
    }
    timings_.training += now_seconds() - t0;
    maybe_evaluate(metrics);
    if (res.done) break;
  }
  close_window(state.position);
  ++counters_.episodes;
  ++episodes_since_build_;
}

RunMetrics Trainer::run() {
  RunMetrics metrics;
  wall_start_ = now_seconds();
  if (config_.tau_randomwalk == 0) metrics.markers.push_back({"randomwalk_end", 0, 0});
  while (step_ < config_.total_steps && !stopped_) run_episode(metrics);
  if (metrics.records.empty() || metrics.records.back().step != step_) {
    const auto saved = config_.eval_every;
    config_.eval_every = 1;
    maybe_evaluate(metrics);
    config_.eval_every = saved;
  }
  return metrics;
}

RunMetrics run(const TrainConfig& config) {
  Trainer trainer(config);
  return trainer.run();
}

void Trainer::save_checkpoint(const std::string& path) const {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw CheckpointError("cannot write checkpoint " + path);
  BinaryWriter out(file);
  out.str(kCheckpointMagic);
  out.u32(kCheckpointVersion);
  out.str(config_to_json(config_));
  out.str(maze_to_json(spec_));
  out.i64(step_);
  std::ostringstream rng_state;
  rng_state << rng_;
  out.str(rng_state.str());
  low_.save(out);
  high_.save(out);
  out.boolean(graph_.has_value());
  if (graph_) out.str(graph_to_json(*graph_));
  if (!file) throw CheckpointError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError("cannot open checkpoint " + path);
  BinaryReader in(file);
  if (in.str() != kCheckpointMagic) throw CheckpointError("not a checkpoint file: " + path);
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config = config_from_json(in.str());
  ck.spec = maze_from_json(in.str());
  ck.step = in.i64();
  ck.rng_state = in.str();
  ck.low = LowAgent::load(in);
  ck.high = HighAgent::load(in);
  if (in.boolean()) ck.graph = graph_from_json(in.str());
  return ck;
}

}  // namespace dhrl
