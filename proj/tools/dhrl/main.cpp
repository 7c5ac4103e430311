// dhrl: train, evaluate and inspect DHRL agents on 2D point mazes.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "dhrl/trainer.hpp"
#include "dhrl/verify.hpp"

namespace fs = std::filesystem;
using namespace dhrl;

namespace {

void init_logging() {
  const char* level = std::getenv("DHRL_LOG_LEVEL");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct TrainFlags {
  std::string config_file;
  std::string env;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<int> c_h;
  std::optional<double> c_l;
  std::optional<std::size_t> landmarks;
  std::optional<double> p1;
  std::optional<double> p2;
  bool fgs = false;
  std::optional<bool> gradual_penalty;
  bool gradual_penalty_literal = false;
  bool no_plan = false;
  std::vector<int> hidden;
  std::optional<double> stop_at_success;
  std::string out = "run";
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config_file, "JSON config file; flags override its values");
  cmd->add_option("--env", f.env, "built-in maze name or maze JSON file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--steps", f.steps, "total environment steps");
  cmd->add_option("--c-h", f.c_h, "high-level subgoal interval in steps");
  cmd->add_option("--c-l", f.c_l, "graph edge cutoff in steps");
  cmd->add_option("--landmarks", f.landmarks, "graph landmark count");
  cmd->add_option("--p1", f.p1, "penalty for an unachieved subgoal near the graph");
  cmd->add_option("--p2", f.p2, "penalty for an unachieved subgoal far from the graph");
  cmd->add_flag("--fgs", f.fgs, "enable frontier goal shifting");
  cmd->add_option("--gradual-penalty", f.gradual_penalty, "gradual penalty on/off (true|false)");
  cmd->add_flag("--gradual-penalty-literal", f.gradual_penalty_literal,
                "compare the raw graph Q-value with zeta1 instead of the distance");
  cmd->add_flag("--no-plan", f.no_plan, "coupled mode: pursue subgoals directly, never build a graph");
  cmd->add_option("--hidden", f.hidden, "hidden layer widths, e.g. --hidden 64 64");
  cmd->add_option("--stop-at-success", f.stop_at_success, "end training once an evaluation reaches this rate");
  cmd->add_option("--out", f.out, "output directory");
}

TrainConfig resolve_config(const TrainFlags& f) {
  TrainConfig c;
  if (!f.config_file.empty()) c = load_config_file(f.config_file);
  if (!f.env.empty()) c.env = f.env;
  if (f.seed) c.seed = *f.seed;
  if (f.steps) c.total_steps = *f.steps;
  if (f.c_h) c.c_h = *f.c_h;
  if (f.c_l) c.c_l = *f.c_l;
  if (f.landmarks) c.n_landmarks = *f.landmarks;
  if (f.p1) c.p1 = *f.p1;
  if (f.p2) c.p2 = *f.p2;
  if (f.fgs) c.use_fgs = true;
  if (f.gradual_penalty) c.use_gradual_penalty = *f.gradual_penalty;
  if (f.gradual_penalty_literal) c.gradual_penalty_literal = true;
  if (f.no_plan) c.use_graph = false;
  if (!f.hidden.empty()) c.hidden = f.hidden;
  if (f.stop_at_success) c.stop_at_success = f.stop_at_success;
  return c;
}

RunMetrics train_to(const TrainConfig& config, const fs::path& out) {
  fs::create_directories(out);
  write_file(out / "config.json", config_to_json(config) + "\n");
  Trainer trainer(config);
  const RunMetrics metrics = trainer.run();
  std::ostringstream csv, timing, markers;
  write_metrics_csv(metrics, csv);
  write_timing_csv(metrics, timing);
  write_markers_csv(metrics, markers);
  write_file(out / "metrics.csv", csv.str());
  write_file(out / "timing.csv", timing.str());
  write_file(out / "markers.csv", markers.str());
  trainer.save_checkpoint((out / "checkpoint.bin").string());
  if (trainer.graph()) save_graph_file(*trainer.graph(), (out / "graph.json").string());
  return metrics;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Graph-planned hierarchical RL on 2D point mazes"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train one run and write metrics, config echo, checkpoint, graph");
  add_train_flags(train, train_flags);

  std::string ckpt;
  int episodes = 20;
  std::vector<double> goal;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("checkpoint", ckpt, "checkpoint file")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes");
  eval->add_option("--goal", goal, "goal x y (defaults to the maze goal)")->expected(2);

  TrainFlags sweep_flags;
  std::vector<int> grid{20, 50, 80};
  std::vector<std::uint64_t> seeds{0};
  bool coupled = false;
  auto* sweep = app.add_subcommand("sweep", "train over a grid of c_h values (and optionally a coupled baseline)");
  add_train_flags(sweep, sweep_flags);
  sweep->add_option("--grid", grid, "c_h values");
  sweep->add_option("--seeds", seeds, "seeds per grid point");
  sweep->add_flag("--coupled", coupled, "also run the coupled baseline with c_h = c_l = max grid value");

  std::string graph_out = "graph.json";
  auto* export_graph = app.add_subcommand("export-graph", "write the graph stored in a checkpoint as JSON");
  export_graph->add_option("checkpoint", ckpt, "checkpoint file")->required();
  export_graph->add_option("--out", graph_out, "output file");

  std::string verify_env = "small";
  double epsilon = 2.0, verify_cl = 10.0;
  std::size_t trials = 500;
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "measure the off-policy error rate with the grid oracle");
  verify->add_option("--env", verify_env, "maze name or file");
  verify->add_option("--epsilon", epsilon, "graph resolution in steps");
  verify->add_option("--c-l", verify_cl, "edge cutoff in steps");
  verify->add_option("--trials", trials, "random start/goal pairs");
  verify->add_option("--seed", verify_seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const TrainConfig config = resolve_config(train_flags);
      const RunMetrics m = train_to(config, train_flags.out);
      std::cout << "final success " << m.final_success() << "  best " << m.best_success() << "\n";
    } else if (*eval) {
      const Checkpoint c = load_checkpoint(ckpt);
      std::optional<Vec2> g;
      if (goal.size() == 2) g = Vec2(goal[0], goal[1]);
      const EvalResult r = evaluate(c.low, c.high, c.graph ? &*c.graph : nullptr, c.spec, episodes, g);
      std::cout << "success_rate " << r.success_rate << "\nmean_return " << r.mean_return << "\n";
    } else if (*sweep) {
      const TrainConfig base = resolve_config(sweep_flags);
      const fs::path root = sweep_flags.out;
      fs::create_directories(root);
      std::ofstream summary(root / "summary.csv");
      summary << "mode,c_h,c_l,seed,final_success\n";
      auto one = [&](TrainConfig c, const std::string& mode) {
        const fs::path dir = root / (mode + "_ch" + std::to_string(c.c_h) + "_s" + std::to_string(c.seed));
        const RunMetrics m = train_to(c, dir);
        summary << mode << ',' << c.c_h << ',' << c.c_l << ',' << c.seed << ',' << m.final_success() << '\n';
        summary.flush();
      };
      for (std::uint64_t s : seeds) {
        for (int ch : grid) {
          TrainConfig c = base;
          c.seed = s;
          c.c_h = ch;
          one(c, c.use_graph ? "dhrl" : "coupled");
        }
        if (coupled) {
          TrainConfig c = base;
          c.seed = s;
          c.c_h = *std::max_element(grid.begin(), grid.end());
          c.c_l = c.c_h;
          c.use_graph = false;
          one(c, "coupled");
        }
      }
    } else if (*export_graph) {
      const Checkpoint c = load_checkpoint(ckpt);
      if (!c.graph) {
        std::cerr << "checkpoint holds no graph (training ended before graph initialization)\n";
        return 1;
      }
      save_graph_file(*c.graph, graph_out);
      std::cout << "wrote " << c.graph->size() << " nodes to " << graph_out << "\n";
    } else if (*verify) {
      const MazeSpec spec = resolve_maze(verify_env);
      const OracleDistanceModel oracle(std::make_shared<GridOracle>(spec, 0.25));
      const WaypointGraph g = build_resolution_graph(oracle, epsilon, verify_cl);
      const ResolutionReport res = check_resolution(g, spec, epsilon);
      Rng rng(verify_seed);
      const ErrorRateReport rep = measure_error_rate(spec, g, verify_cl, trials, rng, oracle, oracle);
      std::cout << "nodes " << g.size() << "  worst_gap " << res.worst_gap << "  resolution "
                << (res.is_resolution_graph ? "yes" : "no") << "\n"
                << "samples " << rep.samples.size() << "  skipped " << rep.skipped_degenerate + rep.skipped_disconnected
                << "  max_rho " << rep.max_rho << "  bound " << 2.0 * epsilon / verify_cl << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
