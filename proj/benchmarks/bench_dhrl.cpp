#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "dhrl/graph.hpp"
#include "dhrl/low_agent.hpp"
#include "dhrl/mlp.hpp"
#include "dhrl/verify.hpp"

using namespace dhrl;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Matrix::NullaryExpr(rows, cols, [&] { return u(rng); });
}

std::vector<Vec2> free_points(const MazeSpec& spec, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> ux(0.0, spec.extents.x()), uy(0.0, spec.extents.y());
  std::vector<Vec2> out;
  while (out.size() < n) {
    const Vec2 p(ux(rng), uy(rng));
    if (spec.is_free(p)) out.push_back(p);
  }
  return out;
}

void BM_MlpForward(benchmark::State& state) {
  Rng rng(1);
  const int width = static_cast<int>(state.range(0));
  Mlp net({6, width, width, 1});
  net.init_uniform(rng);
  const Matrix x = random_matrix(6, 128, rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(256);

void BM_MlpBackward(benchmark::State& state) {
  Rng rng(2);
  const int width = static_cast<int>(state.range(0));
  Mlp net({6, width, width, 1});
  net.init_uniform(rng);
  const Matrix x = random_matrix(6, 128, rng);
  const Matrix g = random_matrix(1, 128, rng);
  Vector grad;
  for (auto _ : state) {
    Mlp::Tape tape;
    net.forward(x, tape);
    benchmark::DoNotOptimize(net.backward(tape, g, &grad));
  }
}
BENCHMARK(BM_MlpBackward)->Arg(64)->Arg(256);

void BM_LowAgentUpdate(benchmark::State& state) {
  Rng rng(3);
  const MazeSpec spec = small_maze();
  LowAgentConfig c;
  c.td3.hidden = {64, 64};
  LowAgent agent(spec, c, rng);
  LowBuffer buffer(20000);
  const auto pts = free_points(spec, 10001, rng);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    LowTransition l;
    l.state = pts[i];
    l.next_state = pts[i + 1];
    l.achieved_goal = pts[i + 1];
    l.waypoint_goal = pts[(i * 7) % pts.size()];
    l.episode_id = static_cast<std::int64_t>(i / 300);
    l.t = static_cast<int>(i % 300);
    buffer.add(l);
  }
  for (auto _ : state) benchmark::DoNotOptimize(agent.train(buffer, 128, rng));
}
BENCHMARK(BM_LowAgentUpdate)->Unit(benchmark::kMillisecond);

void BM_FarthestPointSampling(benchmark::State& state) {
  Rng rng(4);
  const auto pts = free_points(small_maze(), static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fps_select(pts, 300, [](const Vec2& a, const Vec2& b) { return (a - b).norm(); }));
  }
}
BENCHMARK(BM_FarthestPointSampling)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_GraphBuildLearned(benchmark::State& state) {
  Rng rng(5);
  const MazeSpec spec = small_maze();
  LowAgentConfig c;
  c.td3.hidden = {64, 64};
  const LowAgent agent(spec, c, rng);
  const auto pool = free_points(spec, 5000, rng);
  for (auto _ : state) benchmark::DoNotOptimize(build_graph_from_pool(pool, agent, 300, 30.0));
}
BENCHMARK(BM_GraphBuildLearned)->Unit(benchmark::kMillisecond);

void BM_Dijkstra(benchmark::State& state) {
  Rng rng(6);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Matrix cost = random_matrix(n, n, rng).cwiseAbs() * 40.0;
  cost = cost.unaryExpr([](double d) { return d < 30.0 ? d : kInf; });
  for (auto _ : state) benchmark::DoNotOptimize(dijkstra(cost, 0));
}
BENCHMARK(BM_Dijkstra)->Arg(102)->Arg(302);

void BM_PlanOracle(benchmark::State& state) {
  Rng rng(7);
  const MazeSpec spec = small_maze();
  const OracleDistanceModel oracle(std::make_shared<GridOracle>(spec, 0.25));
  const auto nodes = free_points(spec, 300, rng);
  const WaypointGraph g = WaypointGraph::from_distances(nodes, oracle.distances(nodes, nodes), 30.0);
  const auto queries = free_points(spec, 64, rng);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan(g, queries[i % 64], queries[(i + 1) % 64], oracle, 50));
    ++i;
  }
}
BENCHMARK(BM_PlanOracle)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
