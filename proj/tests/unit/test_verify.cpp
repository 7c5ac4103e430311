#include <doctest.h>

#include <cmath>

#include "dhrl/verify.hpp"

using namespace dhrl;

namespace {

MazeSpec open_room(double w, double h) {
  MazeSpec s;
  s.name = "room";
  s.extents = Vec2(w, h);
  s.start = Vec2(0.0, 0.0);
  s.default_goal = Vec2(w, h);
  s.success_threshold = 0.5;
  s.horizon = 200;
  s.action_limit = 0.5;
  return s;
}

}  // namespace

TEST_SUITE("verify") {

TEST_CASE("oracle model agrees with the grid") {
  const MazeSpec spec = small_maze();
  auto grid = std::make_shared<GridOracle>(spec, 0.25);
  const OracleDistanceModel model(grid);
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  std::vector<Vec2> a, b;
  for (int i = 0; i < 30; ++i) {
    Vec2 p(u(rng), u(rng));
    while (!spec.is_free(p)) p = Vec2(u(rng), u(rng));
    (i % 2 ? a : b).push_back(p);
  }
  const Matrix d = model.distances(a, b);
  const Matrix q = model.values(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      CHECK(d(ii, jj) == grid->distance(a[i], b[j]));
      CHECK(q(ii, jj) == doctest::Approx(q_from_distance(d(ii, jj), 0.99)).epsilon(1e-12));
    }
  }
  // Transposed layout takes the other caching branch.
  const Matrix dt = model.distances(b, a);
  CHECK((dt - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.distances(std::vector<Vec2>{a[0]}, std::vector<Vec2>{a[0]})(0, 0) == 0.0);
}

TEST_CASE("unreachable pairs are infinite and valued at the floor") {
  MazeSpec spec = open_room(10.0, 4.0);
  spec.walls.push_back({4.0, -1.0, 5.0, 5.0});
  const OracleDistanceModel model(std::make_shared<GridOracle>(spec, 0.5));
  const std::vector<Vec2> left{Vec2(1.0, 1.0)}, right{Vec2(8.0, 1.0)};
  CHECK(std::isinf(model.distances(left, right)(0, 0)));
  CHECK(model.values(left, right)(0, 0) == doctest::Approx(-100.0));
}

TEST_CASE("resolution of a single node in a corridor") {
  const MazeSpec spec = open_room(10.0, 1.0);
  WaypointGraph g;
  g.nodes = {Vec2(5.0, 0.5)};
  g.cost = Matrix::Constant(1, 1, kInf);
  const ResolutionReport r = check_resolution(g, spec, 10.5);
  CHECK(r.worst_gap == doctest::Approx(10.0));
  CHECK(r.is_resolution_graph);
  CHECK(r.samples == 41u * 5u);
  CHECK_FALSE(check_resolution(g, spec, 10.0).is_resolution_graph);

  // The report is monotone in epsilon.
  bool seen_true = false;
  for (double eps = 1.0; eps <= 20.0; eps += 0.5) {
    const bool ok = check_resolution(g, spec, eps).is_resolution_graph;
    if (seen_true) CHECK(ok);
    seen_true = seen_true || ok;
  }
  CHECK(seen_true);
}

TEST_CASE("empty graph is never a resolution graph") {
  const ResolutionReport r = check_resolution(WaypointGraph{}, small_maze(), 1000.0);
  CHECK(std::isinf(r.worst_gap));
  CHECK_FALSE(r.is_resolution_graph);
  CHECK_THROWS_AS(check_resolution(WaypointGraph{}, small_maze(), 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("constructed resolution graphs satisfy the check") {
  for (const MazeSpec& spec : {small_maze(), bottleneck_maze()}) {
    const OracleDistanceModel model(std::make_shared<GridOracle>(spec, 0.25));
    for (double eps : {2.0, 5.0}) {
      const WaypointGraph g = build_resolution_graph(model, eps, 30.0);
      CHECK(check_resolution(g, spec, eps).is_resolution_graph);
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) {
          const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
          if (g.has_edge(i, j)) CHECK(g.cost(ii, jj) < 30.0);
        }
      }
    }
  }
}

TEST_CASE("error rate on an exact dense graph is zero") {
  const MazeSpec spec = open_room(3.0, 3.0);
  const OracleDistanceModel model(std::make_shared<GridOracle>(spec, 0.5));
  // Every cell becomes a node.
  const WaypointGraph g = build_resolution_graph(model, 0.5, 4.0);
  CHECK(g.size() == 49u);
  Rng rng(5);
  const ErrorRateReport rep = measure_error_rate(spec, g, 4.0, 300, rng, model, model);
  CHECK(rep.samples.size() + rep.skipped_degenerate + rep.skipped_disconnected == 300u);
  CHECK(rep.skipped_disconnected == 0u);
  CHECK(rep.skipped_degenerate > 0u);
  CHECK(rep.max_rho == 0.0);
  for (const auto& s : rep.samples) {
    CHECK(s.traversed_endpoint == s.goal);
    CHECK(s.total_steps > 0.0);
  }
}

TEST_CASE("error rate respects the bound on a resolution graph") {
  const MazeSpec spec = small_maze();
  const OracleDistanceModel model(std::make_shared<GridOracle>(spec, 0.25));
  const double eps = 2.0, cl = 10.0;
  const WaypointGraph g = build_resolution_graph(model, eps, cl);
  for (WaypointChain chain : {WaypointChain::Dijkstra, WaypointChain::Constructive}) {
    Rng rng(6);
    const ErrorRateReport rep = measure_error_rate(spec, g, cl, 200, rng, model, model, chain, eps);
    CHECK(rep.samples.size() > 150u);
    CHECK(rep.max_rho <= 2.0 * eps / cl);
    for (const auto& s : rep.samples) {
      CHECK(s.rho >= 0.0);
      CHECK(s.waypoints >= 1u);
    }
  }
}

}  // TEST_SUITE
