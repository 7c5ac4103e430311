#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "dhrl/env.hpp"
#include "dhrl/grid_oracle.hpp"
#include "dhrl/mlp.hpp"

using namespace dhrl;

namespace {

MazeSpec open_room(double w, double h) {
  MazeSpec s;
  s.name = "room";
  s.extents = {w, h};
  s.start = {1.0, 1.0};
  s.default_goal = {w - 1.0, h - 1.0};
  s.success_threshold = 0.5;
  s.horizon = 100;
  return s;
}

// Largest fraction of `delta` that can be travelled without entering a wall
// or leaving the extents, by dense sampling and bisection.
double free_fraction(const MazeSpec& spec, const Vec2& from, const Vec2& delta) {
  auto clear_until = [&](double t) {
    const int n = 2000;
    for (int i = 1; i <= n; ++i) {
      const Vec2 p = from + (t * i / n) * delta;
      if (!spec.is_free(p)) return false;
    }
    return true;
  };
  if (clear_until(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (clear_until(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("reset returns the start with a zero step count") {
  const MazeSpec small = small_maze();
  const EnvState s = reset(small, {10.0, 10.0});
  CHECK(s.position == small.start);
  CHECK(s.step_count == 0);

  const MazeSpec bn = bottleneck_maze();
  CHECK(reset(bn, {11.0, 1.0}).position == bn.start);
}

TEST_CASE("reset rejects goals in walls or outside the extents") {
  const MazeSpec small = small_maze();
  CHECK_THROWS_AS(reset(small, {4.0, 6.0}), InvalidGoal);
  CHECK_THROWS_AS(reset(small, {13.0, 1.0}), InvalidGoal);
  CHECK_THROWS_AS(reset(small, {NAN, 1.0}), InvalidGoal);
}

TEST_CASE("free-space step moves by the action") {
  const MazeSpec room = open_room(10.0, 10.0);
  const StepResult r = step(room, {{1.0, 1.0}, 0}, {0.5, 0.0}, {9.0, 9.0});
  CHECK(r.next_state.position.x() == doctest::Approx(1.5));
  CHECK(r.next_state.position.y() == doctest::Approx(1.0));
  CHECK(r.reward == -1.0);
  CHECK_FALSE(r.done);
  CHECK(r.next_state.step_count == 1);
  CHECK(r.achieved_goal == r.next_state.position);
}

TEST_CASE("actions are clipped to the action limit") {
  const MazeSpec room = open_room(10.0, 10.0);
  const StepResult r = step(room, {{5.0, 5.0}, 0}, {3.0, -3.0}, {9.0, 9.0});
  CHECK(r.next_state.position.x() == doctest::Approx(5.5));
  CHECK(r.next_state.position.y() == doctest::Approx(4.5));
}

TEST_CASE("non-finite actions are rejected") {
  const MazeSpec room = open_room(10.0, 10.0);
  CHECK_THROWS_AS(step(room, {{5.0, 5.0}, 0}, {INFINITY, 0.0}, {9.0, 9.0}), InvalidAction);
  CHECK_THROWS_AS(step(room, {{5.0, 5.0}, 0}, {0.0, NAN}, {9.0, 9.0}), InvalidAction);
}

TEST_CASE("motion into a wall stops at the face") {
  MazeSpec m = open_room(10.0, 10.0);
  m.walls = {{5.0, 0.0, 6.0, 8.0}};
  const StepResult r = step(m, {{4.8, 3.0}, 0}, {0.5, 0.0}, {9.0, 9.0});
  CHECK(r.next_state.position.x() == doctest::Approx(5.0));
  CHECK(r.next_state.position.y() == doctest::Approx(3.0));
  CHECK(r.reward == -1.0);
  CHECK_FALSE(m.in_wall(r.next_state.position));

  // Diagonal contact: the oracle fraction of the segment that stays free.
  const Vec2 from(4.7, 2.0), delta(0.5, 0.4);
  const StepResult d = step(m, {from, 0}, delta, {9.0, 9.0});
  const Vec2 expect = from + free_fraction(m, from, delta) * delta;
  CHECK((d.next_state.position - expect).norm() < 1e-6);
}

TEST_CASE("clip_motion matches the segment-rectangle oracle on random moves") {
  const MazeSpec m = small_maze();
  Rng rng(3);
  std::uniform_real_distribution<double> pos(0.0, 12.0), act(-0.5, 0.5);
  int checked = 0;
  while (checked < 300) {
    const Vec2 p(pos(rng), pos(rng));
    if (!m.is_free(p)) continue;
    const Vec2 d(act(rng), act(rng));
    const Vec2 got = clip_motion(m, p, d);
    const Vec2 expect = p + free_fraction(m, p, d) * d;
    CHECK((got - expect).norm() < 1e-6);
    ++checked;
  }
}

TEST_CASE("reaching the goal ball gives reward 0 and ends the episode") {
  const MazeSpec room = open_room(10.0, 10.0);
  const StepResult r = step(room, {{5.0, 5.0}, 0}, {0.5, 0.0}, {6.0, 5.0});
  CHECK(r.reward == 0.0);
  CHECK(r.done);
  CHECK(r.success());
}

TEST_CASE("the horizon ends the episode") {
  MazeSpec room = open_room(10.0, 10.0);
  room.horizon = 3;
  const StepResult r = step(room, {{5.0, 5.0}, 2}, {0.0, 0.0}, {9.0, 9.0});
  CHECK(r.done);
  CHECK(r.reward == -1.0);
}

TEST_CASE("step is deterministic") {
  const MazeSpec m = small_maze();
  const EnvState s{{7.9, 3.9}, 4};
  const StepResult a = step(m, s, {0.3, 0.45}, {2.0, 10.0});
  const StepResult b = step(m, s, {0.3, 0.45}, {2.0, 10.0});
  CHECK(a.next_state.position == b.next_state.position);
  CHECK(a.reward == b.reward);
  CHECK(a.done == b.done);
}

TEST_CASE("random trajectories never enter a wall") {
  for (const auto& name : builtin_maze_names()) {
    const MazeSpec m = *builtin_maze(name);
    Rng rng(11);
    std::uniform_real_distribution<double> act(-m.action_limit, m.action_limit);
    for (int episode = 0; episode < 20; ++episode) {
      EnvState s = reset(m, m.default_goal);
      for (int t = 0; t < 500; ++t) {
        // Bias toward the walls by repeating each action a few times.
        const Vec2 a(act(rng), act(rng));
        for (int k = 0; k < 4; ++k) {
          s = step(m, s, a, m.default_goal).next_state;
          REQUIRE(m.is_free(s.position));
        }
      }
    }
  }
}

TEST_CASE("reward is -1 or 0 and 0 exactly on success") {
  const MazeSpec m = small_maze();
  Rng rng(5);
  std::uniform_real_distribution<double> pos(0.0, 12.0), act(-0.5, 0.5);
  for (int i = 0; i < 5000; ++i) {
    const Vec2 p(pos(rng), pos(rng)), g(pos(rng), pos(rng));
    if (!m.is_free(p)) continue;
    const StepResult r = step(m, {p, 0}, {act(rng), act(rng)}, g);
    const bool inside = (r.achieved_goal - g).norm() <= m.success_threshold;
    CHECK((r.reward == 0.0 || r.reward == -1.0));
    CHECK((r.reward == 0.0) == inside);
    CHECK(r.done == (inside || r.next_state.step_count >= m.horizon));
  }
}

TEST_CASE("built-in specs satisfy their invariants") {
  for (const auto& name : builtin_maze_names()) {
    const MazeSpec m = *builtin_maze(name);
    CHECK_NOTHROW(m.validate());
    CHECK(m.action_limit == 0.5);
  }
  CHECK(small_maze().horizon == 300);
  CHECK(large_maze().horizon == 600);
  CHECK(bottleneck_maze().horizon == 600);
  CHECK(complex_maze().horizon == 1500);
  CHECK(small_maze().extents == Vec2(12.0, 12.0));
  CHECK(complex_maze().extents == Vec2(56.0, 56.0));
  CHECK_FALSE(builtin_maze("nope").has_value());
}

TEST_CASE("oracle distance of a point to itself is zero") {
  const MazeSpec m = small_maze();
  CHECK(oracle_distance(m, {2.0, 2.0}, {2.0, 2.0}, 0.5) == 0.0);
}

TEST_CASE("corridor points five maximal steps apart are five steps apart") {
  MazeSpec corridor = open_room(10.0, 1.0);
  corridor.start = {1.0, 0.5};
  corridor.default_goal = {9.0, 0.5};
  CHECK(oracle_distance(corridor, {1.0, 0.5}, {3.5, 0.5}, 0.5) == doctest::Approx(5.0));
  CHECK(oracle_distance(corridor, {1.0, 0.5}, {3.5, 0.5}, 0.25) == doctest::Approx(5.0));
}

TEST_CASE("walled-off chambers are infinitely far apart") {
  MazeSpec m = open_room(10.0, 10.0);
  m.walls = {{5.0, -1.0, 6.0, 11.0}};
  CHECK(std::isinf(oracle_distance(m, {1.0, 1.0}, {9.0, 9.0}, 0.5)));
}

TEST_CASE("oracle distances are symmetric and satisfy the triangle inequality") {
  const MazeSpec m = small_maze();
  const GridOracle grid(m, 0.5);
  Rng rng(9);
  std::uniform_real_distribution<double> pos(0.0, 12.0);
  auto draw = [&] {
    for (;;) {
      const Vec2 p(pos(rng), pos(rng));
      if (m.is_free(p)) return p;
    }
  };
  for (int i = 0; i < 300; ++i) {
    const Vec2 a = draw(), b = draw(), c = draw();
    const double ab = grid.distance(a, b), ba = grid.distance(b, a);
    CHECK(ab == doctest::Approx(ba));
    CHECK(grid.distance(a, c) <= ab + grid.distance(b, c) + 1e-9);
  }
}

TEST_CASE("the way around the small maze wall is longer than the straight line") {
  const MazeSpec m = small_maze();
  const double d = oracle_distance(m, m.start, m.default_goal, 0.25);
  // Box-bounded actions make step counts Chebyshev lengths; taut path
  // around the wall corners (8, 4) and (8, 8).
  CHECK(d == doctest::Approx((6.0 + 4.0 + 6.0) / 0.5));
  // No shortcut along the outer boundary next to the wall.
  CHECK_FALSE(m.is_free(Vec2(0.0, 6.0)));
  EnvState s{Vec2(0.0, 3.9), 0};
  for (int i = 0; i < 20; ++i) s = step(m, s, Vec2(0.0, 0.5), m.default_goal).next_state;
  CHECK(s.position.y() == doctest::Approx(4.0));
}

TEST_CASE("maze JSON round trip") {
  const MazeSpec m = bottleneck_maze();
  const MazeSpec back = maze_from_json(maze_to_json(m));
  CHECK(back.name == m.name);
  CHECK(back.walls.size() == m.walls.size());
  CHECK(back.start == m.start);
  CHECK(back.default_goal == m.default_goal);
  CHECK(back.extents == m.extents);
  CHECK(back.success_threshold == m.success_threshold);
  CHECK(back.horizon == m.horizon);

  const auto path = std::filesystem::temp_directory_path() / "dhrl_unit_maze.json";
  save_maze_file(m, path.string());
  CHECK(resolve_maze(path.string()).walls.size() == m.walls.size());
  std::filesystem::remove(path);
  CHECK_THROWS(resolve_maze("no-such-maze"));
}

TEST_CASE("maze files with invalid invariants are rejected") {
  MazeSpec m = small_maze();
  m.start = {4.0, 6.0};
  CHECK_THROWS_AS(maze_from_json(maze_to_json(m)), std::invalid_argument);
}

}  // TEST_SUITE
