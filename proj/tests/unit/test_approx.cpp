#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "dhrl/mlp.hpp"
#include "dhrl/replay.hpp"
#include "dhrl/td3.hpp"

using namespace dhrl;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Scalar probe loss L = sum(w .* net(x)).
double probe_loss(const Mlp& net, const Matrix& x, const Matrix& w) { return (net.forward(x).array() * w.array()).sum(); }

// True when a rectifier input lies so close to its kink that a central
// difference of half-width `h` cannot be trusted.
bool near_kink(const Mlp& net, const Matrix& x, double h) {
  Mlp::Tape tape;
  net.forward(x, tape);
  for (std::size_t l = 1; l < tape.inputs.size(); ++l) {
    // Inputs past the first layer are rectified; zeros may be kinks.
    const Matrix pre = net.weight(l - 1) * tape.inputs[l - 1] + net.bias(l - 1).replicate(1, x.cols());
    if ((pre.array().abs() < 10.0 * h).any()) return true;
  }
  return false;
}

bool close_rel(double analytic, double numeric, double tol) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-2});
  return std::abs(analytic - numeric) <= tol * scale;
}

struct GradCheck {
  int draws = 0;
  int skipped = 0;
  int failures = 0;
};

// Compares parameter and input gradients against central differences.
GradCheck check_gradients(const std::vector<int>& widths, OutputMap out, int draws, std::size_t max_params, Rng& rng) {
  const double h = 1e-5;
  GradCheck r;
  while (r.draws < draws) {
    Mlp net(widths, out);
    net.init_uniform(rng);
    const Matrix x = random_matrix(net.input_dim(), 3, rng);
    const Matrix w = random_matrix(net.output_dim(), 3, rng);
    if (near_kink(net, x, h)) {
      ++r.skipped;
      continue;
    }
    ++r.draws;
    Mlp::Tape tape;
    net.forward(x, tape);
    Vector grad = Vector::Zero(static_cast<Eigen::Index>(net.parameter_count()));
    const Matrix d_in = net.backward(tape, w, &grad);

    std::uniform_int_distribution<std::size_t> pick(0, net.parameter_count() - 1);
    const std::size_t n = std::min(max_params, net.parameter_count());
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = static_cast<Eigen::Index>(n == net.parameter_count() ? k : pick(rng));
      const double saved = net.parameters()[i];
      net.parameters()[i] = saved + h;
      const double up = probe_loss(net, x, w);
      net.parameters()[i] = saved - h;
      const double down = probe_loss(net, x, w);
      net.parameters()[i] = saved;
      if (!close_rel(grad[i], (up - down) / (2 * h), 1e-4)) ++r.failures;
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Matrix xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      const double numeric = (probe_loss(net, xp, w) - probe_loss(net, xm, w)) / (2 * h);
      if (!close_rel(d_in.data()[i], numeric, 1e-4)) ++r.failures;
    }
  }
  return r;
}

Batch make_batch(const Matrix& obs, const Matrix& action, const Vector& reward, const Vector& done, const Matrix& next) {
  return Batch{obs, action, reward, done, next};
}

}  // namespace

TEST_SUITE("approx") {

TEST_CASE("zero output layer gives a zero output") {
  Rng rng(1);
  Mlp net({3, 8, 2});
  net.init_uniform(rng);
  net.weight(1).setZero();
  net.bias(1).setZero();
  CHECK(net.forward(random_matrix(3, 5, rng)).isZero(0.0));
}

TEST_CASE("identity one-layer net passes its input through") {
  Mlp net({3, 3});
  net.weight(0).setIdentity();
  net.bias(0).setZero();
  Rng rng(2);
  const Matrix x = random_matrix(3, 4, rng);
  CHECK(net.forward(x) == x);
}

TEST_CASE("forward is bitwise deterministic") {
  Rng rng(3);
  Mlp net({6, 64, 64, 1});
  net.init_uniform(rng);
  const Matrix x = random_matrix(6, 7, rng);
  const Matrix a = net.forward(x);
  const Matrix b = net.forward(x);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
}

TEST_CASE("forward rejects a wrong input dimension") {
  Mlp net({3, 4, 1});
  CHECK_THROWS_AS(net.forward(Matrix::Zero(2, 1)), std::invalid_argument);
}

TEST_CASE("parameter count matches the widths") {
  Mlp net({4, 256, 256, 256, 2});
  CHECK(net.parameter_count() == 4u * 256 + 256 + 2u * (256 * 256 + 256) + 256u * 2 + 2);
  CHECK(net.layer_count() == 4);
}

TEST_CASE("bounded actors stay inside their bounds") {
  Rng rng(4);
  Vector scale(2), offset(2);
  scale << 0.5, 6.0;
  offset << 0.0, 6.0;
  Mlp net({4, 16, 2}, OutputMap::bounded(scale, offset));
  net.init_uniform(rng);
  const Matrix y = net.forward(random_matrix(4, 200, rng, 50.0));
  CHECK((y.row(0).array() >= -0.5).all());
  CHECK((y.row(0).array() <= 0.5).all());
  CHECK((y.row(1).array() >= 0.0).all());
  CHECK((y.row(1).array() <= 12.0).all());
}

TEST_CASE("analytic gradients match central differences on small nets") {
  Rng rng(5);
  Vector s(2), o(2);
  s << 0.5, 0.5;
  o << 0.0, 0.0;
  const GradCheck critic = check_gradients({6, 8, 8, 1}, OutputMap::identity(), 100, 1000, rng);
  const GradCheck actor = check_gradients({4, 8, 8, 2}, OutputMap::bounded(s, o), 100, 1000, rng);
  CHECK(critic.draws == 100);
  CHECK(critic.failures == 0);
  CHECK(actor.draws == 100);
  CHECK(actor.failures == 0);
}

TEST_CASE("analytic gradients match central differences on the training shapes") {
  Rng rng(6);
  Vector s(2), o(2);
  s << 6.0, 6.0;
  o << 6.0, 6.0;
  for (const auto& hidden : {std::vector<int>{64, 64}, std::vector<int>{256, 256, 256}}) {
    const int draws = hidden.size() == 2 ? 100 : 10;
    const GradCheck critic = check_gradients(layer_widths(6, hidden, 1), OutputMap::identity(), draws, 60, rng);
    const GradCheck actor = check_gradients(layer_widths(4, hidden, 2), OutputMap::bounded(s, o), draws, 60, rng);
    CHECK(critic.failures == 0);
    CHECK(actor.failures == 0);
  }
}

TEST_CASE("product of two weights has gradient (w1, w0)") {
  // y = w1 * relu(w0 * x) with x = 1 and zero biases is the product w0 * w1.
  Mlp net({1, 1, 1});
  net.parameters().setZero();
  net.weight(0)(0, 0) = 0.7;
  net.weight(1)(0, 0) = -1.3;
  const Matrix x = Matrix::Ones(1, 1);
  Mlp::Tape tape;
  CHECK(net.forward(x, tape)(0, 0) == doctest::Approx(0.7 * -1.3));
  Vector grad = Vector::Zero(4);
  net.backward(tape, Matrix::Ones(1, 1), &grad);
  const double h = 1e-5;
  auto loss_at = [&](Eigen::Index i, double delta) {
    Mlp m = net;
    m.parameters()[i] += delta;
    return m.forward(x)(0, 0);
  };
  // Layout: w0, b0, w1, b1.
  CHECK(grad[0] == doctest::Approx(-1.3));
  CHECK(grad[2] == doctest::Approx(0.7));
  CHECK(grad[0] == doctest::Approx((loss_at(0, h) - loss_at(0, -h)) / (2 * h)).epsilon(1e-4));
  CHECK(grad[2] == doctest::Approx((loss_at(2, h) - loss_at(2, -h)) / (2 * h)).epsilon(1e-4));
}

TEST_CASE("Adam descends a quadratic") {
  Rng rng(7);
  Vector theta = random_matrix(10, 1, rng).col(0);
  Adam adam(10, {1e-3});
  double prev = theta.norm();
  for (int i = 0; i < 200; ++i) {
    REQUIRE(adam.step(theta, 2.0 * theta));
    const double now = theta.norm();
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("a zero gradient leaves parameters unchanged on the first step") {
  Rng rng(8);
  Vector theta = random_matrix(5, 1, rng).col(0);
  const Vector before = theta;
  Adam adam(5, {1e-3});
  CHECK(adam.step(theta, Vector::Zero(5)));
  CHECK(theta == before);
}

TEST_CASE("non-finite gradients are skipped and flagged") {
  Vector theta = Vector::Ones(3);
  Adam adam(3, {1e-3});
  Vector bad = Vector::Ones(3);
  bad[1] = NAN;
  CHECK_FALSE(adam.step(theta, bad));
  CHECK(theta == Vector::Ones(3));
  CHECK(adam.skipped() == 1);
  CHECK(adam.steps() == 0);

  Mlp net({2, 1});
  Adam opt(net.parameter_count(), {1e-3});
  const Vector p = net.parameters();
  Vector g = Vector::Zero(3);
  g[0] = INFINITY;
  CHECK_FALSE(gradient_step(net, opt, g));
  CHECK(net.parameters() == p);
}

TEST_CASE("Polyak averaging") {
  auto scalar_pair = [](double tau, double online, double target) {
    Mlp net({1, 1});
    net.parameters().setConstant(online);
    TargetPair p(net, {}, tau, 1);
    p.target.parameters().setConstant(target);
    return p;
  };
  TargetPair a = scalar_pair(1.0, 1.0, 0.0);
  polyak_update(a);
  CHECK(a.target.parameters() == a.online.parameters());

  TargetPair b = scalar_pair(0.0, 1.0, 0.25);
  polyak_update(b);
  CHECK((b.target.parameters().array() == 0.25).all());

  TargetPair c = scalar_pair(0.005, 1.0, 0.0);
  polyak_update(c);
  CHECK(c.target.parameters()[0] == doctest::Approx(0.005).epsilon(1e-15));
}

TEST_CASE("target equals online right after a hard sync") {
  Rng rng(9);
  Mlp net({3, 5, 1});
  net.init_uniform(rng);
  TargetPair p(net, {}, 0.005, 10);
  p.online.parameters().array() += 1.0;
  CHECK(p.target.parameters() != p.online.parameters());
  p.hard_sync();
  CHECK(p.target.parameters() == p.online.parameters());
  CHECK_THROWS_AS(TargetPair(net, {}, 0.005, 0), std::invalid_argument);
}

TEST_CASE("hindsight relabeling with fraction 0 is the identity") {
  std::vector<LowTransition> ep(6);
  for (int t = 0; t < 6; ++t) {
    ep[t].achieved_goal = {t * 1.0, 0.0};
    ep[t].waypoint_goal = {100.0, 100.0};
    ep[t].t = t;
  }
  Rng rng(10);
  const auto out = her_relabel_low(ep, 0.0, 0.5, rng);
  REQUIRE(out.size() == ep.size());
  for (std::size_t i = 0; i < ep.size(); ++i) {
    CHECK(out[i].waypoint_goal == ep[i].waypoint_goal);
    CHECK(out[i].reward == ep[i].reward);
  }
}

TEST_CASE("a future offset of zero relabels to the own achieved goal with reward 0") {
  // The last transition can only draw t_ftr = 0.
  std::vector<LowTransition> ep(3);
  for (int t = 0; t < 3; ++t) {
    ep[t].achieved_goal = {t * 5.0, 1.0};
    ep[t].waypoint_goal = {-50.0, -50.0};
  }
  Rng rng(11);
  const auto out = her_relabel_low(ep, 1.0, 0.5, rng);
  CHECK(out[2].waypoint_goal == ep[2].achieved_goal);
  CHECK(out[2].reward == 0.0);
}

TEST_CASE("relabeled goals replay the seeded draws") {
  std::vector<LowTransition> ep(3);
  for (int t = 0; t < 3; ++t) {
    ep[t].achieved_goal = {t * 5.0, 1.0};
    ep[t].waypoint_goal = {-50.0, -50.0};
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed), replay(seed);
    const auto out = her_relabel_low(ep, 0.6, 0.5, rng);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int i = 0; i < 3; ++i) {
      if (coin(replay) < 0.6) {
        std::uniform_int_distribution<int> off(0, 2 - i);
        const int f = i + off(replay);
        CHECK(out[i].waypoint_goal == ep[f].achieved_goal);
        CHECK(out[i].reward == (f == i ? 0.0 : -1.0));
      } else {
        CHECK(out[i].waypoint_goal == ep[i].waypoint_goal);
      }
    }
  }
}

TEST_CASE("relabeled share concentrates at the fraction") {
  std::vector<LowTransition> ep(10000);
  for (int t = 0; t < 10000; ++t) {
    ep[t].achieved_goal = {t * 1.0, 0.0};
    ep[t].waypoint_goal = {-1.0, -1.0};
  }
  Rng rng(12);
  const auto out = her_relabel_low(ep, 0.8, 0.5, rng);
  int relabeled = 0;
  for (const auto& tr : out) relabeled += tr.waypoint_goal.x() >= 0.0 ? 1 : 0;
  const double share = relabeled / 10000.0;
  CHECK(share >= 0.78);
  CHECK(share <= 0.82);
}

TEST_CASE("replay buffer never exceeds capacity and evicts oldest first") {
  ReplayBuffer<LowTransition> buf(5);
  for (int i = 0; i < 12; ++i) {
    LowTransition tr;
    tr.episode_id = i / 4;
    tr.t = i % 4;
    buf.add(tr);
    CHECK(buf.size() <= 5);
  }
  CHECK(buf.size() == 5);
  CHECK(buf.oldest() == 7);
  CHECK(buf.at(7).episode_id == 1);
  CHECK_THROWS_AS(buf.at(6), std::out_of_range);
  CHECK(buf.episode_last(7) == 7);
  CHECK(buf.episode_last(8) == 11);
  CHECK_THROWS_AS(ReplayBuffer<LowTransition>(0), std::invalid_argument);
  ReplayBuffer<LowTransition> empty(3);
  Rng rng(0);
  CHECK_THROWS_AS(empty.sample_one(rng), std::logic_error);
}

TEST_CASE("replay sampling is uniform") {
  ReplayBuffer<LowTransition> buf(1000);
  for (int i = 0; i < 1500; ++i) {
    LowTransition tr;
    tr.episode_id = i / 50;
    buf.add(tr);
  }
  Rng rng(13);
  const int draws = 200000;
  std::vector<int> counts(1000, 0);
  for (auto s : buf.sample(draws, rng)) {
    REQUIRE(s >= buf.oldest());
    ++counts[static_cast<std::size_t>(s - buf.oldest())];
  }
  const double expected = draws / 1000.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(999);
  const double p = boost::math::cdf(boost::math::complement(dist, chi2));
  CHECK(p > 0.001);
}

TEST_CASE("critic target with done is the reward") {
  Rng rng(14);
  Vector s(2), o(2);
  s << 0.5, 0.5;
  o << 0.0, 0.0;
  Mlp actor({4, 8, 2}, OutputMap::bounded(s, o));
  actor.init_uniform(rng);
  Mlp q1({6, 8, 1}), q2({6, 8, 1});
  q1.init_uniform(rng);
  q2.init_uniform(rng);
  Vector r(3), d = Vector::Ones(3);
  r << -1.0, 0.0, -1.0;
  const Batch b = make_batch(random_matrix(4, 3, rng), random_matrix(2, 3, rng), r, d, random_matrix(4, 3, rng));
  CHECK(td3_critic_target(q1, q2, actor, b, 0.99, Matrix::Zero(2, 3)) == r);
}

TEST_CASE("twin targets that agree give that value") {
  Rng rng(15);
  Vector s(1), o(1);
  s << 1.0;
  o << 0.0;
  Mlp actor({2, 4, 1}, OutputMap::bounded(s, o));
  actor.init_uniform(rng);
  Mlp q({3, 4, 1});
  q.init_uniform(rng);
  const Batch b = make_batch(random_matrix(2, 4, rng), random_matrix(1, 4, rng), Vector::Zero(4), Vector::Zero(4),
                             random_matrix(2, 4, rng));
  const Vector y = td3_critic_target(q, q, actor, b, 0.9, Matrix::Zero(1, 4));
  const Matrix in = critic_input(b.next_obs, actor.forward(b.next_obs));
  CHECK(y.isApprox(0.9 * q.forward(in).row(0).transpose()));
}

TEST_CASE("critic target on a hand-evaluated two-transition batch") {
  // obs dim 1, action dim 1. Actor a = tanh(2 s); Q1 = s + 3a + 1; Q2 = -s + a.
  Vector scale(1), offset(1);
  scale << 1.0;
  offset << 0.0;
  Mlp actor({1, 1}, OutputMap::bounded(scale, offset));
  actor.weight(0)(0, 0) = 2.0;
  actor.bias(0)(0) = 0.0;
  Mlp q1({2, 1}), q2({2, 1});
  q1.weight(0) << 1.0, 3.0;
  q1.bias(0) << 1.0;
  q2.weight(0) << -1.0, 1.0;
  q2.bias(0) << 0.0;

  Matrix obs(1, 2), act(1, 2), next(1, 2);
  obs << 0.0, 0.0;
  act << 0.0, 0.0;
  next << 0.5, -1.0;
  Vector r(2), d(2);
  r << -1.0, -1.0;
  d << 0.0, 0.0;
  Matrix noise(1, 2);
  noise << 0.1, -0.5;
  const double gamma = 0.99;

  // Transition 0: a' = clip(tanh(1) + 0.1, -1, 1); Q1 = 0.5 + 3a' + 1, Q2 = -0.5 + a'.
  const double a0 = std::min(1.0, std::tanh(1.0) + 0.1);
  const double y0 = -1.0 + gamma * std::min(0.5 + 3 * a0 + 1.0, -0.5 + a0);
  // Transition 1: a' = clip(tanh(-2) - 0.5) = -1; Q1 = -1 - 3 + 1 = -3, Q2 = 1 - 1 = 0.
  const double a1 = std::max(-1.0, std::tanh(-2.0) - 0.5);
  CHECK(a1 == -1.0);
  const double y1 = -1.0 + gamma * std::min(-1.0 + 3 * a1 + 1.0, 1.0 + a1);

  const Vector y = td3_critic_target(q1, q2, actor, make_batch(obs, act, r, d, next), gamma, noise);
  CHECK(y[0] == doctest::Approx(y0).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(y1).epsilon(1e-12));

  const auto clipped = td3_critic_target(q1, q2, actor, make_batch(obs, act, r, d, next), gamma, noise,
                                         std::make_pair(-1.5, -1.2));
  CHECK(clipped[0] == doctest::Approx(std::clamp(y0, -1.5, -1.2)));
  CHECK(clipped[1] == doctest::Approx(std::clamp(y1, -1.5, -1.2)));
}

TEST_CASE("TD3 update schedule") {
  Rng rng(16);
  Vector s(2), o(2);
  s << 0.5, 0.5;
  o << 0.0, 0.0;
  Td3Config cfg;
  cfg.hidden = {8};
  cfg.target_update_freq = 3;
  Td3 td3(4, OutputMap::bounded(s, o), cfg, rng);
  const Batch b = make_batch(random_matrix(4, 8, rng), random_matrix(2, 8, rng, 0.2), Vector::Constant(8, -1.0),
                             Vector::Zero(8), random_matrix(4, 8, rng));
  std::vector<bool> actor, targets;
  for (int i = 0; i < 6; ++i) {
    const Td3Stats st = td3.update(b, rng);
    actor.push_back(st.actor_updated);
    targets.push_back(st.targets_updated);
  }
  CHECK(actor == std::vector<bool>{false, true, false, true, false, true});
  CHECK(targets == std::vector<bool>{false, false, true, false, false, true});
}

TEST_CASE("TD3 with zero learning rates leaves every network unchanged") {
  Rng rng(17);
  Vector s(2), o(2);
  s << 0.5, 0.5;
  o << 0.0, 0.0;
  Td3Config cfg;
  cfg.hidden = {8, 8};
  Td3 td3(4, OutputMap::bounded(s, o), cfg, rng);
  td3.set_learning_rates(0.0, 0.0);
  const Vector a = td3.actor.online.parameters(), q = td3.q1.online.parameters(), qt = td3.q2.target.parameters();
  const Batch b = make_batch(random_matrix(4, 8, rng), random_matrix(2, 8, rng, 0.2), Vector::Constant(8, -1.0),
                             Vector::Zero(8), random_matrix(4, 8, rng));
  for (int i = 0; i < 4; ++i) td3.update(b, rng);
  CHECK(td3.actor.online.parameters() == a);
  CHECK(td3.q1.online.parameters() == q);
  CHECK((td3.q2.target.parameters() - qt).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("smoothing noise is clipped to the noise clip") {
  Rng rng(18);
  Vector s(2), o(2);
  s << 2.0, 2.0;
  o << 0.0, 0.0;
  Td3Config cfg;
  cfg.hidden = {4};
  Td3 td3(2, OutputMap::bounded(s, o), cfg, rng);
  const Matrix n = td3.smoothing_noise(5000, rng);
  CHECK(n.cwiseAbs().maxCoeff() <= 0.5 * 2.0);
  CHECK(n.cwiseAbs().maxCoeff() > 0.9);
}

}  // TEST_SUITE
