#include <doctest.h>

#include <cmath>
#include <deque>
#include <memory>

#include "fb/evaluation.hpp"
#include "fb/oracle.hpp"
#include "fb/reward.hpp"
#include "test_support.hpp"

namespace {

std::shared_ptr<const fb::DiscreteMaze> maze() {
  static const auto m = std::make_shared<const fb::DiscreteMaze>();
  return m;
}

std::vector<int> bfs_distances(const fb::DiscreteMaze& m, int goal) {
  std::vector<int> dist(static_cast<std::size_t>(m.layout().num_cells()), -1);
  std::deque<int> q{goal};
  dist[static_cast<std::size_t>(goal)] = 0;
  while (!q.empty()) {
    const int c = q.front();
    q.pop_front();
    for (int a = 0; a < 4; ++a) {
      const int n = m.move(c, a);
      if (dist[static_cast<std::size_t>(n)] < 0) {
        dist[static_cast<std::size_t>(n)] = dist[static_cast<std::size_t>(c)] + 1;
        q.push_back(n);
      }
    }
  }
  return dist;
}

fb::TabularPolicy random_policy(int ns, int na, fb::RandomStream& rng) {
  fb::TabularPolicy pi{Eigen::MatrixXd(ns, na)};
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) pi.probs(s, a) = rng.uniform(0.05, 1.0);
    pi.probs.row(s) /= pi.probs.row(s).sum();
  }
  return pi;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("successor measure closed forms") {
  fb::EnvDynamics loop{1, 1, Eigen::MatrixXd::Ones(1, 1), {0}};
  const auto sm = fb::successor_measure_exact(loop, fb::TabularPolicy::uniform(1, 1), 0.9);
  CHECK(sm.M(0, 0) == doctest::Approx(10.0).epsilon(1e-12));

  const auto dyn = fb::CycleWorld(5).exact_dynamics();
  const auto m0 = fb::successor_measure_exact(dyn, fb::TabularPolicy::uniform(5, 3), 0.0);
  CHECK((m0.M - Eigen::MatrixXd::Identity(15, 15)).norm() == 0.0);
  CHECK_THROWS(fb::successor_measure_exact(dyn, fb::TabularPolicy::uniform(5, 3), 1.0));
}

TEST_CASE("three-state chain against a truncated series") {
  // s0 -> s1 -> s2 -> s2, one action.
  fb::EnvDynamics dyn{3, 1, Eigen::MatrixXd::Zero(3, 3), {0, 1, 2}};
  dyn.kernel(0, 1) = dyn.kernel(1, 2) = dyn.kernel(2, 2) = 1.0;
  const auto sm = fb::successor_measure_exact(dyn, fb::TabularPolicy::uniform(3, 1), 0.5);
  Eigen::MatrixXd brute = Eigen::MatrixXd::Zero(3, 3), pt = Eigen::MatrixXd::Identity(3, 3);
  for (int t = 0; t <= 50; ++t) {
    brute += std::pow(0.5, t) * pt;
    pt = pt * dyn.kernel;
  }
  CHECK(sm.M(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK((sm.M - brute).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("maze successor measure: normalization, positivity and Bellman recurrence") {
  const auto dyn = maze()->exact_dynamics();
  fb::RandomStream rng(1);
  const auto pi = random_policy(dyn.num_states, dyn.num_actions, rng);
  const double gamma = 0.95;
  const auto sm = fb::successor_measure_exact(dyn, pi, gamma);
  for (int s : dyn.valid_states)
    for (int a = 0; a < 5; ++a) CHECK(sm.M.row(s * 5 + a).sum() == doctest::Approx(1 / (1 - gamma)).epsilon(1e-9));
  CHECK(sm.M.minCoeff() >= -1e-12);
  const Eigen::MatrixXd p = fb::state_action_chain(dyn, pi);
  const Eigen::MatrixXd rhs = Eigen::MatrixXd::Identity(p.rows(), p.cols()) + gamma * p * sm.M;
  CHECK((sm.M - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("Q from M for random rewards and policies") {
  const auto dyn = maze()->exact_dynamics();
  fb::RandomStream rng(2);
  double worst = 0;
  for (int p = 0; p < 10; ++p) {
    const auto pi = random_policy(dyn.num_states, dyn.num_actions, rng);
    const auto sm = fb::successor_measure_exact(dyn, pi, 0.9);
    for (int r = 0; r < 10; ++r) {
      Eigen::MatrixXd reward(dyn.num_states, dyn.num_actions);
      for (int i = 0; i < reward.size(); ++i) reward.data()[i] = rng.normal();
      const Eigen::MatrixXd q = fb::q_function(dyn, pi, reward, 0.9);
      Eigen::VectorXd r_flat(dyn.num_states * dyn.num_actions);
      for (int s = 0; s < dyn.num_states; ++s)
        for (int a = 0; a < dyn.num_actions; ++a) r_flat(s * dyn.num_actions + a) = reward(s, a);
      const Eigen::VectorXd from_m = sm.M * r_flat;
      for (int s : dyn.valid_states)
        for (int a = 0; a < 5; ++a) worst = std::max(worst, std::abs(from_m(s * 5 + a) - q(s, a)));
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("value iteration") {
  const auto dyn = maze()->exact_dynamics();
  const auto zero = fb::value_iteration(dyn, Eigen::MatrixXd::Zero(dyn.num_states, 5), 0.99);
  CHECK(zero.q.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.policy[0] == 0);

  const double gamma = 0.99;
  for (int goal : {0, 24, 112}) {
    const auto vi = fb::value_iteration(dyn, fb::goal_reward(dyn, goal), gamma);
    const auto dist = bfs_distances(*maze(), goal);
    for (int s : dyn.valid_states)
      CHECK(vi.v(s) == doctest::Approx(std::pow(gamma, dist[static_cast<std::size_t>(s)]) / (1 - gamma)).epsilon(1e-10));
    // Q* equals Q of its own greedy policy, as r times M.
    const auto pi = fb::TabularPolicy::deterministic(vi.policy, 5);
    CHECK((fb::q_function(dyn, pi, fb::goal_reward(dyn, goal), gamma) - vi.q).cwiseAbs().maxCoeff() < 1e-8);
    // Greedy policy follows a shortest path.
    fb::RandomStream rng(0);
    for (int s : dyn.valid_states) {
      int c = s, steps = 0;
      while (c != goal && steps < 200) c = maze()->move(c, vi.policy[static_cast<std::size_t>(c)]), ++steps;
      CHECK(steps == dist[static_cast<std::size_t>(s)]);
    }
  }
}

TEST_CASE("tie-broken argmax") {
  CHECK(fb::tie_broken_argmax(Eigen::Vector3d(1.0, 1.0 + 1e-13, 0.5)) == 0);
  CHECK(fb::tie_broken_argmax(Eigen::Vector3d(1.0, 1.0 + 1e-6, 0.5)) == 1);
  CHECK(fb::tie_broken_argmax(Eigen::Vector3d(0.0, 0.0, 0.0)) == 0);
}

TEST_CASE("policy quality") {
  const auto dyn = maze()->exact_dynamics();
  const int goal = 30;
  const auto vi = fb::value_iteration(dyn, fb::goal_reward(dyn, goal), 0.99);
  CHECK(fb::policy_quality(dyn, fb::TabularPolicy::deterministic(vi.policy, 5), goal, 0.99) ==
        doctest::Approx(1.0).epsilon(1e-12));
  const double uq = fb::policy_quality(dyn, fb::TabularPolicy::uniform(dyn.num_states, 5), goal, 0.99);
  CHECK(uq > 0.0);
  CHECK(uq < 1.0);
  CHECK_THROWS_AS(fb::policy_quality(dyn, fb::TabularPolicy::uniform(dyn.num_states, 5), 5, 0.99),
                  std::invalid_argument);
}

TEST_CASE("policy quality on an open grid against rollouts") {
  const fb::DiscreteMaze grid(fb::MazeLayout::parse(".....\n.....\n.....\n.....\n.....\n"));
  const auto dyn = grid.exact_dynamics();
  const int goal = grid.layout().cell(2, 4);
  const double gamma = 0.9;
  const auto pi = fb::TabularPolicy::deterministic(std::vector<int>(25, fb::kRight), 5);
  const double solved = fb::policy_quality(dyn, pi, goal, gamma);

  const auto vi = fb::value_iteration(dyn, fb::goal_reward(dyn, goal), gamma);
  fb::RandomStream rng(0);
  double total = 0;
  for (int s = 0; s < 25; ++s) {
    double v = 0, disc = 1;
    auto st = fb::State::discrete(s);
    while (disc > 1e-13) {
      v += disc * (st.index == goal ? 1.0 : 0.0);
      st = grid.step(st, fb::kRight, rng);
      disc *= gamma;
    }
    total += v / vi.v(s);
  }
  CHECK(std::abs(total / 25 - solved) < 1e-6);
}

TEST_CASE("exact FB rejects non-positive rho and wall states") {
  const auto dyn = maze()->exact_dynamics();
  Eigen::VectorXd rho = fb::uniform_rho(dyn);
  CHECK(rho.size() == 520);
  rho(3) = 0.0;
  CHECK_THROWS_WITH_AS(fb::ExactFB(maze(), 0.99, rho), "rho must be positive", std::invalid_argument);
  const fb::ExactFB exact(maze(), 0.99);
  CHECK(exact.dim() == 520);
  CHECK(exact.pair_index(5, 0) == -1);
  CHECK_THROWS(exact.backward(fb::State::discrete(5), 0));
}

TEST_CASE("exact FB reproduces Q* and the optimal policy for random rewards") {
  const fb::ExactFB exact(maze(), 0.99);
  const auto& dyn = exact.dynamics();
  fb::ReplayBuffer buffer(1000);
  for (int s : dyn.valid_states)
    for (int a = 0; a < 5; ++a) buffer.push({fb::State::discrete(s), a, fb::State::discrete(maze()->move(s, a))});
  fb::RandomStream rng(3);
  const auto states = maze()->enumerate_states();
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::MatrixXd reward(dyn.num_states, 5);
    for (int i = 0; i < reward.size(); ++i) reward.data()[i] = rng.normal();
    const auto z = fb::zr_from_function(exact, buffer, [&](const fb::State& s, int a) { return reward(s.index, a); });
    const auto vi = fb::value_iteration(dyn, reward, 0.99);
    const Eigen::MatrixXd q = exact.q_values(states, z);
    double worst = 0;
    for (std::size_t k = 0; k < states.size(); ++k) {
      const int s = states[k].index;
      for (int a = 0; a < 5; ++a) worst = std::max(worst, std::abs(q(a, static_cast<Eigen::Index>(k)) - vi.q(s, a)));
      CHECK(fb::tie_broken_argmax(q.col(static_cast<Eigen::Index>(k))) == vi.policy[static_cast<std::size_t>(s)]);
      // Per-state forward() agrees with the batched path.
      const Eigen::VectorXd qs = exact.forward(states[k], z).transpose() * z;
      CHECK((qs - q.col(static_cast<Eigen::Index>(k))).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK(worst < 1e-8);
    // Positive scaling of the reward leaves the greedy actions unchanged.
    const fb::TaskVector z3 = 3.5 * z;
    const Eigen::MatrixXd q3 = exact.q_values(states, z3);
    for (std::size_t k = 0; k < states.size(); ++k)
      CHECK(fb::tie_broken_argmax(q3.col(static_cast<Eigen::Index>(k))) ==
            fb::tie_broken_argmax(q.col(static_cast<Eigen::Index>(k))));
  }
}

TEST_CASE("exact FB with zero z returns the tie-broken greedy policy's measure") {
  const fb::ExactFB exact(maze(), 0.9);
  const fb::TaskVector z = fb::TaskVector::Zero(exact.dim());
  const auto pi = exact.policy_for(z);
  for (int s : exact.dynamics().valid_states) CHECK(pi.probs(s, 0) == 1.0);
  const auto sm = fb::successor_measure_exact(exact.dynamics(), pi, 0.9);
  CHECK((exact.successor_on_pairs(z) - fb::restrict_to_pairs(sm.M, exact.dynamics())).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exact FB goal reaching for every open cell") {
  const fb::ExactFB exact(maze(), 0.99);
  const auto& dyn = exact.dynamics();
  const auto states = maze()->enumerate_states();
  for (int goal : dyn.valid_states) {
    const auto z = fb::zr_from_goals(exact, {{fb::State::discrete(goal), 1.0}});
    const auto dist = bfs_distances(*maze(), goal);
    const Eigen::MatrixXd q = exact.q_values(states, z);
    for (std::size_t k = 0; k < states.size(); ++k) {
      const int s = states[k].index;
      const int a = fb::greedy_action(q.col(static_cast<Eigen::Index>(k)));
      const int next = maze()->move(s, a);
      if (s == goal) {
        REQUIRE(next == goal);
      } else {
        REQUIRE(dist[static_cast<std::size_t>(next)] == dist[static_cast<std::size_t>(s)] - 1);
      }
    }
  }
}

TEST_CASE("analytic cycle model") {
  const fb::AnalyticCycleFB rep(8);
  fb::RandomStream rng(0);
  const auto z = fb::forward_B(rep, fb::State::discrete(2));
  CHECK(fb::act(rep, fb::State::discrete(0), z, fb::PolicySpec::greedy(), rng) == 2);
  CHECK(fb::act(rep, fb::State::discrete(5), fb::forward_B(rep, fb::State::discrete(5)), fb::PolicySpec::greedy(), rng) == 1);
  for (int s = 0; s < 8; ++s)
    for (int a = 0; a < 3; ++a)
      for (int t = 0; t < 8; ++t) {
        const auto zt = fb::forward_B(rep, fb::State::discrete(t));
        CHECK(fb::q_estimate(rep, fb::State::discrete(s), a, zt) ==
              doctest::Approx(std::cos(2 * std::numbers::pi * (s + a - 1 - t) / 8)).epsilon(1e-12));
      }
  CHECK_THROWS(fb::AnalyticCycleFB(2));
}

TEST_CASE("analytic cycle reaches every target along a shortest path") {
  for (int k = 3; k <= 12; ++k) {
    const fb::CycleWorld env(k);
    const fb::AnalyticCycleFB rep(k);
    for (int s = 0; s < k; ++s)
      for (int t = 0; t < k; ++t) {
        fb::RandomStream rng(0);
        const auto z = fb::forward_B(rep, fb::State::discrete(t));
        const auto res = fb::rollout(rep, env, fb::State::discrete(s), z, fb::PolicySpec::greedy(), 2 * k, rng,
                                     [t](const fb::State& x) { return x.index == t; }, true);
        const int diff = std::abs(s - t);
        CHECK(res.reached);
        CHECK(res.steps == std::min(diff, k - diff));
      }
  }
}

TEST_CASE("successor and predecessor consistency at the exact solution") {
  const auto chain = std::make_shared<fb::testing::Chain>(6);
  for (double gamma : {0.0, 0.7, 0.95}) {
    const fb::ExactFB exact(chain, gamma);
    fb::RandomStream rng(4);
    fb::TaskVector z(exact.dim());
    for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const auto pi = exact.policy_for(z);
    const auto rep = fb::succ_pred_consistency(exact.f_table(z), exact.b_table(), exact.dynamics(), pi, gamma,
                                               exact.rho());
    CHECK(rep.successor_residual < 1e-8);
    CHECK(rep.predecessor_residual < 1e-8);
    CHECK(rep.rank_cov_b == exact.dim());
    Eigen::MatrixXd noisy = exact.b_table();
    for (int i = 0; i < noisy.size(); ++i) noisy.data()[i] += rng.normal(0.0, 0.1);
    const auto bad = fb::succ_pred_consistency(exact.f_table(z), noisy, exact.dynamics(), pi, gamma, exact.rho());
    CHECK(bad.successor_residual > 1e-3);
    CHECK(bad.predecessor_residual > 1e-3);
  }
}

TEST_CASE("consistency with a rank-deficient factorization") {
  // Low-rank exact factorization M diag(1/rho) = F^T B of a rank-one chain.
  fb::EnvDynamics dyn{2, 1, Eigen::MatrixXd::Constant(2, 2, 0.5), {0, 1}};
  const double gamma = 0.5;
  const auto sm = fb::successor_measure_exact(dyn, fb::TabularPolicy::uniform(2, 1), gamma);
  const Eigen::Vector2d rho(0.5, 0.5);
  const Eigen::MatrixXd m = sm.M * rho.cwiseInverse().asDiagonal();
  // Embed in d = 3 with a dead coordinate so both covariances are singular.
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(3, 2), b = Eigen::MatrixXd::Zero(3, 2);
  f.topRows(2) = m.transpose();
  b.topRows(2) = Eigen::Matrix2d::Identity();
  const auto rep = fb::succ_pred_consistency(f, b, sm.M, rho);
  CHECK(rep.rank_cov_b == 2);
  CHECK(rep.rank_cov_f == 2);
  CHECK(rep.successor_residual < 1e-10);
  CHECK(rep.predecessor_residual < 1e-10);
}

}
