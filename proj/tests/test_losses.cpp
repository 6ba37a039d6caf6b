#include <doctest.h>

#include <cmath>
#include <memory>

#include "fb/losses.hpp"
#include "fb/oracle.hpp"
#include "test_support.hpp"

namespace {

using DModel = fb::BasicFBModel<double>;
using Mat = Eigen::MatrixXd;

DModel random_model(std::shared_ptr<const fb::Environment> env, int d, std::uint64_t seed,
                    std::vector<int> hidden = {16, 16}) {
  DModel m(std::move(env), fb::Architecture{d, std::move(hidden)});
  fb::RandomStream rng(seed);
  m.initialize(rng);
  // Targets differ from the online nets so their roles cannot be confused.
  fb::RandomStream rng2(seed + 1000);
  m.f_target().init_kaiming_uniform(rng2);
  m.b_target().init_kaiming_uniform(rng2);
  return m;
}

fb::TrainingBatch random_batch(const fb::Environment& env, int d, int b, fb::RandomStream& rng) {
  fb::TrainingBatch batch;
  for (int i = 0; i < b; ++i) {
    const auto s = env.reset(rng);
    const int a = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(env.num_actions())));
    batch.transitions.push_back({s, a, env.step(s, a, rng)});
    batch.targets.push_back({env.reset(rng), static_cast<int>(rng.uniform_index(env.num_actions()))});
  }
  batch.zs.resize(d, b);
  for (int i = 0; i < b; ++i) batch.zs.col(i) = fb::sample_z(d, rng);
  return batch;
}

std::vector<double> flat_grad(const fb::NetParameters<double>& g) {
  std::vector<double> out;
  for (const auto& l : g) {
    for (int r = 0; r < l.weight.rows(); ++r)
      for (int c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    for (int r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

template <typename Eval>
double fd_check(fb::DenseNet<double>& net, const std::vector<double>& grad, Eval eval, int probes,
                fb::RandomStream& rng) {
  auto flat = net.flatten();
  double worst = 0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t i = rng.uniform_index(flat.size());
    const double keep = flat[i], h = 1e-5;
    flat[i] = keep + h;
    net.unflatten(flat);
    const double up = eval();
    flat[i] = keep - h;
    net.unflatten(flat);
    const double down = eval();
    flat[i] = keep;
    net.unflatten(flat);
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
  }
  return worst;
}

double quarter_cov_objective(const DModel& m, const std::vector<fb::State>& states) {
  const Mat b = m.backward_goals(states);
  const Mat cov = b * b.transpose() / static_cast<double>(states.size());
  return 0.25 * (cov - Mat::Identity(cov.rows(), cov.cols())).squaredNorm();
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("worked example") {
  const Mat f = Mat::Constant(1, 1, 2.0), b = Mat::Constant(1, 1, 3.0), one = Mat::Constant(1, 1, 1.0);
  const auto terms = fb::fb_loss_from_outputs<double>(f, b, one, one, b, 0.99);
  CHECK(terms.loss == doctest::Approx(6.55005).epsilon(1e-12));
  // d/dF: B (F B - g) - B = 3 * 5.01 - 3.
  CHECK(terms.grad_f(0, 0) == doctest::Approx(3 * 5.01 - 3));
  CHECK(terms.grad_b_target(0, 0) == doctest::Approx(2 * 5.01));
  CHECK(terms.grad_b_diag(0, 0) == doctest::Approx(-2));
}

TEST_CASE("zero outputs give zero loss and first-term gradient") {
  const Mat z = Mat::Zero(3, 4);
  const auto terms = fb::fb_loss_from_outputs<double>(z, z, z, z, z, 0.9);
  CHECK(terms.loss == 0.0);
  CHECK(terms.grad_f.isZero(0));
  CHECK(terms.grad_b_target.isZero(0));
}

TEST_CASE("batch mismatch") {
  const auto env = fb::make_environment(fb::EnvId::cycle, 5);
  const auto m = random_model(env, 4, 1);
  fb::RandomStream rng(2);
  auto batch = random_batch(*env, 4, 6, rng);
  batch.targets.pop_back();
  CHECK_THROWS_WITH_AS(fb::fb_loss(m, batch, {}), "batch size mismatch", std::invalid_argument);
  CHECK_THROWS_WITH_AS(fb::ortho_reg_loss(m, batch.transitions, batch.targets), "batch size mismatch",
                       std::invalid_argument);
  const Mat a = Mat::Ones(2, 3), b = Mat::Ones(2, 2);
  CHECK_THROWS_AS(fb::fb_loss_from_outputs<double>(a, b, a, a, a, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(fb::ortho_reg_from_outputs<double>(a, b), std::invalid_argument);
}

TEST_CASE("fb loss matches the displayed double sum") {
  const auto env = fb::make_environment(fb::EnvId::cycle, 6);
  const auto m = random_model(env, 3, 3);
  fb::RandomStream rng(4);
  const auto batch = random_batch(*env, 3, 5, rng);
  const fb::LossOptions opt{0.9, 2.0, 1.0};
  const double loss = fb::fb_loss(m, batch, opt).fb_loss;

  double quad = 0, diag = 0;
  const int b = 5;
  for (int i = 0; i < b; ++i) {
    const auto& t = batch.transitions[i];
    const Eigen::VectorXd z = batch.zs.col(i);
    const Eigen::VectorXd fi = fb::forward_F(m, t.s, t.a, z);
    // Target-network softmax at the next state, logits over raw z.
    DModel tgt(env, m.architecture());
    tgt.f_net() = m.f_target();
    tgt.b_net() = m.b_target();
    const Mat fn = tgt.forward(t.s_next, z);
    Eigen::VectorXd logits = fn.transpose() * z / opt.temperature;
    Eigen::VectorXd pi = (logits.array() - logits.maxCoeff()).exp();
    pi /= pi.sum();
    const Eigen::VectorXd mix = fn * pi;
    for (int j = 0; j < b; ++j) {
      const auto& g = batch.targets[j].s;
      const double r = fi.dot(fb::forward_B(m, g)) - opt.gamma * mix.dot(fb::forward_B(tgt, g));
      quad += r * r;
    }
    diag += fi.dot(fb::forward_B(m, t.s));
  }
  CHECK(loss == doctest::Approx(quad / (2.0 * b * b) - diag / b).epsilon(1e-10));
}

TEST_CASE("fb loss gradients match finite differences") {
  for (auto id : {fb::EnvId::discrete_maze, fb::EnvId::continuous_maze, fb::EnvId::cycle}) {
    CAPTURE(fb::to_string(id));
    const auto env = fb::make_environment(id);
    auto m = random_model(env, 6, 5);
    fb::RandomStream rng(6);
    const auto batch = random_batch(*env, 6, 8, rng);
    const fb::LossOptions opt{0.99, 1.0, 1.0};
    const auto res = fb::fb_loss(m, batch, opt);
    auto eval = [&] { return fb::fb_loss(m, batch, opt).fb_loss; };
    CHECK(fd_check(m.f_net(), flat_grad(res.f_grad), eval, 20, rng) < 1e-4);
    CHECK(fd_check(m.b_net(), flat_grad(res.b_grad), eval, 20, rng) < 1e-4);
  }
}

TEST_CASE("combined update adds lambda times the regularizer gradient") {
  const auto env = fb::make_environment(fb::EnvId::discrete_maze);
  const auto m = random_model(env, 5, 7);
  fb::RandomStream rng(8);
  const auto batch = random_batch(*env, 5, 10, rng);
  const fb::LossOptions opt{0.99, 200.0, 0.7};
  const auto both = fb::fb_update_gradients(m, batch, opt);
  const auto fb_only = fb::fb_loss(m, batch, opt);
  const auto reg = fb::ortho_reg_loss(m, batch.transitions, batch.targets);
  CHECK(both.fb_loss == doctest::Approx(fb_only.fb_loss).epsilon(1e-12));
  CHECK(both.reg_loss == doctest::Approx(reg.reg_loss).epsilon(1e-12));
  auto expect = fb_only.b_grad;
  fb::scale_add(expect, reg.b_grad, 0.7);
  fb::scale_add(expect, both.b_grad, -1.0);
  CHECK(std::sqrt(fb::squared_norm(expect)) < 1e-12);
  CHECK(fb::squared_norm(reg.f_grad) == 0.0);
}

TEST_CASE("regularizer expectation is the gradient of a quarter squared covariance error") {
  for (auto id : {fb::EnvId::discrete_maze, fb::EnvId::continuous_maze}) {
    CAPTURE(fb::to_string(id));
    const auto env = fb::make_environment(id);
    auto m = random_model(env, 5, 9);
    fb::RandomStream rng(10);
    // A frozen state set; using it whole as both batches gives the estimator's exact expectation.
    std::vector<fb::Transition> ts;
    std::vector<fb::StateAction> ps;
    std::vector<fb::State> states;
    for (int i = 0; i < 24; ++i) {
      const auto s = env->reset(rng);
      states.push_back(s);
      ts.push_back({s, 0, s});
      ps.push_back({s, 0});
    }
    const auto reg = fb::ortho_reg_loss(m, ts, ps);
    auto eval = [&] { return quarter_cov_objective(m, states); };
    CHECK(fd_check(m.b_net(), flat_grad(reg.b_grad), eval, 30, rng) < 1e-4);
  }
}

TEST_CASE("one-dimensional constant B") {
  for (double c : {0.3, 1.0, 1.7}) {
    const Mat b = Mat::Constant(1, 1, c);
    const auto reg = fb::ortho_reg_from_outputs<double>(b, b);
    CHECK(reg.grad_b(0, 0) == doctest::Approx(c * c * c - c).epsilon(1e-12));
  }
}

TEST_CASE("orthonormal B on an exhaustive batch has zero regularizer gradient") {
  const Mat b = Mat::Identity(4, 4) * 2.0;  // Cov = (1/4) * 4 I = I
  const auto reg = fb::ortho_reg_from_outputs<double>(b, b);
  CHECK(reg.grad_b.norm() < 1e-14);
  CHECK(fb::covariance_error(b) < 1e-14);
  CHECK(fb::covariance_error(Mat::Zero(3, 5)) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("target networks are never modified and only enter the loss value") {
  const auto env = fb::make_environment(fb::EnvId::discrete_maze);
  auto m = random_model(env, 4, 11);
  fb::RandomStream rng(12);
  const auto batch = random_batch(*env, 4, 16, rng);
  const auto ft = m.f_target().flatten(), bt = m.b_target().flatten();
  const auto r1 = fb::fb_update_gradients(m, batch, {});
  CHECK(m.f_target().flatten() == ft);
  CHECK(m.b_target().flatten() == bt);
  fb::RandomStream rng2(13);
  m.f_target().init_kaiming_uniform(rng2);
  const auto r2 = fb::fb_update_gradients(m, batch, {});
  CHECK(r1.fb_loss != r2.fb_loss);
}

TEST_CASE("tabular reduction: expected loss gradient is minus the TD update") {
  const auto env = std::make_shared<fb::testing::Chain>(5);
  const int n_s = 5, n_a = 2;
  // One linear layer each: F(s, a) is column s of block a and B(s) = e_s,
  // so F(s, a)^T B(s') = m(s, a, s') is a free table.
  DModel m(env, fb::Architecture{n_s, {}});
  m.f_net().set_zero();
  m.b_net().set_zero();
  fb::RandomStream rng(14);
  Mat table(n_s * n_a, n_s);
  for (int i = 0; i < table.size(); ++i) table.data()[i] = rng.uniform(0.0, 2.0);
  for (int s = 0; s < n_s; ++s)
    for (int a = 0; a < n_a; ++a) m.f_net().parameters()[0].weight.block(a * n_s, s, n_s, 1) = table.row(s * n_a + a).transpose();
  m.b_net().parameters()[0].weight.setIdentity();
  m.f_target() = m.f_net();
  m.b_target() = m.b_net();
  const double gamma = 0.9;

  // Expected TD update under uniform rho over pairs, z = 0 (uniform softmax policy).
  const auto dyn = env->exact_dynamics();
  Mat expected = Mat::Zero(n_s * n_a, n_s);
  const double rho = 1.0 / (n_s * n_a);
  for (int x = 0; x < n_s * n_a; ++x) {
    const int s0 = x / n_a, a0 = x % n_a;
    const int s1 = env->step(fb::State::discrete(s0), a0, rng).index;
    expected(x, s0) += rho;
    for (int y = 0; y < n_s * n_a; ++y) {
      const int sp = y / n_a;
      double next = 0;
      for (int a1 = 0; a1 < n_a; ++a1) next += 0.5 * table(s1 * n_a + a1, sp);
      expected(x, sp) += rho * rho * (gamma * next - table(x, sp));
    }
  }

  fb::ReplayBuffer buffer(100);
  for (const auto& t : fb::testing::all_transitions(*env)) buffer.push(t);
  Mat mean_grad = Mat::Zero(n_s * n_a, n_s);
  const int batches = 10000, b = 64;
  for (int k = 0; k < batches; ++k) {
    fb::TrainingBatch batch{buffer.sample_transitions(b, rng), buffer.sample_targets(b, rng), Mat::Zero(n_s, b)};
    const auto res = fb::fb_loss(m, batch, {gamma, 1.0, 0.0});
    const auto& gw = res.f_grad[0].weight;
    for (int s = 0; s < n_s; ++s)
      for (int a = 0; a < n_a; ++a) mean_grad.row(s * n_a + a) += gw.block(a * n_s, s, n_s, 1).transpose();
  }
  mean_grad /= batches;
  CHECK((mean_grad + expected).norm() / expected.norm() < 1e-2);
}

TEST_CASE("exact successor density is a fixed point") {
  const auto env = std::make_shared<fb::testing::Chain>(5);
  const int n_s = 5, n_a = 2;
  const double gamma = 0.8;
  const auto dyn = env->exact_dynamics();
  const auto sm = fb::successor_measure_exact(dyn, fb::TabularPolicy::uniform(n_s, n_a), gamma);
  // Goal map drops the action: state density w.r.t. the uniform state marginal.
  Mat m_state = Mat::Zero(n_s * n_a, n_s);
  for (int y = 0; y < n_s * n_a; ++y) m_state.col(y / n_a) += sm.M.col(y);
  m_state *= n_s;

  DModel m(env, fb::Architecture{n_s, {}});
  m.f_net().set_zero();
  m.b_net().set_zero();
  for (int s = 0; s < n_s; ++s)
    for (int a = 0; a < n_a; ++a) m.f_net().parameters()[0].weight.block(a * n_s, s, n_s, 1) = m_state.row(s * n_a + a).transpose();
  m.b_net().parameters()[0].weight.setIdentity();
  m.f_target() = m.f_net();
  m.b_target() = m.b_net();

  const auto all = fb::testing::all_transitions(*env);
  std::vector<fb::StateAction> targets;
  for (const auto& t : all) targets.push_back({t.s, t.a});
  fb::TrainingBatch batch{all, targets, Mat::Zero(n_s, static_cast<Eigen::Index>(all.size()))};
  const auto res = fb::fb_loss(m, batch, {gamma, 1.0, 0.0});
  CHECK(std::sqrt(fb::squared_norm(res.f_grad)) < 1e-12);

  // Any other table is not stationary.
  m.f_net().parameters()[0].weight(0, 0) += 0.1;
  m.f_target() = m.f_net();
  CHECK(std::sqrt(fb::squared_norm(fb::fb_loss(m, batch, {gamma, 1.0, 0.0}).f_grad)) > 1e-4);
}

TEST_CASE("float and double paths agree") {
  const auto env = fb::make_environment(fb::EnvId::discrete_maze);
  fb::FBModel mf(env, fb::Architecture{8, {32, 32}});
  fb::RandomStream rng(15);
  mf.initialize(rng);
  const auto md = mf.cast<double>();
  const auto batch = random_batch(*env, 8, 32, rng);
  const auto rf = fb::fb_update_gradients(mf, batch, {});
  const auto rd = fb::fb_update_gradients(md, batch, {});
  CHECK(rf.fb_loss == doctest::Approx(rd.fb_loss).epsilon(1e-4));
  CHECK(rf.reg_loss == doctest::Approx(rd.reg_loss).epsilon(1e-4));
}

}
