#include "fb/oracle.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fb {

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions) {
  return {Eigen::MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions)};
}

TabularPolicy TabularPolicy::deterministic(const std::vector<int>& actions, int num_actions) {
  TabularPolicy pi{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), num_actions)};
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= num_actions) throw std::out_of_range("policy action index");
    pi.probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return pi;
}

namespace {

void check_policy(const EnvDynamics& dyn, const TabularPolicy& pi) {
  if (pi.num_states() != dyn.num_states || pi.num_actions() != dyn.num_actions) {
    throw std::invalid_argument("policy shape does not match the dynamics");
  }
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
}

/// P_pi[s, s'] = sum_a pi(a|s) P(s'|s,a).
Eigen::MatrixXd state_chain(const EnvDynamics& dyn, const TabularPolicy& pi) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dyn.num_states, dyn.num_states);
  for (int s = 0; s < dyn.num_states; ++s) {
    for (int a = 0; a < dyn.num_actions; ++a) {
      const double w = pi.probs(s, a);
      if (w != 0.0) p.row(s) += w * dyn.kernel.row(s * dyn.num_actions + a);
    }
  }
  return p;
}

Eigen::VectorXd state_values(const EnvDynamics& dyn, const TabularPolicy& pi, const Eigen::MatrixXd& reward,
                             double gamma) {
  const Eigen::VectorXd r_pi = (pi.probs.cwiseProduct(reward)).rowwise().sum();
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(dyn.num_states, dyn.num_states) - gamma * state_chain(dyn, pi);
  return a.partialPivLu().solve(r_pi);
}

Eigen::MatrixXd q_from_v(const EnvDynamics& dyn, const Eigen::MatrixXd& reward, const Eigen::VectorXd& v,
                         double gamma) {
  const Eigen::VectorXd kv = dyn.kernel * v;
  Eigen::MatrixXd q(dyn.num_states, dyn.num_actions);
  for (int s = 0; s < dyn.num_states; ++s) {
    for (int a = 0; a < dyn.num_actions; ++a) q(s, a) = reward(s, a) + gamma * kv(s * dyn.num_actions + a);
  }
  return q;
}

std::vector<int> greedy_policy(const Eigen::MatrixXd& q) {
  std::vector<int> out(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index s = 0; s < q.rows(); ++s) out[static_cast<std::size_t>(s)] = tie_broken_argmax(q.row(s).transpose());
  return out;
}

}  // namespace

int tie_broken_argmax(const Eigen::Ref<const Eigen::VectorXd>& q, double rel_tol) {
  if (q.size() == 0) throw std::invalid_argument("argmax of an empty vector");
  const double best = q.maxCoeff();
  const double slack = rel_tol * std::max(1.0, std::abs(best));
  for (Eigen::Index a = 0; a < q.size(); ++a) {
    if (q(a) >= best - slack) return static_cast<int>(a);
  }
  return 0;
}

Eigen::MatrixXd state_action_chain(const EnvDynamics& dyn, const TabularPolicy& pi) {
  check_policy(dyn, pi);
  const int n = dyn.num_states * dyn.num_actions;
  Eigen::MatrixXd p(n, n);
  for (int sa = 0; sa < n; ++sa) {
    for (int s2 = 0; s2 < dyn.num_states; ++s2) {
      const double k = dyn.kernel(sa, s2);
      for (int a2 = 0; a2 < dyn.num_actions; ++a2) p(sa, s2 * dyn.num_actions + a2) = k * pi.probs(s2, a2);
    }
  }
  return p;
}

SuccessorMeasure successor_measure_exact(const EnvDynamics& dyn, const TabularPolicy& pi, double gamma) {
  check_gamma(gamma);
  const Eigen::MatrixXd p = state_action_chain(dyn, pi);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p.rows(), p.cols()) - gamma * p;
  SuccessorMeasure out;
  out.M = a.partialPivLu().solve(Eigen::MatrixXd::Identity(p.rows(), p.cols()));
  out.gamma = gamma;
  out.policy = pi;
  return out;
}

Eigen::MatrixXd q_function(const EnvDynamics& dyn, const TabularPolicy& pi, const Eigen::MatrixXd& reward,
                           double gamma) {
  check_policy(dyn, pi);
  check_gamma(gamma);
  return q_from_v(dyn, reward, state_values(dyn, pi, reward, gamma), gamma);
}

ValueIterationResult value_iteration(const EnvDynamics& dyn, const Eigen::MatrixXd& reward, double gamma,
                                     double tol) {
  check_gamma(gamma);
  if (reward.rows() != dyn.num_states || reward.cols() != dyn.num_actions) {
    throw std::invalid_argument("reward table shape does not match the dynamics");
  }
  ValueIterationResult out;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dyn.num_states);
  for (;;) {
    const Eigen::MatrixXd q = q_from_v(dyn, reward, v, gamma);
    const Eigen::VectorXd next = q.rowwise().maxCoeff();
    ++out.iterations;
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (delta <= tol || out.iterations >= 500) break;
  }
  std::vector<int> policy = greedy_policy(q_from_v(dyn, reward, v, gamma));
  for (int round = 0; round < 1000; ++round) {
    const TabularPolicy pi = TabularPolicy::deterministic(policy, dyn.num_actions);
    v = state_values(dyn, pi, reward, gamma);
    out.q = q_from_v(dyn, reward, v, gamma);
    std::vector<int> next = greedy_policy(out.q);
    if (next == policy) break;
    policy = std::move(next);
  }
  out.v = out.q.rowwise().maxCoeff();
  out.policy = std::move(policy);
  return out;
}

Eigen::MatrixXd goal_reward(const EnvDynamics& dyn, int goal) {
  if (goal < 0 || goal >= dyn.num_states) throw std::invalid_argument("goal index out of range");
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dyn.num_states, dyn.num_actions);
  r.row(goal).setOnes();
  return r;
}

double policy_quality(const EnvDynamics& dyn, const TabularPolicy& pi, int goal, double gamma) {
  return policy_quality(dyn, pi, goal, gamma, value_iteration(dyn, goal_reward(dyn, goal), gamma).v);
}

double policy_quality(const EnvDynamics& dyn, const TabularPolicy& pi, int goal, double gamma,
                      const Eigen::VectorXd& v_star) {
  check_policy(dyn, pi);
  bool valid = false;
  for (int s : dyn.valid_states) valid = valid || s == goal;
  if (!valid) throw std::invalid_argument("goal is not an open state");
  const Eigen::VectorXd v_pi = state_values(dyn, pi, goal_reward(dyn, goal), gamma);
  double total = 0.0;
  for (int s : dyn.valid_states) {
    if (!(v_star(s) > 0.0)) throw std::invalid_argument("goal unreachable from state " + std::to_string(s));
    total += v_pi(s) / v_star(s);
  }
  return total / static_cast<double>(dyn.valid_states.size());
}

Eigen::VectorXd uniform_rho(const EnvDynamics& dyn) {
  const auto n = static_cast<Eigen::Index>(dyn.valid_states.size()) * dyn.num_actions;
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

Eigen::MatrixXd restrict_to_pairs(const Eigen::MatrixXd& full, const EnvDynamics& dyn) {
  const int na = dyn.num_actions;
  std::vector<Eigen::Index> idx;
  for (int s : dyn.valid_states) {
    for (int a = 0; a < na; ++a) idx.push_back(s * na + a);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = full(idx[i], idx[j]);
    }
  }
  return out;
}

// --- ExactFB -------------------------------------------------------------------

ExactFB::ExactFB(std::shared_ptr<const Environment> env, double gamma)
    : ExactFB(env, gamma, uniform_rho(env->exact_dynamics())) {}

ExactFB::ExactFB(std::shared_ptr<const Environment> env, double gamma, Eigen::VectorXd rho)
    : env_(std::move(env)), dyn_(env_->exact_dynamics()), gamma_(gamma), rho_(std::move(rho)) {
  check_gamma(gamma_);
  index_.assign(static_cast<std::size_t>(dyn_.num_states * dyn_.num_actions), -1);
  for (int s : dyn_.valid_states) {
    for (int a = 0; a < dyn_.num_actions; ++a) {
      index_[static_cast<std::size_t>(s * dyn_.num_actions + a)] = static_cast<int>(pairs_.size());
      pairs_.emplace_back(s, a);
    }
  }
  if (rho_.size() != static_cast<Eigen::Index>(pairs_.size())) {
    throw std::invalid_argument("rho must have one entry per open state-action pair");
  }
  if (!(rho_.minCoeff() > 0.0)) throw std::invalid_argument("rho must be positive");
}

int ExactFB::pair_index(int s, int a) const {
  if (s < 0 || s >= dyn_.num_states || a < 0 || a >= dyn_.num_actions) return -1;
  return index_[static_cast<std::size_t>(s * dyn_.num_actions + a)];
}

Eigen::VectorXd ExactFB::backward(const State& s, int a) const {
  const int i = pair_index(s.index, a);
  if (i < 0) throw std::invalid_argument("B of a wall state");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  out(i) = 1.0;
  return out;
}

Eigen::MatrixXd ExactFB::decode_reward(const TaskVector& z) const {
  if (z.size() != dim()) throw std::invalid_argument("task vector has wrong dimension");
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dyn_.num_states, dyn_.num_actions);
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    r(pairs_[i].first, pairs_[i].second) = z(e) / rho_(e);
  }
  return r;
}

std::shared_ptr<const ExactFB::Solved> ExactFB::solve(const TaskVector& z) const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_ && cache_->z.size() == z.size() && cache_->z == z) return cache_;
  }
  auto solved = std::make_shared<Solved>();
  solved->z = z;
  solved->policy = value_iteration(dyn_, decode_reward(z), gamma_).policy;
  const TabularPolicy pi = TabularPolicy::deterministic(solved->policy, dyn_.num_actions);
  const Eigen::MatrixXd p = restrict_to_pairs(state_action_chain(dyn_, pi), dyn_);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p.rows(), p.cols()) - gamma_ * p;
  solved->m_pairs = a.partialPivLu().solve(Eigen::MatrixXd::Identity(p.rows(), p.cols()));
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_ = solved;
  return solved;
}

TabularPolicy ExactFB::policy_for(const TaskVector& z) const {
  return TabularPolicy::deterministic(solve(z)->policy, dyn_.num_actions);
}

Eigen::MatrixXd ExactFB::successor_on_pairs(const TaskVector& z) const { return solve(z)->m_pairs; }

Eigen::MatrixXd ExactFB::f_table(const TaskVector& z) const {
  const auto solved = solve(z);
  return (solved->m_pairs * rho_.cwiseInverse().asDiagonal()).transpose();
}

Eigen::MatrixXd ExactFB::b_table() const { return Eigen::MatrixXd::Identity(dim(), dim()); }

Eigen::MatrixXd ExactFB::forward(const State& s, const TaskVector& z) const {
  const auto solved = solve(z);
  Eigen::MatrixXd out(dim(), num_actions());
  for (int a = 0; a < num_actions(); ++a) {
    const int i = pair_index(s.index, a);
    if (i < 0) throw std::invalid_argument("F of a wall state");
    out.col(a) = solved->m_pairs.row(i).transpose().cwiseQuotient(rho_);
  }
  return out;
}

Eigen::MatrixXd ExactFB::q_values(const std::vector<State>& states, const TaskVector& z) const {
  const auto solved = solve(z);
  const Eigen::VectorXd q_pairs = solved->m_pairs * z.cwiseQuotient(rho_);
  Eigen::MatrixXd q(num_actions(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t k = 0; k < states.size(); ++k) {
    for (int a = 0; a < num_actions(); ++a) {
      const int i = pair_index(states[k].index, a);
      if (i < 0) throw std::invalid_argument("Q of a wall state");
      q(a, static_cast<Eigen::Index>(k)) = q_pairs(i);
    }
  }
  return q;
}

// --- AnalyticCycleFB -------------------------------------------------------------

AnalyticCycleFB::AnalyticCycleFB(int k) : k_(k) {
  if (k < 3) throw std::invalid_argument("cycle length must be >= 3");
}

Eigen::VectorXd AnalyticCycleFB::backward_goal(const State& g) const {
  const double angle = 2.0 * std::numbers::pi * g.index / k_;
  return Eigen::Vector2d(std::cos(angle), std::sin(angle));
}

Eigen::VectorXd AnalyticCycleFB::backward(const State& s, int /*a*/) const { return backward_goal(s); }

Eigen::MatrixXd AnalyticCycleFB::forward(const State& s, const TaskVector& /*z*/) const {
  Eigen::MatrixXd out(2, kCycleActions);
  for (int a = 0; a < kCycleActions; ++a) {
    const double angle = 2.0 * std::numbers::pi * (s.index + a - 1) / k_;
    out.col(a) << std::cos(angle), std::sin(angle);
  }
  return out;
}

// --- successor / predecessor consistency ---------------------------------------

namespace {

struct RangeProjection {
  Eigen::MatrixXd projector;
  int rank = 0;
};

RangeProjection range_of(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& vals = eig.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, vals.cwiseAbs().maxCoeff());
  RangeProjection out;
  out.projector = Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) > cutoff) {
      out.projector += eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose();
      ++out.rank;
    }
  }
  return out;
}

double relative_residual(const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& rhs, const RangeProjection& range) {
  Eigen::MatrixXd diff = lhs - rhs;
  Eigen::MatrixXd ref = rhs;
  if (range.rank < lhs.rows()) {
    diff = range.projector * diff;
    ref = range.projector * ref;
  }
  const double scale = ref.norm();
  return scale > 0.0 ? diff.norm() / scale : diff.norm();
}

}  // namespace

ConsistencyReport succ_pred_consistency(const Eigen::MatrixXd& f, const Eigen::MatrixXd& b,
                                        const Eigen::MatrixXd& m, const Eigen::VectorXd& rho) {
  const Eigen::Index n = rho.size();
  if (f.cols() != n || b.cols() != n || m.rows() != n || m.cols() != n || f.rows() != b.rows()) {
    throw std::invalid_argument("succ_pred_consistency: shape mismatch");
  }
  const auto d_rho = rho.asDiagonal();
  const Eigen::MatrixXd cov_b = b * d_rho * b.transpose();
  const Eigen::MatrixXd cov_f = f * d_rho * f.transpose();
  const Eigen::MatrixXd succ = b * m.transpose();
  const Eigen::MatrixXd pred = (f * d_rho * m) * rho.cwiseInverse().asDiagonal();

  const RangeProjection range_b = range_of(cov_b);
  const RangeProjection range_f = range_of(cov_f);
  ConsistencyReport out;
  out.rank_cov_b = range_b.rank;
  out.rank_cov_f = range_f.rank;
  out.successor_residual = relative_residual(cov_b * f, succ, range_b);
  out.predecessor_residual = relative_residual(cov_f * b, pred, range_f);
  return out;
}

ConsistencyReport succ_pred_consistency(const Eigen::MatrixXd& f, const Eigen::MatrixXd& b,
                                        const EnvDynamics& dyn, const TabularPolicy& pi, double gamma,
                                        const Eigen::VectorXd& rho) {
  const SuccessorMeasure sm = successor_measure_exact(dyn, pi, gamma);
  return succ_pred_consistency(f, b, restrict_to_pairs(sm.M, dyn), rho);
}

}  // namespace fb
