#pragma once

#include <Eigen/Dense>
#include <memory>
#include <mutex>
#include <vector>

#include "fb/env.hpp"
#include "fb/representation.hpp"

namespace fb {

/// Row-stochastic |S| x |A| action distribution over state indices.
struct TabularPolicy {
  Eigen::MatrixXd probs;

  static TabularPolicy uniform(int num_states, int num_actions);
  static TabularPolicy deterministic(const std::vector<int>& actions, int num_actions);
  [[nodiscard]] int num_states() const { return static_cast<int>(probs.rows()); }
  [[nodiscard]] int num_actions() const { return static_cast<int>(probs.cols()); }
};

/// Discounted occupancy M[(s,a), (s',a')] = sum_t gamma^t Pr(s_t = s', a_t = a' | s_0 = s, a_0 = a),
/// counting t = 0. Pair (s, a) has index s * |A| + a.
struct SuccessorMeasure {
  Eigen::MatrixXd M;
  double gamma = 0.0;
  TabularPolicy policy;
};

/// The state-action chain P_pi[(s,a),(s',a')] = P(s'|s,a) pi(a'|s').
Eigen::MatrixXd state_action_chain(const EnvDynamics& dyn, const TabularPolicy& pi);

/// Solves (I - gamma P_pi) M = I by dense LU. Requires 0 <= gamma < 1.
SuccessorMeasure successor_measure_exact(const EnvDynamics& dyn, const TabularPolicy& pi, double gamma);

struct ValueIterationResult {
  Eigen::MatrixXd q;  // |S| x |A|
  Eigen::VectorXd v;  // |S|
  std::vector<int> policy;
  int iterations = 0;
};

/// Optimal Bellman iteration to sup-norm `tol` (at most 500 sweeps), then policy iteration with
/// exact evaluation until the greedy policy is stable, so q is exact up to
/// the linear solve. `reward` is |S| x |A|.
ValueIterationResult value_iteration(const EnvDynamics& dyn, const Eigen::MatrixXd& reward, double gamma,
                                     double tol = 1e-10);

/// Q^pi for reward table `reward` (|S| x |A|) by linear solve.
Eigen::MatrixXd q_function(const EnvDynamics& dyn, const TabularPolicy& pi, const Eigen::MatrixXd& reward,
                           double gamma);

/// argmax of q with ties (within a relative tolerance) to the lowest index.
int tie_broken_argmax(const Eigen::Ref<const Eigen::VectorXd>& q, double rel_tol = 1e-11);

/// Sparse goal reward r(s, a) = 1[s = goal] as a table.
Eigen::MatrixXd goal_reward(const EnvDynamics& dyn, int goal);

/// Mean over valid start states of V^pi(s) / V*(s) for the sparse reward at
/// `goal`. Throws std::invalid_argument if the goal is not a valid state or
/// cannot be reached from some start state.
double policy_quality(const EnvDynamics& dyn, const TabularPolicy& pi, int goal, double gamma);
/// Same, with V* for that goal precomputed.
double policy_quality(const EnvDynamics& dyn, const TabularPolicy& pi, int goal, double gamma,
                      const Eigen::VectorXd& v_star);

/// Uniform rho over the valid (open) state-action pairs.
Eigen::VectorXd uniform_rho(const EnvDynamics& dyn);

/// The d = #S x #A exact FB model on the open state-action pairs.
///
/// B(s, a) is the indicator of the pair; for a queried z the reward is
/// decoded as r(s, a) = z_{s,a} / rho(s, a), pi_z is its value-iteration
/// optimal policy, and F(s, a, z) is the row M^{pi_z}((s,a), .) / rho.
class ExactFB final : public Representation {
 public:
  /// rho is indexed like pairs(); throws std::invalid_argument("rho must be positive")
  /// on a non-positive entry.
  ExactFB(std::shared_ptr<const Environment> env, double gamma, Eigen::VectorXd rho);
  ExactFB(std::shared_ptr<const Environment> env, double gamma);

  [[nodiscard]] int dim() const override { return static_cast<int>(pairs_.size()); }
  [[nodiscard]] int num_actions() const override { return dyn_.num_actions; }

  [[nodiscard]] Eigen::VectorXd backward(const State& s, int a) const override;
  [[nodiscard]] Eigen::MatrixXd forward(const State& s, const TaskVector& z) const override;
  [[nodiscard]] Eigen::MatrixXd q_values(const std::vector<State>& states,
                                         const TaskVector& z) const override;

  /// Open (state, action) pairs in index order; pair i is coordinate i of z.
  [[nodiscard]] const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
  /// Coordinate of (s, a), or -1 for a wall state.
  [[nodiscard]] int pair_index(int s, int a) const;
  [[nodiscard]] const Eigen::VectorXd& rho() const { return rho_; }
  [[nodiscard]] const EnvDynamics& dynamics() const { return dyn_; }
  [[nodiscard]] double gamma() const { return gamma_; }

  /// Reward table decoded from z.
  [[nodiscard]] Eigen::MatrixXd decode_reward(const TaskVector& z) const;
  /// pi_z as a deterministic tabular policy.
  [[nodiscard]] TabularPolicy policy_for(const TaskVector& z) const;
  /// d x d matrix whose column i is F(pair i, z).
  [[nodiscard]] Eigen::MatrixXd f_table(const TaskVector& z) const;
  /// d x d matrix whose column i is B(pair i) (the identity).
  [[nodiscard]] Eigen::MatrixXd b_table() const;
  /// M^{pi_z} restricted to the open pairs.
  [[nodiscard]] Eigen::MatrixXd successor_on_pairs(const TaskVector& z) const;

 private:
  struct Solved {
    TaskVector z;
    std::vector<int> policy;
    Eigen::MatrixXd m_pairs;  // d x d
  };
  std::shared_ptr<const Solved> solve(const TaskVector& z) const;

  std::shared_ptr<const Environment> env_;
  EnvDynamics dyn_;
  double gamma_;
  Eigen::VectorXd rho_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<int> index_;  // s * |A| + a -> pair or -1
  mutable std::mutex cache_mutex_;
  mutable std::shared_ptr<const Solved> cache_;
};

/// Closed-form d = 2 model on the length-k cycle, with R^2 read as C:
/// F(s, a, z) = exp(2 pi i (s + a - 1) / k), B(s) = exp(2 pi i s / k).
/// Action index a moves by a - 1. F ignores z; it is exact for z = B(s').
class AnalyticCycleFB final : public Representation {
 public:
  explicit AnalyticCycleFB(int k);

  [[nodiscard]] int dim() const override { return 2; }
  [[nodiscard]] int num_actions() const override { return kCycleActions; }
  [[nodiscard]] Eigen::VectorXd backward(const State& s, int a) const override;
  [[nodiscard]] Eigen::VectorXd backward_goal(const State& g) const override;
  [[nodiscard]] Eigen::MatrixXd forward(const State& s, const TaskVector& z) const override;
  [[nodiscard]] int length() const { return k_; }

 private:
  int k_;
};

struct ConsistencyReport {
  /// |(Cov B) F - successor features of B| / |successor features of B|.
  double successor_residual = 0.0;
  /// |(Cov F) B - predecessor features of F| / |predecessor features of F|.
  double predecessor_residual = 0.0;
  int rank_cov_b = 0;
  int rank_cov_f = 0;
};

/// Checks that F and B are successor / predecessor features of each other
/// for a fixed policy. f and b are d x n (one column per open pair), m is the
/// n x n successor measure on those pairs and rho their distribution. When a
/// covariance is singular the residual is taken after projecting onto its range.
ConsistencyReport succ_pred_consistency(const Eigen::MatrixXd& f, const Eigen::MatrixXd& b,
                                        const Eigen::MatrixXd& m, const Eigen::VectorXd& rho);

/// Convenience overload building M from dynamics and a policy.
ConsistencyReport succ_pred_consistency(const Eigen::MatrixXd& f, const Eigen::MatrixXd& b,
                                        const EnvDynamics& dyn, const TabularPolicy& pi, double gamma,
                                        const Eigen::VectorXd& rho);

/// Open-pair restriction of a full (S*A x S*A) matrix.
Eigen::MatrixXd restrict_to_pairs(const Eigen::MatrixXd& full, const EnvDynamics& dyn);

}  // namespace fb
