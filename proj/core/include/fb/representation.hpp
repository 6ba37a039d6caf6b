#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fb/env.hpp"

namespace fb {

/// Task vector z in R^d: sampled during training, or z_R estimated from a reward.
using TaskVector = Eigen::VectorXd;

/// A forward-backward pair (F, B) over some environment.
///
/// Implemented by the learned networks and by the exact tabular and analytic
/// constructions, so reward inference, policies and evaluation run unchanged
/// on any of them.
class Representation {
 public:
  virtual ~Representation() = default;

  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual int num_actions() const = 0;

  /// B(s, a).
  [[nodiscard]] virtual Eigen::VectorXd backward(const State& s, int a) const = 0;
  /// B at a goal state. Defaults to the mean of B(g, a) over actions; models
  /// whose goal map drops the action return B(phi(g)) directly.
  [[nodiscard]] virtual Eigen::VectorXd backward_goal(const State& g) const;
  /// d x n matrix of backward_goal over a batch.
  [[nodiscard]] virtual Eigen::MatrixXd backward_goals(const std::vector<State>& goals) const;
  /// d x n matrix of B(states[i], actions[i]).
  [[nodiscard]] virtual Eigen::MatrixXd backward_pairs(const std::vector<State>& states,
                                                       const std::vector<int>& actions) const;

  /// d x |A| matrix whose column a is F(s, a, z).
  [[nodiscard]] virtual Eigen::MatrixXd forward(const State& s, const TaskVector& z) const = 0;
  /// |A| x n matrix of F(s_i, a, z)^T z.
  [[nodiscard]] virtual Eigen::MatrixXd q_values(const std::vector<State>& states,
                                                 const TaskVector& z) const;
};

/// F(s, a, z).
Eigen::VectorXd forward_F(const Representation& rep, const State& s, int a, const TaskVector& z);
/// B(g) on the goal map.
Eigen::VectorXd forward_B(const Representation& rep, const State& g);
/// Q(s, a) = F(s, a, z_R)^T z_R. The outer z_R is used as given; only F's own
/// input is preprocessed.
double q_estimate(const Representation& rep, const State& s, int a, const TaskVector& z_r);

}  // namespace fb
