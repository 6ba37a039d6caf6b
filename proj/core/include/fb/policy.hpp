#pragma once

#include <Eigen/Dense>

#include "fb/representation.hpp"
#include "fb/rng.hpp"

namespace fb {

/// How actions are drawn from Q(s, .) = F(s, ., z)^T z.
struct PolicySpec {
  enum class Kind { greedy, boltzmann, epsilon_greedy };

  Kind kind = Kind::greedy;
  double temperature = 1.0;  // boltzmann only, > 0
  double epsilon = 0.0;      // epsilon_greedy only, in [0, 1]

  static PolicySpec greedy() { return {}; }
  static PolicySpec boltzmann(double tau);
  static PolicySpec epsilon_greedy(double eps);
};

/// argmax with the lowest index winning ties.
int greedy_action(const Eigen::Ref<const Eigen::VectorXd>& q);
/// Action distribution induced by `spec` on one Q row.
Eigen::VectorXd action_probabilities(const Eigen::Ref<const Eigen::VectorXd>& q,
                                     const PolicySpec& spec);
/// Samples from action_probabilities (greedy never touches the stream).
int sample_action(const Eigen::Ref<const Eigen::VectorXd>& q, const PolicySpec& spec,
                  RandomStream& rng);
/// pi_z(s) under `spec`.
int act(const Representation& rep, const State& s, const TaskVector& z, const PolicySpec& spec,
        RandomStream& rng);

}  // namespace fb
