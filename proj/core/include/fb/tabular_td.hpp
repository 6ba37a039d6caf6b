#pragma once

#include <Eigen/Dense>

#include "fb/env.hpp"
#include "fb/oracle.hpp"
#include "fb/rng.hpp"

namespace fb {

/// A small MDP with a fixed policy and data distribution rho over its
/// state-action pairs (index s * |A| + a).
struct TabularMDP {
  EnvDynamics dynamics;
  TabularPolicy policy;
  Eigen::VectorXd rho;
};

/// Dense random kernel, policy and rho, all bounded away from zero.
TabularMDP random_tabular_mdp(int num_states, int num_actions, RandomStream& rng);

struct TabularTDConfig {
  double gamma = 0.9;
  double learning_rate = 0.05;
  int updates = 200'000;
  /// Transitions and targets per update; 1 is the single-sample rule.
  int batch_size = 128;
};

/// Trains a one-hot (table) successor density m[(s0,a0), (s',a')] with the
/// temporal-difference rule
///
///   dm = d m(x, x) + d m(x, y) (gamma m(x1, y) - m(x, y)),
///
/// x = (s0, a0) ~ rho, s1 ~ P(.|x), a1 ~ pi(.|s1), y ~ rho independently,
/// averaged over batch_size transitions and batch_size targets (all pairs).
/// Starts from m = 0.
Eigen::MatrixXd train_tabular_td(const TabularMDP& mdp, const TabularTDConfig& config, RandomStream& rng);

/// m = M diag(1 / rho): the density of M^pi with respect to rho.
Eigen::MatrixXd successor_density(const SuccessorMeasure& sm, const Eigen::VectorXd& rho);

}  // namespace fb
