#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <vector>

#include "fb/env.hpp"
#include "fb/oracle.hpp"
#include "fb/policy.hpp"
#include "fb/representation.hpp"
#include "fb/rng.hpp"

namespace fb {

/// The policy `spec` induces from Q = F^T z at every state index of a
/// discrete environment (wall rows are uniform and never visited).
TabularPolicy tabular_policy(const Representation& rep, const Environment& env, const TaskVector& z,
                             const PolicySpec& spec);

/// Policy quality of pi_z with z = B(goal), against the exact optimum.
double goal_quality(const Representation& rep, const Environment& env, int goal, const PolicySpec& spec,
                    double gamma);

struct RolloutResult {
  std::vector<State> trajectory;  // start state first
  bool reached = false;
  /// Steps taken until the goal was first reached, or the total step count.
  int steps = 0;
};

using StatePredicate = std::function<bool(const State&)>;

/// Runs pi_z from `start` for at most max_steps steps. With stop_on_reach the
/// rollout ends as soon as `is_goal` holds.
RolloutResult rollout(const Representation& rep, const Environment& env, const State& start,
                      const TaskVector& z, const PolicySpec& spec, int max_steps, RandomStream& rng,
                      const StatePredicate& is_goal = {}, bool stop_on_reach = false);

/// Batched rollouts from several starts toward one z; returns final states.
std::vector<State> final_states(const Representation& rep, const Environment& env,
                                const std::vector<State>& starts, const TaskVector& z, const PolicySpec& spec,
                                int horizon, RandomStream& rng);

struct SuccessOptions {
  int horizon = 100;
  double threshold = 0.1;
  int starts_per_goal = 10;
};

/// Fraction of rollouts toward z = B(goal), from uniform random starts, whose
/// final state lies within the threshold of the goal.
double success_rate(const Representation& rep, const Environment& env, const State& goal,
                    const PolicySpec& spec, const SuccessOptions& options, RandomStream& rng);

/// n evaluation goals: distinct open cells (discrete) or uniform points (continuous).
std::vector<State> sample_goals(const Environment& env, int n, RandomStream& rng);

/// Median of a non-empty sample.
double median(std::vector<double> values);

/// max_a F(s, a, z)^T z on a grid. Discrete maze: layout rows x cols, NaN on
/// walls. Cycle: 1 x k. Continuous maze: resolution x resolution cell
/// centers, row i at y = (i + 0.5) / resolution, column j at x = (j + 0.5) / resolution.
Eigen::MatrixXd q_heatmap(const Representation& rep, const Environment& env, const TaskVector& z,
                          int resolution = 50);

enum class EmbeddingKind { forward, backward };

struct Embedding {
  std::vector<State> states;
  Eigen::MatrixXd values;  // one row per state
};

/// B(s), or F(s, a*, z) with a* the greedy action, for every open state
/// (discrete) or a grid x grid lattice of cell centers (continuous).
Embedding export_embedding(const Representation& rep, const Environment& env, EmbeddingKind kind,
                           const TaskVector& z, int grid = 50);
void write_embedding_csv(std::ostream& out, const Environment& env, const Embedding& embedding);

/// Euclidean distance between continuous states, or 0/1 for discrete ones.
double state_distance(const Environment& env, const State& a, const State& b);

}  // namespace fb
