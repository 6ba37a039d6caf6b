#include "fb/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace fb {

TabularPolicy tabular_policy(const Representation& rep, const Environment& env, const TaskVector& z,
                             const PolicySpec& spec) {
  if (!env.is_discrete()) throw std::invalid_argument("tabular policies need a discrete environment");
  TabularPolicy pi = TabularPolicy::uniform(env.num_state_indices(), env.num_actions());
  const std::vector<State> states = env.enumerate_states();
  const Eigen::MatrixXd q = rep.q_values(states, z);
  for (std::size_t i = 0; i < states.size(); ++i) {
    pi.probs.row(states[i].index) = action_probabilities(q.col(static_cast<Eigen::Index>(i)), spec).transpose();
  }
  return pi;
}

double goal_quality(const Representation& rep, const Environment& env, int goal, const PolicySpec& spec,
                    double gamma) {
  const TaskVector z = rep.backward_goal(State::discrete(goal));
  return policy_quality(env.exact_dynamics(), tabular_policy(rep, env, z, spec), goal, gamma);
}

double state_distance(const Environment& env, const State& a, const State& b) {
  if (env.is_discrete()) return a.index == b.index ? 0.0 : 1.0;
  return std::hypot(a.x - b.x, a.y - b.y);
}

RolloutResult rollout(const Representation& rep, const Environment& env, const State& start,
                      const TaskVector& z, const PolicySpec& spec, int max_steps, RandomStream& rng,
                      const StatePredicate& is_goal, bool stop_on_reach) {
  if (!env.is_valid(start)) throw std::invalid_argument("rollout start state is not valid");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  RolloutResult out;
  out.trajectory.push_back(start);
  State s = start;
  if (is_goal && is_goal(s)) {
    out.reached = true;
    if (stop_on_reach) return out;
  }
  for (int t = 0; t < max_steps; ++t) {
    s = env.step(s, act(rep, s, z, spec, rng), rng);
    out.trajectory.push_back(s);
    if (!out.reached && is_goal && is_goal(s)) {
      out.reached = true;
      out.steps = t + 1;
      if (stop_on_reach) return out;
    }
  }
  if (!out.reached) out.steps = max_steps;
  return out;
}

std::vector<State> final_states(const Representation& rep, const Environment& env,
                                const std::vector<State>& starts, const TaskVector& z, const PolicySpec& spec,
                                int horizon, RandomStream& rng) {
  std::vector<State> states = starts;
  for (int t = 0; t < horizon && !states.empty(); ++t) {
    const Eigen::MatrixXd q = rep.q_values(states, z);
    for (std::size_t i = 0; i < states.size(); ++i) {
      const int a = sample_action(q.col(static_cast<Eigen::Index>(i)), spec, rng);
      states[i] = env.step(states[i], a, rng);
    }
  }
  return states;
}

double success_rate(const Representation& rep, const Environment& env, const State& goal,
                    const PolicySpec& spec, const SuccessOptions& options, RandomStream& rng) {
  if (options.starts_per_goal < 1) throw std::invalid_argument("starts_per_goal must be >= 1");
  std::vector<State> starts;
  for (int i = 0; i < options.starts_per_goal; ++i) starts.push_back(env.reset(rng));
  const TaskVector z = rep.backward_goal(goal);
  const std::vector<State> ends = final_states(rep, env, starts, z, spec, options.horizon, rng);
  int hits = 0;
  for (const State& s : ends) hits += state_distance(env, s, goal) < options.threshold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ends.size());
}

std::vector<State> sample_goals(const Environment& env, int n, RandomStream& rng) {
  std::vector<State> out;
  if (env.is_discrete()) {
    std::vector<State> open = env.enumerate_states();
    // Partial Fisher-Yates; repeats only once every open state is used.
    for (int i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(i) % open.size();
      const std::size_t j = k + rng.uniform_index(open.size() - k);
      std::swap(open[k], open[j]);
      out.push_back(open[k]);
    }
    return out;
  }
  for (int i = 0; i < n; ++i) out.push_back(env.reset(rng));
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::vector<State> grid_states(int n) {
  std::vector<State> out;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out.push_back(State::point((j + 0.5) / n, (i + 0.5) / n));
  }
  return out;
}

}  // namespace

Eigen::MatrixXd q_heatmap(const Representation& rep, const Environment& env, const TaskVector& z,
                          int resolution) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (env.is_discrete()) {
    int rows = 1;
    int cols = env.num_state_indices();
    if (const auto* maze = dynamic_cast<const DiscreteMaze*>(&env)) {
      rows = maze->layout().rows();
      cols = maze->layout().cols();
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(rows, cols, nan);
    const std::vector<State> states = env.enumerate_states();
    const Eigen::MatrixXd q = rep.q_values(states, z);
    for (std::size_t i = 0; i < states.size(); ++i) {
      out(states[i].index / cols, states[i].index % cols) = q.col(static_cast<Eigen::Index>(i)).maxCoeff();
    }
    return out;
  }
  if (resolution < 1) throw std::invalid_argument("heatmap resolution must be >= 1");
  const std::vector<State> states = grid_states(resolution);
  const Eigen::MatrixXd q = rep.q_values(states, z);
  Eigen::MatrixXd out(resolution, resolution);
  for (std::size_t i = 0; i < states.size(); ++i) {
    out(static_cast<Eigen::Index>(i) / resolution, static_cast<Eigen::Index>(i) % resolution) =
        q.col(static_cast<Eigen::Index>(i)).maxCoeff();
  }
  return out;
}

Embedding export_embedding(const Representation& rep, const Environment& env, EmbeddingKind kind,
                           const TaskVector& z, int grid) {
  Embedding out;
  out.states = env.is_discrete() ? env.enumerate_states() : grid_states(grid);
  const auto n = static_cast<Eigen::Index>(out.states.size());
  out.values.resize(n, rep.dim());
  if (kind == EmbeddingKind::backward) {
    out.values = rep.backward_goals(out.states).transpose();
    return out;
  }
  const Eigen::MatrixXd q = rep.q_values(out.states, z);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = greedy_action(q.col(i));
    out.values.row(i) = rep.forward(out.states[static_cast<std::size_t>(i)], z).col(a).transpose();
  }
  return out;
}

void write_embedding_csv(std::ostream& out, const Environment& env, const Embedding& embedding) {
  out.precision(17);
  out << (env.is_discrete() ? "cell" : "x,y");
  for (Eigen::Index k = 0; k < embedding.values.cols(); ++k) out << ",e" << k;
  out << "\n";
  for (std::size_t i = 0; i < embedding.states.size(); ++i) {
    const State& s = embedding.states[i];
    if (env.is_discrete()) {
      out << s.index;
    } else {
      out << s.x << "," << s.y;
    }
    for (Eigen::Index k = 0; k < embedding.values.cols(); ++k) {
      out << "," << embedding.values(static_cast<Eigen::Index>(i), k);
    }
    out << "\n";
  }
}

}  // namespace fb
