#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fb/env.hpp"
#include "fb/policy.hpp"

namespace fb {

/// Everything a training run needs. Defaults follow the per-environment
/// settings returned by Hyperparams::defaults_for().
struct Hyperparams {
  EnvId env = EnvId::discrete_maze;
  int env_parameter = 0;  // cycle length for the cycle world

  double gamma = 0.99;
  double learning_rate = 1e-3;
  int batch_size = 128;
  double temperature = 200.0;
  double lambda_reg = 1.0;
  double polyak = 0.95;
  double epsilon_explore = 1.0;
  int episodes_per_cycle = 4;
  int steps_per_episode = 50;
  int updates_per_cycle = 40;
  int cycles_per_epoch = 25;
  int epochs = 200;
  int d = 100;
  std::vector<int> hidden{256, 256, 256};
  std::size_t buffer_capacity = 1'000'000;
  std::uint64_t seed = 1;

  // Evaluation after each epoch (eval_goals = 0 disables it).
  int eval_goals = 20;
  int eval_horizon = 100;
  PolicySpec eval_policy = PolicySpec::boltzmann(1.0);
  double success_threshold = 0.1;

  static Hyperparams defaults_for(EnvId env);

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;

  /// key = value lines, one per field, parseable by parse_config().
  [[nodiscard]] std::string to_config() const;
};

/// Parses key = value text ('#' starts a comment). `env` is applied first so
/// the remaining keys override that environment's defaults. Throws
/// std::invalid_argument with the line number on unknown keys or bad values.
Hyperparams parse_config(const std::string& text);
Hyperparams load_config(const std::filesystem::path& path);

/// Applies one key = value assignment.
void set_hyperparam(Hyperparams& hp, const std::string& key, const std::string& value);

std::string policy_to_string(const PolicySpec& spec);
/// "greedy", "boltzmann:<tau>" or "epsilon:<eps>".
PolicySpec parse_policy(const std::string& text);

}  // namespace fb
