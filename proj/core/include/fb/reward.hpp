#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fb/env.hpp"
#include "fb/replay.hpp"
#include "fb/representation.hpp"
#include "fb/rng.hpp"

namespace fb {

/// Goal g with weight w; a negative weight marks a forbidden state.
struct GoalWeight {
  State goal;
  double weight = 1.0;
};

/// One observed (possibly noisy) reward.
struct RewardSample {
  State s;
  int a = 0;
  double reward = 0.0;
};

using RewardFunction = std::function<double(const State&, int)>;

/// Declarative reward: weighted goals, or reward samples.
struct RewardSpec {
  std::vector<GoalWeight> goals;
  std::vector<RewardSample> samples;

  [[nodiscard]] bool is_goal_spec() const { return !goals.empty(); }
  /// Multiplies every weight or sample reward by c.
  [[nodiscard]] RewardSpec scaled(double c) const;
};

/// z_R = sum_i w_i B(g_i). Throws std::invalid_argument on an empty list.
TaskVector zr_from_goals(const Representation& rep, const std::vector<GoalWeight>& goals);

/// Mean of r(s, a) B(s, a) over buffer entries. n_samples = 0 makes one full
/// deterministic pass; otherwise n_samples uniform draws from rng (required).
/// Throws std::runtime_error("empty replay buffer") on an empty buffer.
TaskVector zr_from_function(const Representation& rep, const ReplayBuffer& buffer, const RewardFunction& r,
                            std::size_t n_samples = 0, RandomStream* rng = nullptr);

/// (1/N) sum_i r_i B(s_i, a_i). Throws std::invalid_argument when empty.
TaskVector zr_from_samples(const Representation& rep, const std::vector<RewardSample>& samples);

/// Dispatches on the populated field of the spec.
TaskVector zr_from_spec(const Representation& rep, const RewardSpec& spec);

/// Rejected reward spec. status is 400 for malformed input and 422 for a
/// well-formed spec that names wall or out-of-range states.
class SpecError : public std::runtime_error {
 public:
  SpecError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  [[nodiscard]] int status() const { return status_; }

 private:
  int status_;
};

/// Parses {"goals":[{"cell":17,"w":1.0},...]} (discrete) or
/// {"goals":[{"x":0.2,"y":0.8,"w":1.0}]} (continuous). A "samples" array of
/// {"cell"|"x","y", "a", "r"} objects is accepted instead of goals.
RewardSpec parse_reward_spec(const std::string& json_text, const Environment& env);
std::string reward_spec_to_json(const RewardSpec& spec, const Environment& env);

/// CSV rows "cell,action,reward" (discrete) or "x,y,action,reward"
/// (continuous). A non-numeric first line is taken as a header.
std::vector<RewardSample> parse_reward_samples_csv(const std::string& text, const Environment& env);

}  // namespace fb
