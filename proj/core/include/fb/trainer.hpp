#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fb/fb_model.hpp"
#include "fb/hyperparams.hpp"
#include "fb/losses.hpp"
#include "fb/optim.hpp"
#include "fb/replay.hpp"

namespace fb {

struct EpochRecord {
  int epoch = 0;
  double fb_loss = 0.0;   // mean over the epoch's updates
  double reg_loss = 0.0;  // mean over the epoch's updates
  double cov_b_error = 0.0;
  double eval_score = 0.0;  // NaN when evaluation is disabled
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t transitions = 0;
  std::int64_t updates = 0;
};

/// Metrics CSV: "epoch,fb_loss,reg_loss,covB_err,eval_score".
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpochRecord& record);
void write_metrics_csv(std::ostream& out, const TrainReport& report);

/// Raised when a loss leaves [-1e6, 1e6] or a gradient is not finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int epoch, int cycle)
      : std::runtime_error(what), epoch_(epoch), cycle_(cycle) {}
  [[nodiscard]] int epoch() const { return epoch_; }
  [[nodiscard]] int cycle() const { return cycle_; }

 private:
  int epoch_;
  int cycle_;
};

/// Runs episodes_per_cycle episodes of steps_per_episode steps, each with a
/// fresh z from the prior, and pushes every transition. Actions are uniform
/// with probability epsilon_explore and greedy on F(s, ., z)^T z otherwise.
/// Episodes start uniformly over valid states. Returns the number of new transitions.
std::size_t collect_episodes(const Environment& env, const Representation& model, const Hyperparams& hp,
                             ReplayBuffer& buffer, RandomStream& rng);

/// |Cov_hat(B) - I|_F under the buffer's state distribution. Discrete
/// environments use exact state frequencies; continuous ones use every stored
/// state, or max_samples uniform draws when the buffer is larger.
double buffer_covariance_error(const FBModel& model, const ReplayBuffer& buffer, RandomStream& rng,
                               std::size_t max_samples = 16384);

using EpochCallback = std::function<void(const EpochRecord&, const FBModel&)>;

/// The unsupervised phase. Each epoch is cycles_per_epoch cycles of: collect
/// episodes, updates_per_cycle gradient steps (theta on the FB loss, omega on
/// FB loss + lambda_reg * regularizer, both with Adam), then one Polyak step
/// of both target networks.
class Trainer {
 public:
  explicit Trainer(const Hyperparams& hp);

  [[nodiscard]] const Hyperparams& hyperparams() const { return hp_; }
  [[nodiscard]] const Environment& env() const { return *env_; }
  [[nodiscard]] FBModel& model() { return *model_; }
  [[nodiscard]] const FBModel& model() const { return *model_; }
  [[nodiscard]] std::shared_ptr<FBModel> model_ptr() const { return model_; }
  [[nodiscard]] ReplayBuffer& buffer() { return buffer_; }
  [[nodiscard]] const ReplayBuffer& buffer() const { return buffer_; }
  /// The fixed goals scored after every epoch.
  [[nodiscard]] const std::vector<State>& eval_goals() const { return eval_goals_; }

  std::size_t collect();
  /// One gradient step on freshly sampled batches.
  LossResult<float> update();
  void update_targets();
  /// Evaluation score of the current model on eval_goals().
  double evaluate();
  EpochRecord run_epoch();
  TrainReport run(const EpochCallback& callback = {});

 private:
  Hyperparams hp_;
  std::shared_ptr<const Environment> env_;
  std::shared_ptr<FBModel> model_;
  ReplayBuffer buffer_;
  AdamState<float> adam_f_;
  AdamState<float> adam_b_;
  RandomStream root_;
  RandomStream collect_rng_;
  RandomStream batch_rng_;
  std::vector<State> eval_goals_;
  std::vector<Eigen::VectorXd> optimal_values_;
  int epoch_ = 0;
  int cycle_ = 0;
  std::int64_t updates_ = 0;
};

struct TrainResult {
  std::shared_ptr<FBModel> model;
  TrainReport report;
};

/// Validates hp and runs Trainer(hp).run().
TrainResult train(const Hyperparams& hp, const EpochCallback& callback = {});

}  // namespace fb
