#include "fb/trainer.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "fb/evaluation.hpp"
#include "fb/oracle.hpp"

namespace fb {

namespace {

constexpr double kDivergenceBound = 1e6;

enum StreamLabel : std::uint64_t { kInit = 1, kCollect = 2, kBatch = 3, kEvalGoals = 4, kEval = 5, kCov = 6 };

}  // namespace

void write_metrics_header(std::ostream& out) { out << "epoch,fb_loss,reg_loss,covB_err,eval_score\n"; }

void write_metrics_row(std::ostream& out, const EpochRecord& r) {
  std::ostringstream line;
  line.precision(10);
  line << r.epoch << "," << r.fb_loss << "," << r.reg_loss << "," << r.cov_b_error << ",";
  if (std::isnan(r.eval_score)) {
    line << "nan";
  } else {
    line << r.eval_score;
  }
  out << line.str() << "\n";
}

void write_metrics_csv(std::ostream& out, const TrainReport& report) {
  write_metrics_header(out);
  for (const auto& r : report.epochs) write_metrics_row(out, r);
}

std::size_t collect_episodes(const Environment& env, const Representation& model, const Hyperparams& hp,
                             ReplayBuffer& buffer, RandomStream& rng) {
  std::size_t added = 0;
  for (int e = 0; e < hp.episodes_per_cycle; ++e) {
    const TaskVector z = sample_z(model.dim(), rng);
    State s = env.reset(rng);
    for (int t = 0; t < hp.steps_per_episode; ++t) {
      int a = 0;
      if (rng.bernoulli(hp.epsilon_explore)) {
        a = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(env.num_actions())));
      } else {
        a = greedy_action(model.q_values({s}, z).col(0));
      }
      const State next = env.step(s, a, rng);
      buffer.push({s, a, next});
      ++added;
      s = next;
    }
  }
  return added;
}

double buffer_covariance_error(const FBModel& model, const ReplayBuffer& buffer, RandomStream& rng,
                               std::size_t max_samples) {
  if (buffer.empty()) throw std::runtime_error("empty replay buffer");
  const Environment& env = model.env();
  const int d = model.dim();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  if (env.is_discrete()) {
    std::vector<double> counts(static_cast<std::size_t>(env.num_state_indices()), 0.0);
    for (std::size_t i = 0; i < buffer.size(); ++i) counts[static_cast<std::size_t>(buffer.at(i).s.index)] += 1.0;
    std::vector<State> states;
    std::vector<double> weights;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (counts[s] > 0.0) {
        states.push_back(State::discrete(static_cast<int>(s)));
        weights.push_back(counts[s] / static_cast<double>(buffer.size()));
      }
    }
    const Eigen::MatrixXd b = model.backward_goals(states);
    const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
    cov = b * w.asDiagonal() * b.transpose();
  } else {
    std::vector<State> states;
    if (buffer.size() <= max_samples) {
      for (std::size_t i = 0; i < buffer.size(); ++i) states.push_back(buffer.at(i).s);
    } else {
      for (std::size_t i : buffer.sample_indices(max_samples, rng)) states.push_back(buffer.at(i).s);
    }
    const Eigen::MatrixXd b = model.backward_goals(states);
    cov = b * b.transpose() / static_cast<double>(states.size());
  }
  return (cov - Eigen::MatrixXd::Identity(d, d)).norm();
}

Trainer::Trainer(const Hyperparams& hp)
    : hp_(hp),
      env_(make_environment(hp.env, hp.env_parameter)),
      model_(std::make_shared<FBModel>(env_, Architecture{hp.d, hp.hidden})),
      buffer_(hp.buffer_capacity),
      root_(hp.seed),
      collect_rng_(root_.split(kCollect)),
      batch_rng_(root_.split(kBatch)) {
  hp_.validate();
  RandomStream init = root_.split(kInit);
  model_->initialize(init);
  AdamConfig adam;
  adam.learning_rate = hp_.learning_rate;
  adam_f_ = AdamState<float>::for_parameters(model_->f_net().parameters(), adam);
  adam_b_ = AdamState<float>::for_parameters(model_->b_net().parameters(), adam);

  if (hp_.eval_goals > 0) {
    RandomStream goal_rng = root_.split(kEvalGoals);
    eval_goals_ = sample_goals(*env_, hp_.eval_goals, goal_rng);
    if (env_->is_discrete()) {
      const EnvDynamics dyn = env_->exact_dynamics();
      for (const State& g : eval_goals_) {
        optimal_values_.push_back(value_iteration(dyn, goal_reward(dyn, g.index), hp_.gamma).v);
      }
    }
  }
}

std::size_t Trainer::collect() { return collect_episodes(*env_, *model_, hp_, buffer_, collect_rng_); }

LossResult<float> Trainer::update() {
  const auto b = static_cast<std::size_t>(hp_.batch_size);
  TrainingBatch batch;
  batch.transitions = buffer_.sample_transitions(b, batch_rng_);
  batch.targets = buffer_.sample_targets(b, batch_rng_);
  batch.zs.resize(hp_.d, static_cast<Eigen::Index>(b));
  for (std::size_t i = 0; i < b; ++i) batch.zs.col(static_cast<Eigen::Index>(i)) = sample_z(hp_.d, batch_rng_);

  LossOptions options;
  options.gamma = hp_.gamma;
  options.temperature = hp_.temperature;
  options.lambda_reg = hp_.lambda_reg;
  LossResult<float> result = fb_update_gradients(*model_, batch, options);

  auto context = [&] {
    return " at epoch " + std::to_string(epoch_) + ", cycle " + std::to_string(cycle_);
  };
  if (!std::isfinite(result.fb_loss) || std::abs(result.fb_loss) > kDivergenceBound ||
      !std::isfinite(result.reg_loss) || std::abs(result.reg_loss) > kDivergenceBound) {
    std::ostringstream msg;
    msg << "training diverged" << context() << ": fb_loss=" << result.fb_loss << " reg_loss=" << result.reg_loss;
    throw DivergenceError(msg.str(), epoch_, cycle_);
  }
  try {
    adam_step(model_->f_net().parameters(), result.f_grad, adam_f_);
    adam_step(model_->b_net().parameters(), result.b_grad, adam_b_);
  } catch (const std::domain_error& e) {
    throw DivergenceError(std::string(e.what()) + context(), epoch_, cycle_);
  }
  ++updates_;
  return result;
}

void Trainer::update_targets() {
  polyak_update(model_->f_target(), model_->f_net(), hp_.polyak);
  polyak_update(model_->b_target(), model_->b_net(), hp_.polyak);
}

double Trainer::evaluate() {
  if (eval_goals_.empty()) return std::numeric_limits<double>::quiet_NaN();
  RandomStream rng = root_.split(kEval).split(static_cast<std::uint64_t>(epoch_));
  double total = 0.0;
  if (env_->is_discrete()) {
    const EnvDynamics dyn = env_->exact_dynamics();
    for (std::size_t i = 0; i < eval_goals_.size(); ++i) {
      const int g = eval_goals_[i].index;
      const TaskVector z = model_->backward_goal(eval_goals_[i]);
      total += policy_quality(dyn, tabular_policy(*model_, *env_, z, hp_.eval_policy), g, hp_.gamma,
                              optimal_values_[i]);
    }
  } else {
    SuccessOptions options;
    options.horizon = hp_.eval_horizon;
    options.threshold = hp_.success_threshold;
    for (const State& g : eval_goals_) total += success_rate(*model_, *env_, g, hp_.eval_policy, options, rng);
  }
  return total / static_cast<double>(eval_goals_.size());
}

EpochRecord Trainer::run_epoch() {
  double fb_sum = 0.0;
  double reg_sum = 0.0;
  std::int64_t count = 0;
  for (cycle_ = 0; cycle_ < hp_.cycles_per_epoch; ++cycle_) {
    collect();
    for (int u = 0; u < hp_.updates_per_cycle; ++u) {
      const LossResult<float> r = update();
      fb_sum += r.fb_loss;
      reg_sum += r.reg_loss;
      ++count;
    }
    update_targets();
  }
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.fb_loss = count > 0 ? fb_sum / static_cast<double>(count) : 0.0;
  rec.reg_loss = count > 0 ? reg_sum / static_cast<double>(count) : 0.0;
  RandomStream cov_rng = root_.split(kCov).split(static_cast<std::uint64_t>(epoch_));
  rec.cov_b_error = buffer_.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : buffer_covariance_error(*model_, buffer_, cov_rng);
  rec.eval_score = evaluate();
  ++epoch_;
  return rec;
}

TrainReport Trainer::run(const EpochCallback& callback) {
  TrainReport report;
  while (epoch_ < hp_.epochs) {
    report.epochs.push_back(run_epoch());
    if (callback) callback(report.epochs.back(), *model_);
  }
  report.transitions = buffer_.size();
  report.updates = updates_;
  return report;
}

TrainResult train(const Hyperparams& hp, const EpochCallback& callback) {
  hp.validate();
  Trainer trainer(hp);
  TrainReport report = trainer.run(callback);
  return {trainer.model_ptr(), std::move(report)};
}

}  // namespace fb
