#include "fb/tabular_td.hpp"

#include <stdexcept>
#include <vector>

namespace fb {

namespace {

int sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& p, RandomStream& rng) {
  double u = rng.uniform() * p.sum();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    u -= p(i);
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

Eigen::VectorXd random_simplex(int n, RandomStream& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = 0.2 + rng.uniform();
  return v / v.sum();
}

}  // namespace

TabularMDP random_tabular_mdp(int num_states, int num_actions, RandomStream& rng) {
  if (num_states < 1 || num_actions < 1) throw std::invalid_argument("MDP needs states and actions");
  TabularMDP mdp;
  auto& dyn = mdp.dynamics;
  dyn.num_states = num_states;
  dyn.num_actions = num_actions;
  dyn.kernel.resize(num_states * num_actions, num_states);
  for (int sa = 0; sa < num_states * num_actions; ++sa) dyn.kernel.row(sa) = random_simplex(num_states, rng).transpose();
  for (int s = 0; s < num_states; ++s) dyn.valid_states.push_back(s);
  mdp.policy.probs.resize(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) mdp.policy.probs.row(s) = random_simplex(num_actions, rng).transpose();
  mdp.rho = random_simplex(num_states * num_actions, rng);
  return mdp;
}

Eigen::MatrixXd train_tabular_td(const TabularMDP& mdp, const TabularTDConfig& config, RandomStream& rng) {
  const auto& dyn = mdp.dynamics;
  const int n = dyn.num_states * dyn.num_actions;
  if (mdp.rho.size() != n) throw std::invalid_argument("rho must cover every state-action pair");
  if (config.batch_size < 1 || config.updates < 0) throw std::invalid_argument("bad tabular TD config");
  const int b = config.batch_size;
  const double g = config.gamma;
  const double step_diag = config.learning_rate / b;
  const double step_pair = config.learning_rate / (static_cast<double>(b) * b);

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd delta(n, n);
  Eigen::RowVectorXd target_counts(n);
  std::vector<int> x(static_cast<std::size_t>(b));
  std::vector<int> x1(static_cast<std::size_t>(b));
  for (int step = 0; step < config.updates; ++step) {
    for (int i = 0; i < b; ++i) {
      const int sa = sample_categorical(mdp.rho, rng);
      const int s1 = sample_categorical(dyn.kernel.row(sa).transpose(), rng);
      const int a1 = sample_categorical(mdp.policy.probs.row(s1).transpose(), rng);
      x[static_cast<std::size_t>(i)] = sa;
      x1[static_cast<std::size_t>(i)] = s1 * dyn.num_actions + a1;
    }
    target_counts.setZero();
    for (int j = 0; j < b; ++j) target_counts(sample_categorical(mdp.rho, rng)) += 1.0;

    delta.setZero();
    for (int i = 0; i < b; ++i) {
      const int xi = x[static_cast<std::size_t>(i)];
      delta(xi, xi) += step_diag;
      delta.row(xi) += step_pair * (g * m.row(x1[static_cast<std::size_t>(i)]) - m.row(xi)).cwiseProduct(target_counts);
    }
    m += delta;
  }
  return m;
}

Eigen::MatrixXd successor_density(const SuccessorMeasure& sm, const Eigen::VectorXd& rho) {
  if (rho.size() != sm.M.cols()) throw std::invalid_argument("rho must cover every state-action pair");
  return sm.M * rho.cwiseInverse().asDiagonal();
}

}  // namespace fb
