#include "fb/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace fb {

PolicySpec PolicySpec::boltzmann(double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("boltzmann temperature must be positive");
  return {Kind::boltzmann, tau, 0.0};
}

PolicySpec PolicySpec::epsilon_greedy(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  return {Kind::epsilon_greedy, 1.0, eps};
}

int greedy_action(const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (q.size() == 0) throw std::invalid_argument("greedy_action: no actions");
  int best = 0;
  for (int a = 1; a < q.size(); ++a) {
    if (q(a) > q(best)) best = a;
  }
  return best;
}

Eigen::VectorXd action_probabilities(const Eigen::Ref<const Eigen::VectorXd>& q,
                                     const PolicySpec& spec) {
  const auto n = q.size();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  switch (spec.kind) {
    case PolicySpec::Kind::greedy:
      p(greedy_action(q)) = 1.0;
      break;
    case PolicySpec::Kind::boltzmann: {
      const double m = q.maxCoeff();
      p = ((q.array() - m) / spec.temperature).exp().matrix();
      p /= p.sum();
      break;
    }
    case PolicySpec::Kind::epsilon_greedy:
      p.setConstant(spec.epsilon / static_cast<double>(n));
      p(greedy_action(q)) += 1.0 - spec.epsilon;
      break;
  }
  return p;
}

int sample_action(const Eigen::Ref<const Eigen::VectorXd>& q, const PolicySpec& spec,
                  RandomStream& rng) {
  const auto n = static_cast<int>(q.size());
  switch (spec.kind) {
    case PolicySpec::Kind::greedy:
      return greedy_action(q);
    case PolicySpec::Kind::epsilon_greedy:
      if (rng.uniform() < spec.epsilon) {
        return static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      }
      return greedy_action(q);
    case PolicySpec::Kind::boltzmann: {
      const Eigen::VectorXd p = action_probabilities(q, spec);
      const double u = rng.uniform();
      double acc = 0.0;
      for (int a = 0; a < n; ++a) {
        acc += p(a);
        if (u < acc) return a;
      }
      return n - 1;
    }
  }
  return 0;
}

int act(const Representation& rep, const State& s, const TaskVector& z, const PolicySpec& spec,
        RandomStream& rng) {
  const Eigen::VectorXd q = rep.forward(s, z).transpose() * z;
  return sample_action(q, spec, rng);
}

}  // namespace fb
