#include "fb/fb_model.hpp"

#include <cmath>
#include <stdexcept>

namespace fb {

// --- Representation defaults ------------------------------------------------

Eigen::VectorXd Representation::backward_goal(const State& g) const {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim());
  for (int a = 0; a < num_actions(); ++a) acc += backward(g, a);
  return acc / static_cast<double>(num_actions());
}

Eigen::MatrixXd Representation::backward_goals(const std::vector<State>& goals) const {
  Eigen::MatrixXd out(dim(), static_cast<Eigen::Index>(goals.size()));
  for (std::size_t i = 0; i < goals.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = backward_goal(goals[i]);
  }
  return out;
}

Eigen::MatrixXd Representation::backward_pairs(const std::vector<State>& states,
                                               const std::vector<int>& actions) const {
  if (states.size() != actions.size()) throw std::invalid_argument("states and actions differ in length");
  Eigen::MatrixXd out(dim(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = backward(states[i], actions[i]);
  }
  return out;
}

Eigen::MatrixXd Representation::q_values(const std::vector<State>& states,
                                         const TaskVector& z) const {
  Eigen::MatrixXd q(num_actions(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    q.col(static_cast<Eigen::Index>(i)) = forward(states[i], z).transpose() * z;
  }
  return q;
}

Eigen::VectorXd forward_F(const Representation& rep, const State& s, int a, const TaskVector& z) {
  if (a < 0 || a >= rep.num_actions()) throw std::out_of_range("action index");
  return rep.forward(s, z).col(a);
}

Eigen::VectorXd forward_B(const Representation& rep, const State& g) { return rep.backward_goal(g); }

double q_estimate(const Representation& rep, const State& s, int a, const TaskVector& z_r) {
  return forward_F(rep, s, a, z_r).dot(z_r);
}

// --- z prior ----------------------------------------------------------------

TaskVector make_z(const Eigen::VectorXd& direction, double u) {
  const double norm = direction.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("make_z: zero direction");
  const double d = static_cast<double>(direction.size());
  return std::sqrt(d) * u * direction / norm;
}

TaskVector sample_z(int d, RandomStream& rng) {
  if (d < 1) throw std::invalid_argument("sample_z: d must be >= 1");
  Eigen::VectorXd x(d);
  do {
    for (int i = 0; i < d; ++i) x(i) = rng.normal();
  } while (x.norm() < 1e-12);
  const double u = rng.cauchy(0.5);
  return make_z(x, u);
}

// --- BasicFBModel -----------------------------------------------------------

template <typename Scalar>
BasicFBModel<Scalar>::BasicFBModel(std::shared_ptr<const Environment> env, Architecture arch)
    : env_(std::move(env)), arch_(std::move(arch)) {
  if (!env_) throw std::invalid_argument("FB model needs an environment");
  if (arch_.d < 1) throw std::invalid_argument("representation dimension must be >= 1");
  std::vector<int> f_sizes{env_->feature_dim() + arch_.d};
  std::vector<int> b_sizes{env_->goal_dim()};
  for (int h : arch_.hidden) {
    f_sizes.push_back(h);
    b_sizes.push_back(h);
  }
  f_sizes.push_back(env_->num_actions() * arch_.d);
  b_sizes.push_back(arch_.d);
  f_net_ = DenseNet<Scalar>(f_sizes);
  b_net_ = DenseNet<Scalar>(b_sizes);
  f_target_ = f_net_;
  b_target_ = b_net_;
}

template <typename Scalar>
void BasicFBModel<Scalar>::initialize(RandomStream& rng) {
  RandomStream f_rng = rng.split(0xF);
  RandomStream b_rng = rng.split(0xB);
  f_net_.init_kaiming_uniform(f_rng);
  b_net_.init_kaiming_uniform(b_rng);
  f_target_ = f_net_;
  b_target_ = b_net_;
}

template <typename Scalar>
typename BasicFBModel<Scalar>::Matrix BasicFBModel<Scalar>::f_input(const Matrix& state_features,
                                                                   const Matrix& raw_z) const {
  if (state_features.cols() != raw_z.cols() || raw_z.rows() != arch_.d ||
      state_features.rows() != env_->feature_dim()) {
    throw std::invalid_argument("F input: batch shape mismatch");
  }
  Matrix in(state_features.rows() + raw_z.rows(), state_features.cols());
  in.topRows(state_features.rows()) = state_features;
  in.bottomRows(raw_z.rows()) = preprocess_z_batch<Scalar>(raw_z);
  return in;
}

template <typename Scalar>
typename BasicFBModel<Scalar>::Matrix BasicFBModel<Scalar>::forward_F_all(
    const Matrix& state_features, const Matrix& raw_z, bool use_target) const {
  const Matrix in = f_input(state_features, raw_z);
  return use_target ? f_target_.forward(in) : f_net_.forward(in);
}

template <typename Scalar>
typename BasicFBModel<Scalar>::Matrix BasicFBModel<Scalar>::forward_B_batch(
    const Matrix& goal_features, bool use_target) const {
  return use_target ? b_target_.forward(goal_features) : b_net_.forward(goal_features);
}

template <typename Scalar>
Eigen::VectorXd BasicFBModel<Scalar>::backward(const State& s, int /*a*/) const {
  return backward_goal(s);
}

template <typename Scalar>
Eigen::VectorXd BasicFBModel<Scalar>::backward_goal(const State& g) const {
  const Matrix feats = env_->featurize(g).template cast<Scalar>();
  return b_net_.forward(feats).col(0).template cast<double>();
}

template <typename Scalar>
Eigen::MatrixXd BasicFBModel<Scalar>::backward_goals(const std::vector<State>& goals) const {
  if (goals.empty()) return Eigen::MatrixXd(arch_.d, 0);
  return b_net_.forward(featurize_batch<Scalar>(*env_, goals)).template cast<double>();
}

template <typename Scalar>
Eigen::MatrixXd BasicFBModel<Scalar>::backward_pairs(const std::vector<State>& states,
                                                     const std::vector<int>& actions) const {
  if (states.size() != actions.size()) throw std::invalid_argument("states and actions differ in length");
  return backward_goals(states);
}

template <typename Scalar>
Eigen::MatrixXd BasicFBModel<Scalar>::forward(const State& s, const TaskVector& z) const {
  if (z.size() != arch_.d) throw std::invalid_argument("task vector has wrong dimension");
  const Matrix feats = env_->featurize(s).template cast<Scalar>();
  const Matrix zz = z.cast<Scalar>();
  const Matrix out = forward_F_all(feats, zz);
  Eigen::MatrixXd result(arch_.d, num_actions());
  for (int a = 0; a < num_actions(); ++a) {
    result.col(a) = out.block(a * arch_.d, 0, arch_.d, 1).template cast<double>();
  }
  return result;
}

template <typename Scalar>
Eigen::MatrixXd BasicFBModel<Scalar>::q_values(const std::vector<State>& states,
                                               const TaskVector& z) const {
  if (z.size() != arch_.d) throw std::invalid_argument("task vector has wrong dimension");
  const auto n = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXd q(num_actions(), n);
  if (n == 0) return q;
  const Matrix feats = featurize_batch<Scalar>(*env_, states);
  const Matrix zz = z.cast<Scalar>().replicate(1, n);
  const Eigen::MatrixXd out = forward_F_all(feats, zz).template cast<double>();
  for (int a = 0; a < num_actions(); ++a) {
    q.row(a) = z.transpose() * out.middleRows(a * arch_.d, arch_.d);
  }
  return q;
}

template class BasicFBModel<float>;
template class BasicFBModel<double>;

}  // namespace fb
