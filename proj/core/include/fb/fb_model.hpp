#pragma once

#include <memory>
#include <vector>

#include "fb/dense_net.hpp"
#include "fb/env.hpp"
#include "fb/representation.hpp"
#include "fb/rng.hpp"

namespace fb {

/// Draws z from the training prior: x ~ N(0, I_d), u ~ Cauchy(0, 0.5),
/// z = sqrt(d) * u * x / |x|.
TaskVector sample_z(int d, RandomStream& rng);
/// The same construction from explicit draws. Throws std::invalid_argument if |x| is 0.
TaskVector make_z(const Eigen::VectorXd& direction, double u);

/// z / sqrt(1 + |z|^2 / d): maps R^d into the open ball of radius sqrt(d).
template <typename Derived>
auto preprocess_z(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const Scalar d = static_cast<Scalar>(z.size());
  return (z / std::sqrt(Scalar(1) + z.squaredNorm() / d)).eval();
}

/// Column-wise preprocess_z for a d x n batch.
template <typename Scalar>
MatrixX<Scalar> preprocess_z_batch(const MatrixX<Scalar>& z) {
  const Scalar d = static_cast<Scalar>(z.rows());
  const auto scale =
      ((Scalar(1) + z.colwise().squaredNorm().array() / d).sqrt()).inverse().matrix().eval();
  return z * scale.asDiagonal();
}

struct Architecture {
  int d = 100;
  std::vector<int> hidden{256, 256, 256};
};

/// Learned forward and backward networks with their Polyak target copies.
///
/// f_net maps featurize(s) ++ preprocess_z(z) to |A| * d outputs; block a
/// (rows a*d .. a*d+d-1) is F(s, a, z). b_net maps the goal features phi(s) to d.
template <typename Scalar>
class BasicFBModel final : public Representation {
 public:
  using Matrix = MatrixX<Scalar>;

  BasicFBModel(std::shared_ptr<const Environment> env, Architecture arch);

  /// Random online weights; targets copied from them.
  void initialize(RandomStream& rng);

  [[nodiscard]] const Environment& env() const { return *env_; }
  [[nodiscard]] const std::shared_ptr<const Environment>& env_ptr() const { return env_; }
  [[nodiscard]] const Architecture& architecture() const { return arch_; }
  [[nodiscard]] int dim() const override { return arch_.d; }
  [[nodiscard]] int num_actions() const override { return env_->num_actions(); }

  DenseNet<Scalar>& f_net() { return f_net_; }
  DenseNet<Scalar>& b_net() { return b_net_; }
  DenseNet<Scalar>& f_target() { return f_target_; }
  DenseNet<Scalar>& b_target() { return b_target_; }
  [[nodiscard]] const DenseNet<Scalar>& f_net() const { return f_net_; }
  [[nodiscard]] const DenseNet<Scalar>& b_net() const { return b_net_; }
  [[nodiscard]] const DenseNet<Scalar>& f_target() const { return f_target_; }
  [[nodiscard]] const DenseNet<Scalar>& b_target() const { return b_target_; }

  /// [features; preprocess_z(raw_z)] for a batch.
  [[nodiscard]] Matrix f_input(const Matrix& state_features, const Matrix& raw_z) const;
  /// (|A| * d) x n outputs of the online (or target) forward net.
  [[nodiscard]] Matrix forward_F_all(const Matrix& state_features, const Matrix& raw_z,
                                     bool use_target = false) const;
  [[nodiscard]] Matrix forward_B_batch(const Matrix& goal_features, bool use_target = false) const;

  [[nodiscard]] Eigen::VectorXd backward(const State& s, int a) const override;
  [[nodiscard]] Eigen::VectorXd backward_goal(const State& g) const override;
  [[nodiscard]] Eigen::MatrixXd backward_goals(const std::vector<State>& goals) const override;
  [[nodiscard]] Eigen::MatrixXd backward_pairs(const std::vector<State>& states,
                                               const std::vector<int>& actions) const override;
  [[nodiscard]] Eigen::MatrixXd forward(const State& s, const TaskVector& z) const override;
  [[nodiscard]] Eigen::MatrixXd q_values(const std::vector<State>& states,
                                         const TaskVector& z) const override;

  template <typename Other>
  [[nodiscard]] BasicFBModel<Other> cast() const {
    BasicFBModel<Other> out(env_, arch_);
    out.f_net() = f_net_.template cast<Other>();
    out.b_net() = b_net_.template cast<Other>();
    out.f_target() = f_target_.template cast<Other>();
    out.b_target() = b_target_.template cast<Other>();
    return out;
  }

 private:
  std::shared_ptr<const Environment> env_;
  Architecture arch_;
  DenseNet<Scalar> f_net_;
  DenseNet<Scalar> b_net_;
  DenseNet<Scalar> f_target_;
  DenseNet<Scalar> b_target_;
};

using FBModel = BasicFBModel<float>;

extern template class BasicFBModel<float>;
extern template class BasicFBModel<double>;

}  // namespace fb
