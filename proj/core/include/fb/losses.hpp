#pragma once

#include <vector>

#include "fb/dense_net.hpp"
#include "fb/fb_model.hpp"
#include "fb/replay.hpp"

namespace fb {

/// The three independent mini-batches of one update: transitions (s_i, a_i,
/// s_{i+1}), target pairs (s'_j, a'_j) and raw task vectors z_i (d x b).
struct TrainingBatch {
  std::vector<Transition> transitions;
  std::vector<StateAction> targets;
  Eigen::MatrixXd zs;
};

struct LossOptions {
  double gamma = 0.99;
  /// Temperature of the softmax policy over target-network Q values.
  double temperature = 200.0;
  /// Weight of the orthonormality regularizer in B's objective.
  double lambda_reg = 1.0;
};

/// Gradients of the FB loss with respect to the network outputs.
template <typename Scalar>
struct FBLossTerms {
  double loss = 0.0;
  MatrixX<Scalar> grad_f;         // d x b, w.r.t. F(s_i, a_i, z_i)
  MatrixX<Scalar> grad_b_target;  // d x b, w.r.t. B(s'_j, a'_j)
  MatrixX<Scalar> grad_b_diag;    // d x b, w.r.t. B(s_i, a_i)
};

/// The FB temporal-difference loss on precomputed outputs (all d x b):
///
///   1/(2b^2) sum_ij (F_i.B_j - gamma T_i.Bbar_j)^2 - 1/b sum_i F_i.Bdiag_i
///
/// where T_i = sum_a pi(a|s_{i+1}) Fbar(s_{i+1}, a, z_i) and the barred
/// (target-network) terms carry no gradient.
template <typename Scalar>
FBLossTerms<Scalar> fb_loss_from_outputs(const MatrixX<Scalar>& f, const MatrixX<Scalar>& b_target,
                                         const MatrixX<Scalar>& next_f_mix,
                                         const MatrixX<Scalar>& b_target_bar,
                                         const MatrixX<Scalar>& b_diag, double gamma);

template <typename Scalar>
struct RegLossTerms {
  double loss = 0.0;
  MatrixX<Scalar> grad_b;  // d x b, w.r.t. B(s_i, a_i) only
};

/// Orthonormality regularizer with its stop-gradients applied:
///
///   1/b^2 sum_ij B_i.SG(B'_j) SG(B_i.B'_j) - 1/b sum_i B_i.SG(B_i)
///
/// Its gradient is an unbiased estimate of 1/4 d|E[B B^T] - I|^2.
template <typename Scalar>
RegLossTerms<Scalar> ortho_reg_from_outputs(const MatrixX<Scalar>& b_source,
                                            const MatrixX<Scalar>& b_target);

template <typename Scalar>
struct LossResult {
  double fb_loss = 0.0;
  double reg_loss = 0.0;
  /// d/dtheta of the FB loss.
  NetParameters<Scalar> f_grad;
  /// d/domega of FB loss + lambda_reg * regularizer.
  NetParameters<Scalar> b_grad;
};

/// FB loss and regularizer in one pass over the networks, as used by a
/// training step. Throws std::invalid_argument if the three batches differ in size.
template <typename Scalar>
LossResult<Scalar> fb_update_gradients(const BasicFBModel<Scalar>& model, const TrainingBatch& batch,
                                       const LossOptions& options);

/// FB loss alone (lambda_reg ignored, reg_loss left at 0).
template <typename Scalar>
LossResult<Scalar> fb_loss(const BasicFBModel<Scalar>& model, const TrainingBatch& batch,
                           const LossOptions& options);

/// Regularizer alone; f_grad is zero.
template <typename Scalar>
LossResult<Scalar> ortho_reg_loss(const BasicFBModel<Scalar>& model,
                                  const std::vector<Transition>& transitions,
                                  const std::vector<StateAction>& targets);

/// |Cov_hat(B) - I|_F for a d x n batch of B outputs, Cov_hat = B B^T / n.
double covariance_error(const Eigen::MatrixXd& b_outputs);

}  // namespace fb
