#include "fb/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace fb {

namespace {

/// Distinct goal states of a batch. Discrete states are merged by index so
/// B runs once per cell; continuous states are kept as they are.
/// Target states come first so the target network only sees that prefix.
struct GoalSet {
  std::vector<State> states;
  std::vector<Eigen::Index> target_col;
  std::vector<Eigen::Index> source_col;
  Eigen::Index num_target = 0;
};

GoalSet collect_goals(const Environment& env, const std::vector<Transition>& transitions,
                      const std::vector<StateAction>& targets) {
  GoalSet g;
  std::unordered_map<int, Eigen::Index> seen;
  auto add = [&](const State& s) -> Eigen::Index {
    if (env.is_discrete()) {
      auto [it, inserted] = seen.try_emplace(s.index, static_cast<Eigen::Index>(g.states.size()));
      if (inserted) g.states.push_back(s);
      return it->second;
    }
    g.states.push_back(s);
    return static_cast<Eigen::Index>(g.states.size()) - 1;
  };
  g.target_col.reserve(targets.size());
  for (const auto& t : targets) g.target_col.push_back(add(t.s));
  g.num_target = static_cast<Eigen::Index>(g.states.size());
  g.source_col.reserve(transitions.size());
  for (const auto& t : transitions) g.source_col.push_back(add(t.s));
  return g;
}

template <typename Scalar>
MatrixX<Scalar> gather(const MatrixX<Scalar>& m, const std::vector<Eigen::Index>& cols) {
  MatrixX<Scalar> out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

template <typename Scalar>
void scatter_add(MatrixX<Scalar>& m, const MatrixX<Scalar>& src, const std::vector<Eigen::Index>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) m.col(cols[i]) += src.col(static_cast<Eigen::Index>(i));
}

std::vector<State> source_states(const std::vector<Transition>& ts) {
  std::vector<State> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(t.s);
  return out;
}

std::vector<State> next_states(const std::vector<Transition>& ts) {
  std::vector<State> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(t.s_next);
  return out;
}

template <typename Scalar>
LossResult<Scalar> run(const BasicFBModel<Scalar>& model, const TrainingBatch& batch,
                       const LossOptions& options, bool with_fb, bool with_reg) {
  using Matrix = MatrixX<Scalar>;
  const auto& env = model.env();
  const std::size_t n = batch.transitions.size();
  if (n == 0) throw std::invalid_argument("empty training batch");
  if (batch.targets.size() != n || (with_fb && static_cast<std::size_t>(batch.zs.cols()) != n)) {
    throw std::invalid_argument("batch size mismatch");
  }
  if (with_fb && batch.zs.rows() != model.dim()) {
    throw std::invalid_argument("task vector batch has wrong dimension");
  }
  if (!(options.temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");

  const int d = model.dim();
  const auto b = static_cast<Eigen::Index>(n);
  LossResult<Scalar> result;
  result.f_grad = model.f_net().zero_gradient();
  result.b_grad = model.b_net().zero_gradient();

  const GoalSet goals = collect_goals(env, batch.transitions, batch.targets);
  typename DenseNet<Scalar>::Cache b_cache;
  const Matrix goal_feats = featurize_batch<Scalar>(env, goals.states);
  const Matrix b_all = model.b_net().forward(goal_feats, b_cache);
  const Matrix b_tgt = gather(b_all, goals.target_col);
  const Matrix b_src = gather(b_all, goals.source_col);
  Matrix b_cot = Matrix::Zero(d, b_all.cols());

  if (with_fb) {
    const Matrix z = batch.zs.cast<Scalar>();
    typename DenseNet<Scalar>::Cache f_cache;
    const Matrix f_in = model.f_input(featurize_batch<Scalar>(env, source_states(batch.transitions)), z);
    const Matrix f_all = model.f_net().forward(f_in, f_cache);
    Matrix f_sel(d, b);
    for (Eigen::Index i = 0; i < b; ++i) {
      f_sel.col(i) = f_all.block(batch.transitions[static_cast<std::size_t>(i)].a * d, i, d, 1);
    }

    // Next-state mixture under the softmax policy of the target network.
    const Matrix f_next =
        model.forward_F_all(featurize_batch<Scalar>(env, next_states(batch.transitions)), z, true);
    const int num_a = model.num_actions();
    Matrix mix = Matrix::Zero(d, b);
    Eigen::VectorXd logits(num_a);
    for (Eigen::Index i = 0; i < b; ++i) {
      for (int a = 0; a < num_a; ++a) {
        logits(a) = static_cast<double>(f_next.block(a * d, i, d, 1).col(0).dot(z.col(i))) /
                    options.temperature;
      }
      const Eigen::VectorXd w = (logits.array() - logits.maxCoeff()).exp().matrix();
      const Eigen::VectorXd pi = w / w.sum();
      for (int a = 0; a < num_a; ++a) {
        mix.col(i) += static_cast<Scalar>(pi(a)) * f_next.block(a * d, i, d, 1);
      }
    }

    const Matrix b_tgt_bar = model.b_target().forward(goal_feats.leftCols(goals.num_target));
    const FBLossTerms<Scalar> terms =
        fb_loss_from_outputs<Scalar>(f_sel, b_tgt, mix, gather(b_tgt_bar, goals.target_col), b_src,
                                     options.gamma);
    result.fb_loss = terms.loss;

    Matrix f_cot = Matrix::Zero(f_all.rows(), b);
    for (Eigen::Index i = 0; i < b; ++i) {
      f_cot.block(batch.transitions[static_cast<std::size_t>(i)].a * d, i, d, 1) = terms.grad_f.col(i);
    }
    model.f_net().backward(f_cache, f_cot, result.f_grad);
    scatter_add(b_cot, terms.grad_b_target, goals.target_col);
    scatter_add(b_cot, terms.grad_b_diag, goals.source_col);
  }

  if (with_reg) {
    const RegLossTerms<Scalar> reg = ortho_reg_from_outputs<Scalar>(b_src, b_tgt);
    result.reg_loss = reg.loss;
    const double weight = with_fb ? options.lambda_reg : 1.0;
    if (weight != 0.0) {
      scatter_add<Scalar>(b_cot, static_cast<Scalar>(weight) * reg.grad_b, goals.source_col);
    }
  }

  model.b_net().backward(b_cache, b_cot, result.b_grad);
  return result;
}

}  // namespace

template <typename Scalar>
FBLossTerms<Scalar> fb_loss_from_outputs(const MatrixX<Scalar>& f, const MatrixX<Scalar>& b_target,
                                         const MatrixX<Scalar>& next_f_mix,
                                         const MatrixX<Scalar>& b_target_bar,
                                         const MatrixX<Scalar>& b_diag, double gamma) {
  const auto b = f.cols();
  if (b == 0 || b_target.cols() != b || next_f_mix.cols() != b || b_target_bar.cols() != b ||
      b_diag.cols() != b) {
    throw std::invalid_argument("batch size mismatch");
  }
  const auto d = f.rows();
  if (b_target.rows() != d || next_f_mix.rows() != d || b_target_bar.rows() != d || b_diag.rows() != d) {
    throw std::invalid_argument("representation dimension mismatch");
  }
  const Scalar g = static_cast<Scalar>(gamma);
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(b);
  const Scalar inv_b2 = inv_b * inv_b;

  const MatrixX<Scalar> r = f.transpose() * b_target - g * (next_f_mix.transpose() * b_target_bar);
  FBLossTerms<Scalar> out;
  const double diag = (f.cwiseProduct(b_diag)).template cast<double>().sum();
  out.loss = 0.5 * r.template cast<double>().squaredNorm() / static_cast<double>(b * b) -
             diag / static_cast<double>(b);
  out.grad_f = inv_b2 * (b_target * r.transpose()) - inv_b * b_diag;
  out.grad_b_target = inv_b2 * (f * r);
  out.grad_b_diag = -inv_b * f;
  return out;
}

template <typename Scalar>
RegLossTerms<Scalar> ortho_reg_from_outputs(const MatrixX<Scalar>& b_source,
                                            const MatrixX<Scalar>& b_target) {
  const auto b = b_source.cols();
  if (b == 0 || b_target.cols() != b) throw std::invalid_argument("batch size mismatch");
  if (b_target.rows() != b_source.rows()) throw std::invalid_argument("representation dimension mismatch");
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(b);
  const MatrixX<Scalar> p = b_source.transpose() * b_target;
  RegLossTerms<Scalar> out;
  out.loss = p.template cast<double>().squaredNorm() / static_cast<double>(b * b) -
             b_source.template cast<double>().squaredNorm() / static_cast<double>(b);
  out.grad_b = inv_b * inv_b * (b_target * p.transpose()) - inv_b * b_source;
  return out;
}

template <typename Scalar>
LossResult<Scalar> fb_update_gradients(const BasicFBModel<Scalar>& model, const TrainingBatch& batch,
                                       const LossOptions& options) {
  return run(model, batch, options, true, true);
}

template <typename Scalar>
LossResult<Scalar> fb_loss(const BasicFBModel<Scalar>& model, const TrainingBatch& batch,
                           const LossOptions& options) {
  return run(model, batch, options, true, false);
}

template <typename Scalar>
LossResult<Scalar> ortho_reg_loss(const BasicFBModel<Scalar>& model,
                                  const std::vector<Transition>& transitions,
                                  const std::vector<StateAction>& targets) {
  TrainingBatch batch{transitions, targets, Eigen::MatrixXd()};
  return run(model, batch, LossOptions{}, false, true);
}

double covariance_error(const Eigen::MatrixXd& b_outputs) {
  if (b_outputs.cols() == 0) throw std::invalid_argument("empty batch");
  const Eigen::MatrixXd cov = b_outputs * b_outputs.transpose() / static_cast<double>(b_outputs.cols());
  return (cov - Eigen::MatrixXd::Identity(cov.rows(), cov.cols())).norm();
}

#define FB_INSTANTIATE_LOSSES(S)                                                                  \
  template FBLossTerms<S> fb_loss_from_outputs<S>(const MatrixX<S>&, const MatrixX<S>&,           \
                                                  const MatrixX<S>&, const MatrixX<S>&,           \
                                                  const MatrixX<S>&, double);                     \
  template RegLossTerms<S> ortho_reg_from_outputs<S>(const MatrixX<S>&, const MatrixX<S>&);       \
  template LossResult<S> fb_update_gradients<S>(const BasicFBModel<S>&, const TrainingBatch&,     \
                                                const LossOptions&);                              \
  template LossResult<S> fb_loss<S>(const BasicFBModel<S>&, const TrainingBatch&, const LossOptions&); \
  template LossResult<S> ortho_reg_loss<S>(const BasicFBModel<S>&, const std::vector<Transition>&, \
                                           const std::vector<StateAction>&);

FB_INSTANTIATE_LOSSES(float)
FB_INSTANTIATE_LOSSES(double)

}  // namespace fb
