#include "fb/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fb {

template <typename Scalar>
void adam_step(NetParameters<Scalar>& params, const NetParameters<Scalar>& grads,
               AdamState<Scalar>& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  if (!all_finite(grads)) throw std::domain_error("non-finite gradient");

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const auto b1 = static_cast<Scalar>(c.beta1);
  const auto b2 = static_cast<Scalar>(c.beta2);
  const auto correction1 = static_cast<Scalar>(1.0 - std::pow(c.beta1, t));
  const auto correction2 = static_cast<Scalar>(1.0 - std::pow(c.beta2, t));
  const auto lr = static_cast<Scalar>(c.learning_rate);
  const auto eps = static_cast<Scalar>(c.epsilon);

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    if (p.rows() != g.rows() || p.cols() != g.cols()) {
      throw std::invalid_argument("adam_step: shape mismatch");
    }
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weight, grads[l].weight, state.first_moment[l].weight,
           state.second_moment[l].weight);
    update(params[l].bias, grads[l].bias, state.first_moment[l].bias,
           state.second_moment[l].bias);
  }
}

template <typename Scalar>
void polyak_update(DenseNet<Scalar>& target, const DenseNet<Scalar>& source, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("polyak coefficient outside [0, 1]");
  if (target.layer_sizes() != source.layer_sizes()) {
    throw std::invalid_argument("polyak_update: shape mismatch");
  }
  if (alpha == 1.0) return;
  if (alpha == 0.0) {
    target.parameters() = source.parameters();
    return;
  }
  const auto a = static_cast<Scalar>(alpha);
  const auto one_minus = static_cast<Scalar>(1.0 - alpha);
  for (std::size_t l = 0; l < target.parameters().size(); ++l) {
    auto& t = target.parameters()[l];
    const auto& s = source.parameters()[l];
    t.weight = a * t.weight + one_minus * s.weight;
    t.bias = a * t.bias + one_minus * s.bias;
  }
}

template void adam_step(NetParameters<float>&, const NetParameters<float>&, AdamState<float>&);
template void adam_step(NetParameters<double>&, const NetParameters<double>&, AdamState<double>&);
template void polyak_update(DenseNet<float>&, const DenseNet<float>&, double);
template void polyak_update(DenseNet<double>&, const DenseNet<double>&, double);

}  // namespace fb
