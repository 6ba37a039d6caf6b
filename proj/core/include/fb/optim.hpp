#pragma once

#include <cstdint>

#include "fb/dense_net.hpp"

namespace fb {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  NetParameters<Scalar> first_moment;
  NetParameters<Scalar> second_moment;
  std::int64_t step = 0;

  static AdamState for_parameters(const NetParameters<Scalar>& params, AdamConfig config) {
    return AdamState{config, zeros_like(params), zeros_like(params), 0};
  }
};

/// One bias-corrected Adam step, in place. Throws std::domain_error
/// ("non-finite gradient") before touching any state if `grads` has a NaN or inf.
template <typename Scalar>
void adam_step(NetParameters<Scalar>& params, const NetParameters<Scalar>& grads,
               AdamState<Scalar>& state);

/// target <- alpha * target + (1 - alpha) * source, elementwise.
template <typename Scalar>
void polyak_update(DenseNet<Scalar>& target, const DenseNet<Scalar>& source, double alpha);

}  // namespace fb
