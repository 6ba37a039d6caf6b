#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "fb/rng.hpp"

namespace fb {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;    // out
};

/// Parameters of a DenseNet, layer by layer. Gradients use the same shape.
template <typename Scalar>
using NetParameters = std::vector<DenseLayer<Scalar>>;

/// Fully connected network: affine layers with ReLU between them and an
/// identity output. Batches are column-major: one sample per column.
template <typename Scalar>
class DenseNet {
 public:
  using Matrix = MatrixX<Scalar>;

  /// Activations kept by forward() for a later backward(). activations[0] is
  /// the input; activations[l] is the (post-ReLU for hidden layers) output of layer l.
  struct Cache {
    std::vector<Matrix> activations;
  };

  DenseNet() = default;
  /// layer_sizes = {input, hidden..., output}; at least two entries, all positive.
  explicit DenseNet(std::vector<int> layer_sizes);

  [[nodiscard]] const std::vector<int>& layer_sizes() const { return sizes_; }
  [[nodiscard]] int input_size() const { return sizes_.front(); }
  [[nodiscard]] int output_size() const { return sizes_.back(); }
  [[nodiscard]] std::size_t num_parameters() const;

  [[nodiscard]] NetParameters<Scalar>& parameters() { return layers_; }
  [[nodiscard]] const NetParameters<Scalar>& parameters() const { return layers_; }

  /// Kaiming-uniform fan-in init: U(+-sqrt(6 / fan_in)) before a ReLU,
  /// U(+-sqrt(3 / fan_in)) on the linear output layer; zero biases.
  void init_kaiming_uniform(RandomStream& rng);
  void set_zero();

  /// Throws std::invalid_argument when input.rows() != input_size().
  [[nodiscard]] Matrix forward(const Eigen::Ref<const Matrix>& input) const;
  Matrix forward(const Eigen::Ref<const Matrix>& input, Cache& cache) const;

  /// Reverse-mode gradient of <output, cotangent> summed over the batch.
  /// Accumulates into `grads` (which must have this net's shapes, see
  /// zero_gradient()); writes the input gradient when `input_grad` is non-null.
  void backward(const Cache& cache, const Eigen::Ref<const Matrix>& output_cotangent,
                NetParameters<Scalar>& grads, Matrix* input_grad = nullptr) const;

  [[nodiscard]] NetParameters<Scalar> zero_gradient() const;
  [[nodiscard]] bool all_finite() const;

  /// Parameters in declaration order: per layer, weight row-major then bias.
  [[nodiscard]] std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& values);

  template <typename Other>
  [[nodiscard]] DenseNet<Other> cast() const {
    DenseNet<Other> out(sizes_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.parameters()[l].weight = layers_[l].weight.template cast<Other>();
      out.parameters()[l].bias = layers_[l].bias.template cast<Other>();
    }
    return out;
  }

 private:
  std::vector<int> sizes_;
  NetParameters<Scalar> layers_;
};

template <typename Scalar>
NetParameters<Scalar> zeros_like(const NetParameters<Scalar>& params);
template <typename Scalar>
void scale_add(NetParameters<Scalar>& acc, const NetParameters<Scalar>& other, Scalar factor);
template <typename Scalar>
double squared_norm(const NetParameters<Scalar>& params);
template <typename Scalar>
bool all_finite(const NetParameters<Scalar>& params);

extern template class DenseNet<float>;
extern template class DenseNet<double>;

}  // namespace fb
