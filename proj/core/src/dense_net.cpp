#include "fb/dense_net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fb {

template <typename Scalar>
DenseNet<Scalar>::DenseNet(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("dense net needs at least two layer sizes");
  for (int s : sizes_) {
    if (s <= 0) throw std::invalid_argument("dense net layer sizes must be positive");
  }
  layers_.resize(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    layers_[l].weight = Matrix::Zero(sizes_[l + 1], sizes_[l]);
    layers_[l].bias = VectorX<Scalar>::Zero(sizes_[l + 1]);
  }
}

template <typename Scalar>
std::size_t DenseNet<Scalar>::num_parameters() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return n;
}

template <typename Scalar>
void DenseNet<Scalar>::init_kaiming_uniform(RandomStream& rng) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const bool feeds_relu = l + 1 < layers_.size();
    const double fan_in = static_cast<double>(sizes_[l]);
    const double bound = std::sqrt((feeds_relu ? 6.0 : 3.0) / fan_in);
    auto& w = layers_[l].weight;
    // Row-major draw order so the stream consumption matches flatten().
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
    }
    layers_[l].bias.setZero();
  }
}

template <typename Scalar>
void DenseNet<Scalar>::set_zero() {
  for (auto& layer : layers_) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
}

template <typename Scalar>
typename DenseNet<Scalar>::Matrix DenseNet<Scalar>::forward(
    const Eigen::Ref<const Matrix>& input) const {
  if (input.rows() != input_size()) {
    throw std::invalid_argument("dense net input has " + std::to_string(input.rows()) +
                                " rows, expected " + std::to_string(input_size()));
  }
  Matrix act = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix next(layers_[l].weight.rows(), act.cols());
    next.noalias() = layers_[l].weight * act;
    next.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) next = next.cwiseMax(Scalar(0));
    act = std::move(next);
  }
  return act;
}

template <typename Scalar>
typename DenseNet<Scalar>::Matrix DenseNet<Scalar>::forward(const Eigen::Ref<const Matrix>& input,
                                                            Cache& cache) const {
  if (input.rows() != input_size()) {
    throw std::invalid_argument("dense net input has " + std::to_string(input.rows()) +
                                " rows, expected " + std::to_string(input_size()));
  }
  cache.activations.resize(layers_.size() + 1);
  cache.activations[0] = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix& next = cache.activations[l + 1];
    next.resize(layers_[l].weight.rows(), input.cols());
    next.noalias() = layers_[l].weight * cache.activations[l];
    next.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) next = next.cwiseMax(Scalar(0));
  }
  return cache.activations.back();
}

template <typename Scalar>
void DenseNet<Scalar>::backward(const Cache& cache, const Eigen::Ref<const Matrix>& output_cotangent,
                                NetParameters<Scalar>& grads, Matrix* input_grad) const {
  if (cache.activations.size() != layers_.size() + 1) {
    throw std::invalid_argument("dense net backward: cache does not match this network");
  }
  const Eigen::Index batch = cache.activations[0].cols();
  if (output_cotangent.rows() != output_size() || output_cotangent.cols() != batch) {
    throw std::invalid_argument("dense net backward: cotangent shape mismatch");
  }
  if (grads.size() != layers_.size()) {
    throw std::invalid_argument("dense net backward: gradient shape mismatch");
  }
  Matrix delta = output_cotangent;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Matrix& in = cache.activations[l];
    grads[l].weight.noalias() += delta * in.transpose();
    grads[l].bias += delta.rowwise().sum();
    if (l == 0 && input_grad == nullptr) break;
    Matrix prev(layers_[l].weight.cols(), batch);
    prev.noalias() = layers_[l].weight.transpose() * delta;
    if (l > 0) prev = (in.array() > Scalar(0)).select(prev, Scalar(0));
    delta = std::move(prev);
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
}

template <typename Scalar>
NetParameters<Scalar> DenseNet<Scalar>::zero_gradient() const {
  return zeros_like(layers_);
}

template <typename Scalar>
bool DenseNet<Scalar>::all_finite() const {
  return fb::all_finite(layers_);
}

template <typename Scalar>
std::vector<double> DenseNet<Scalar>::flatten() const {
  std::vector<double> out;
  out.reserve(num_parameters());
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        out.push_back(static_cast<double>(layer.weight(r, c)));
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      out.push_back(static_cast<double>(layer.bias(i)));
    }
  }
  return out;
}

template <typename Scalar>
void DenseNet<Scalar>::unflatten(const std::vector<double>& values) {
  if (values.size() != num_parameters()) {
    throw std::invalid_argument("dense net unflatten: expected " +
                                std::to_string(num_parameters()) + " values, got " +
                                std::to_string(values.size()));
  }
  std::size_t k = 0;
  for (auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = static_cast<Scalar>(values[k++]);
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      layer.bias(i) = static_cast<Scalar>(values[k++]);
    }
  }
}

template <typename Scalar>
NetParameters<Scalar> zeros_like(const NetParameters<Scalar>& params) {
  NetParameters<Scalar> out(params.size());
  for (std::size_t l = 0; l < params.size(); ++l) {
    out[l].weight = MatrixX<Scalar>::Zero(params[l].weight.rows(), params[l].weight.cols());
    out[l].bias = VectorX<Scalar>::Zero(params[l].bias.size());
  }
  return out;
}

template <typename Scalar>
void scale_add(NetParameters<Scalar>& acc, const NetParameters<Scalar>& other, Scalar factor) {
  if (acc.size() != other.size()) throw std::invalid_argument("scale_add: shape mismatch");
  for (std::size_t l = 0; l < acc.size(); ++l) {
    acc[l].weight += factor * other[l].weight;
    acc[l].bias += factor * other[l].bias;
  }
}

template <typename Scalar>
double squared_norm(const NetParameters<Scalar>& params) {
  double s = 0.0;
  for (const auto& layer : params) {
    s += static_cast<double>(layer.weight.squaredNorm()) + static_cast<double>(layer.bias.squaredNorm());
  }
  return s;
}

template <typename Scalar>
bool all_finite(const NetParameters<Scalar>& params) {
  for (const auto& layer : params) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

template class DenseNet<float>;
template class DenseNet<double>;
template NetParameters<float> zeros_like(const NetParameters<float>&);
template NetParameters<double> zeros_like(const NetParameters<double>&);
template void scale_add(NetParameters<float>&, const NetParameters<float>&, float);
template void scale_add(NetParameters<double>&, const NetParameters<double>&, double);
template double squared_norm(const NetParameters<float>&);
template double squared_norm(const NetParameters<double>&);
template bool all_finite(const NetParameters<float>&);
template bool all_finite(const NetParameters<double>&);

}  // namespace fb
