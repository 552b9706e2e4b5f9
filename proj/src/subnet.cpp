#include "binn/subnet.hpp"

#include <algorithm>
#include <cmath>

namespace binn {

Activation activation_from_string(const std::string& s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity") return Activation::kIdentity;
  throw Error("unknown activation: " + s);
}

std::string to_string(Activation a) {
  return a == Activation::kSigmoid ? "sigmoid" : "identity";
}

Subnet::Subnet(Index fan_in, const SubnetSpec& spec) : fan_in_(fan_in) {
  if (fan_in < 1) throw DimensionMismatch("subnet fan_in must be >= 1");
  if (spec.output_width < 1) throw DimensionMismatch("subnet output_width must be >= 1");

  widths_.push_back(static_cast<int>(fan_in));
  for (int w : spec.hidden_widths) {
    if (w < 0) throw Error("negative hidden width");
    if (w == kAutoHiddenWidth) {
      w = std::min<int>(8, static_cast<int>((fan_in + 1) / 2));
      w = std::max(w, 1);
    }
    widths_.push_back(w);
  }
  widths_.push_back(spec.output_width);

  for (std::size_t k = 0; k + 1 < widths_.size(); ++k) {
    Dense d;
    d.weight = Matrix::Zero(widths_[k + 1], widths_[k]);
    d.bias = Vector::Zero(widths_[k + 1]);
    const bool last = (k + 2 == widths_.size());
    d.activation = last ? spec.output_activation : spec.activation;
    parameter_count_ += d.weight.size() + d.bias.size();
    layers_.push_back(std::move(d));
  }
}

Index Subnet::output_width() const {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

void Subnet::init_parameters(std::mt19937_64& rng) {
  for (auto& layer : layers_) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer.weight.cols() + layer.weight.rows()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index r = 0; r < layer.weight.rows(); ++r) {
      for (Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = dist(rng);
      }
    }
    layer.bias.setZero();
  }
}

Matrix Subnet::apply_activation(Activation a, Matrix m) {
  if (a == Activation::kSigmoid) {
    m = (1.0 / (1.0 + (-m.array()).exp())).matrix();
  }
  return m;
}

Matrix Subnet::forward(const Matrix& input) const {
  if (input.cols() != fan_in_) {
    throw DimensionMismatch("subnet input width mismatch");
  }
  Matrix a = input;
  for (const auto& layer : layers_) {
    Matrix pre = a * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    a = apply_activation(layer.activation, std::move(pre));
  }
  return a;
}

Matrix Subnet::forward(const Matrix& input, std::vector<Matrix>& activations) const {
  if (input.cols() != fan_in_) {
    throw DimensionMismatch("subnet input width mismatch");
  }
  activations.clear();
  activations.reserve(layers_.size() + 1);
  activations.push_back(input);
  for (const auto& layer : layers_) {
    Matrix pre = activations.back() * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    activations.push_back(apply_activation(layer.activation, std::move(pre)));
  }
  return activations.back();
}

void Subnet::backward(const std::vector<Matrix>& activations,
                      const Matrix& output_grad, Eigen::Ref<Vector> param_grad,
                      Matrix* input_grad) const {
  if (param_grad.size() != parameter_count_) {
    throw ShapeMismatch("subnet backward: gradient buffer size mismatch");
  }
  Matrix g = output_grad;  // dLoss/dA for the current layer

  // Flat offsets are laid out front-to-back, so walk them in reverse.
  std::vector<Index> offsets(layers_.size());
  Index off = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    offsets[k] = off;
    off += layers_[k].weight.size() + layers_[k].bias.size();
  }

  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    const Matrix& a_out = activations[k + 1];
    const Matrix& a_in = activations[k];

    // sigmoid'(p) = s(1-s), recoverable from the cached output.
    if (layer.activation == Activation::kSigmoid) {
      g = (g.array() * a_out.array() * (1.0 - a_out.array())).matrix();
    }

    Eigen::Map<Matrix> w_grad(param_grad.data() + offsets[k], layer.weight.rows(),
                              layer.weight.cols());
    Eigen::Map<Vector> b_grad(param_grad.data() + offsets[k] + layer.weight.size(),
                              layer.bias.size());
    w_grad.noalias() += g.transpose() * a_in;
    b_grad.noalias() += g.colwise().sum().transpose();

    if (k == 0) {
      if (input_grad != nullptr) input_grad->noalias() = g * layer.weight;
      return;
    }
    g = g * layer.weight;
  }
}

void Subnet::get_parameters(Eigen::Ref<Vector> out) const {
  if (out.size() != parameter_count_) {
    throw ShapeMismatch("subnet get_parameters: buffer size mismatch");
  }
  Index off = 0;
  for (const auto& layer : layers_) {
    Eigen::Map<Matrix>(out.data() + off, layer.weight.rows(), layer.weight.cols()) =
        layer.weight;
    off += layer.weight.size();
    Eigen::Map<Vector>(out.data() + off, layer.bias.size()) = layer.bias;
    off += layer.bias.size();
  }
}

void Subnet::set_parameters(const Eigen::Ref<const Vector>& in) {
  if (in.size() != parameter_count_) {
    throw ShapeMismatch("subnet set_parameters: buffer size mismatch");
  }
  Index off = 0;
  for (auto& layer : layers_) {
    layer.weight =
        Eigen::Map<const Matrix>(in.data() + off, layer.weight.rows(), layer.weight.cols());
    off += layer.weight.size();
    layer.bias = Eigen::Map<const Vector>(in.data() + off, layer.bias.size());
    off += layer.bias.size();
  }
}

}  // namespace binn
