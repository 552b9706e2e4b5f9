#pragma once

#include <random>

#include "binn/types.hpp"

namespace binn {

enum class Activation { kSigmoid, kIdentity };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

/// Architecture of one fully-connected subnetwork. A hidden width of 0 is a
/// placeholder resolved at build time to min(8, ceil(fan_in / 2)).
struct SubnetSpec {
  std::vector<int> hidden_widths;
  Activation activation = Activation::kSigmoid;          // hidden layers
  Activation output_activation = Activation::kIdentity;  // final layer
  int output_width = 1;
};

constexpr int kAutoHiddenWidth = 0;

/// Small dense feed-forward network. Rows of the batch are samples; all
/// parameters live in a flat, canonically ordered vector (per layer: the
/// out-by-in weight matrix in column-major order, then the bias).
class Subnet {
 public:
  Subnet() = default;
  Subnet(Index fan_in, const SubnetSpec& spec);

  Index fan_in() const { return fan_in_; }
  Index output_width() const;
  Index parameter_count() const { return parameter_count_; }
  const std::vector<int>& layer_widths() const { return widths_; }

  /// Glorot-uniform weights (bounds +-sqrt(6/(fan_in+fan_out))), zero biases.
  void init_parameters(std::mt19937_64& rng);

  Matrix forward(const Matrix& input) const;
  /// Caches post-activation values A_0..A_K (A_0 = input) for backward.
  Matrix forward(const Matrix& input, std::vector<Matrix>& activations) const;

  /// Accumulates parameter gradients into `param_grad` (flat layout) and,
  /// when `input_grad` is non-null, writes dLoss/dInput there.
  void backward(const std::vector<Matrix>& activations, const Matrix& output_grad,
                Eigen::Ref<Vector> param_grad, Matrix* input_grad) const;

  void get_parameters(Eigen::Ref<Vector> out) const;
  void set_parameters(const Eigen::Ref<const Vector>& in);

 private:
  struct Dense {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::kIdentity;
  };

  static Matrix apply_activation(Activation a, Matrix m);

  Index fan_in_ = 0;
  std::vector<Dense> layers_;
  std::vector<int> widths_;  // fan_in, hidden..., output
  Index parameter_count_ = 0;
};

}  // namespace binn
