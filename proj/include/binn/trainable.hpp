#pragma once

#include "binn/losses.hpp"
#include "binn/types.hpp"

namespace binn {

/// Anything the first-order training loop can optimize. `X` rows are samples,
/// already standardized by the caller.
class TrainableModel {
 public:
  virtual ~TrainableModel() = default;

  virtual Index parameter_count() const = 0;
  virtual Vector parameters() const = 0;
  virtual void set_parameters(const Vector& theta) = 0;

  virtual Vector predict(const Matrix& X) const = 0;

  /// Evaluates the loss on a batch and writes the flat parameter gradient.
  /// `truth` may be null (plain MSE) and is ignored by models without
  /// entity-aligned latents.
  virtual double loss_and_gradient(const Matrix& X, const Vector& y,
                                   const IntermediateTruth* truth,
                                   const LossConfig& config,
                                   Vector& grad) const = 0;

  /// Weighted alignment penalty lambda * P evaluated on its own set of
  /// labeled lines, with the gradient accumulated into `grad`. Models without
  /// entity-aligned latents contribute nothing.
  virtual double add_penalty_gradient(const Matrix& X, const IntermediateTruth& truth,
                                      const LossConfig& config, Vector& grad) const {
    (void)X;
    (void)truth;
    (void)config;
    (void)grad;
    return 0.0;
  }
};

}  // namespace binn
