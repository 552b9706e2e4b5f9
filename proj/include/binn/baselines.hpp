#pragma once

#include <cstdint>

#include "binn/subnet.hpp"
#include "binn/trainable.hpp"
#include "binn/types.hpp"

namespace binn {

struct RidgeModel {
  Vector coefficients;
  double intercept = 0.0;
  double alpha = 0.0;

  Vector predict(const Matrix& X) const;
};

/// Minimizes ||y - X b - b0||^2 + alpha ||b||^2 with an unpenalized intercept.
/// Solved through normal equations in the smaller of the p x p feature form
/// and the n x n Gram form. Throws SingularSystem only when alpha == 0 and X
/// is rank-deficient.
RidgeModel ridge_fit(const Matrix& X, const Vector& y, double alpha);

/// Feature-form solution regardless of shape; exposed for cross-checking the
/// Gram route.
RidgeModel ridge_fit_feature_form(const Matrix& X, const Vector& y, double alpha);

struct ElasticNetModel {
  Vector coefficients;
  double intercept = 0.0;
  double penalty = 0.0;
  double l1_ratio = 1.0;
  bool converged = false;
  int iterations = 0;

  Vector predict(const Matrix& X) const;
  std::vector<Index> support() const;  // indices of nonzero coefficients
};

/// Coordinate descent on
///   (1/2n) ||y - b0 - X b||^2 + penalty * (l1_ratio ||b||_1
///                                          + (1 - l1_ratio)/2 ||b||^2).
/// Stops when the largest coordinate update in a sweep is <= tol; a model
/// that exhausts max_iter sweeps is returned with converged == false.
ElasticNetModel elastic_net_fit(const Matrix& X, const Vector& y, double penalty,
                                double l1_ratio, double tol = 1e-6,
                                int max_iter = 10000);

/// Smallest penalty at which the lasso (l1_ratio = 1) solution is all-zero:
/// max_k |x_k . (y - mean y)| / n, with centered columns.
double lasso_critical_penalty(const Matrix& X, const Vector& y);

/// Unconstrained fully-connected baseline over all markers.
class FcnModel : public TrainableModel {
 public:
  FcnModel() = default;
  FcnModel(Index n_features, const SubnetSpec& spec, std::uint64_t seed);

  Index parameter_count() const override { return net_.parameter_count(); }
  Vector parameters() const override;
  void set_parameters(const Vector& theta) override;
  Vector predict(const Matrix& X) const override;
  double loss_and_gradient(const Matrix& X, const Vector& y,
                           const IntermediateTruth* truth, const LossConfig& config,
                           Vector& grad) const override;

  const Subnet& net() const { return net_; }
  const SubnetSpec& spec() const { return spec_; }
  Index n_features() const { return net_.fan_in(); }
  std::uint64_t seed() const { return seed_; }

 private:
  Subnet net_;
  SubnetSpec spec_;
  std::uint64_t seed_ = 0;
};

/// Solves hidden widths so the dense network's parameter count lands within
/// ~10% of `target_params` (one shared width across `hidden_layers` layers).
SubnetSpec fcn_spec_for_budget(Index n_features, Index target_params,
                               int hidden_layers = 1);

}  // namespace binn
