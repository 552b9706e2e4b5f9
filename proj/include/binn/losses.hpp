#pragma once

#include <optional>

#include "binn/metrics.hpp"
#include "binn/types.hpp"

namespace binn {

enum class LossMode { kMse, kSoftConstraint, kHardConstraint };

struct LossConfig {
  LossMode mode = LossMode::kMse;
  double lambda = 0.1;  // weight of the intermediate-alignment penalty
};

LossMode loss_mode_from_string(const std::string& s);
std::string to_string(LossMode mode);

/// Uniform random subset of lines carrying intermediate measurements, fixed
/// per experiment seed.
std::vector<char> sample_label_mask(Index n, double fraction, std::uint64_t seed);

/// Measured intermediate traits used to supervise latents during training.
/// Column order of each layer matrix must match the model's entity order for
/// that layer.
struct IntermediateTruth {
  struct Layer {
    Matrix values;                       // n x k_l
    std::vector<char> line_labeled;      // n; which lines carry measurements
    std::vector<char> entity_available;  // k_l

    Index labeled_count() const;
  };

  // One optional entry per model layer; nullopt = no truth at that layer.
  std::vector<std::optional<Layer>> layers;

  bool empty() const;
  IntermediateTruth gather_rows(const std::vector<Index>& rows) const;

  static IntermediateTruth single_layer(Matrix values, double label_fraction,
                                        std::uint64_t seed);
};

struct LayerCorrelationSummary {
  std::vector<double> per_entity_rho;  // NaN where skipped/unavailable
  int skipped_entities = 0;            // degenerate-variance diagnostics
};

struct LossValue {
  double total = 0.0;
  double mse_term = 0.0;
  double penalty_term = 0.0;  // unweighted; total = mse + lambda * penalty
  std::vector<LayerCorrelationSummary> correlations;
  int degenerate_entities = 0;
};

/// Phenotype MSE plus the configured intermediate-alignment penalty.
/// Soft mode adds sum over labeled entities of (1 - pearson); hard mode adds
/// the squared error over labeled latent entries. A degenerate (constant)
/// column contributes a neutral penalty of 1 in soft mode and is counted.
LossValue bio_loss(const Vector& y, const Vector& y_hat,
                   const std::vector<Matrix>& latents,
                   const IntermediateTruth* truth, const LossConfig& config);

struct LossGradient {
  LossValue value;
  Vector d_prediction;            // n
  std::vector<Matrix> d_latents;  // per layer, n x k_l (empty if no constraint)
};

LossGradient loss_gradient(const Vector& y, const Vector& y_hat,
                           const std::vector<Matrix>& latents,
                           const IntermediateTruth* truth,
                           const LossConfig& config);

/// The alignment penalty alone (no phenotype term): weighted value
/// lambda * penalty and its latent gradients. Used by the training loop,
/// which evaluates the penalty on its own stream of labeled lines.
LossGradient penalty_gradient(const std::vector<Matrix>& latents,
                              const IntermediateTruth& truth,
                              const LossConfig& config);

}  // namespace binn
