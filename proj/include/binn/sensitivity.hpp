#pragma once

#include "binn/model.hpp"
#include "binn/types.hpp"

namespace binn {

/// Per-entity latent mean/SD over an evaluation set plus the baseline mean
/// prediction, from a single forward pass.
struct LatentStats {
  std::vector<Vector> mean;  // [layer] k_l
  std::vector<Vector> sd;    // population SD
  double baseline_mean_prediction = 0.0;
};

LatentStats latent_stats(const BinnModel& model, const Matrix& X_eval);

/// Symmetric mean absolute deviation of the mean prediction when entity j's
/// latent is clamped to mean +- a * sd for every sample. `a` must be
/// nonnegative (zero only makes sense in tests).
double clamp_and_measure(const BinnModel& model, const Matrix& X_eval, int layer_index,
                         Index entity, double a);
double clamp_and_measure(const BinnModel& model, const Matrix& X_eval, int layer_index,
                         Index entity, double a, const LatentStats& stats);

struct EntitySensitivity {
  std::string entity_id;
  double delta_y = 0.0;
};

/// Measures every entity at one layer, sharing the baseline statistics.
std::vector<EntitySensitivity> measure_layer(const BinnModel& model, const Matrix& X_eval,
                                             int layer_index, double a);

struct SensitivityReport {
  struct Row {
    std::string entity_id;
    double delta_y_mean = 0.0;
    int model_count = 0;
    int rank = 0;
  };
  std::vector<Row> rows;  // sorted by delta_y_mean descending, ties by id
  double perturb_scale = 1.0;
};

/// Mean per entity over exactly the models that contain it.
SensitivityReport aggregate(const std::vector<std::vector<EntitySensitivity>>& per_model,
                            double a);

struct LatentTruthCorrelation {
  std::string entity_id;
  double r = 0.0;        // NaN when degenerate
  bool degenerate = false;
};

/// Pearson r between each latent column at a layer and the matching truth
/// column (diagnostic companion to the sensitivity ranking).
std::vector<LatentTruthCorrelation> latent_truth_correlations(
    const BinnModel& model, const Matrix& X_eval, int layer_index, const Matrix& truth);

}  // namespace binn
