#pragma once

#include <cstdint>
#include <functional>
#include <set>

#include "binn/losses.hpp"
#include "binn/splits.hpp"
#include "binn/trainable.hpp"
#include "binn/types.hpp"

namespace binn {

/// Column standardization fitted on training-fold lines only; the phenotype
/// is centered by the training-fold mean.
struct Standardizer {
  Vector feature_mean;
  Vector feature_scale;  // standard deviation, constant columns mapped to 1
  double y_mean = 0.0;

  static Standardizer fit(const Matrix& X, const Vector& y,
                          const std::vector<Index>& rows);

  /// Gathers the requested rows and standardizes them in one pass.
  Matrix gather_rows(const Matrix& X, const std::vector<Index>& rows) const;
  Vector center_y(const Vector& y, const std::vector<Index>& rows) const;
};

Vector gather(const Vector& v, const std::vector<Index>& rows);
Matrix gather_rows_raw(const Matrix& X, const std::vector<Index>& rows);

struct TrainConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;  // L2 coefficient added to the gradient
  int batch_size = 64;
  int max_epochs = 500;
  int patience = 25;
  LossConfig loss;
  // Constrained losses evaluate the alignment penalty on a per-step sample of
  // labeled training lines of this size; a tiny batch intersection would make
  // the correlation estimate useless.
  int penalty_batch = 256;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_val_mse = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
};

/// Collects every line index a computation touched; one per audit phase.
class IndexRecorder {
 public:
  void record(const std::vector<Index>& rows) {
    for (Index i : rows) seen_.insert(i);
  }
  const std::set<Index>& seen() const { return seen_; }

 private:
  std::set<Index> seen_;
};

/// Mini-batch Adam with early stopping on validation MSE. `X` and `y` are raw;
/// the standardizer (fitted on `train_rows` only) is applied per gathered
/// batch. The parameter snapshot with the best validation MSE is restored
/// before returning. Throws NonFiniteLoss with a state dump if the loss or
/// gradient leaves the finite range.
TrainResult train(TrainableModel& model, const Matrix& X, const Vector& y,
                  const IntermediateTruth* truth, const std::vector<Index>& train_rows,
                  const std::vector<Index>& val_rows, const TrainConfig& config,
                  const Standardizer& scaler, IndexRecorder* audit = nullptr);

/// Convenience wrapper that also fits the standardizer on the training rows.
struct FitOutcome {
  TrainResult result;
  Standardizer scaler;
};
FitOutcome fit_model(TrainableModel& model, const Matrix& X, const Vector& y,
                     const IntermediateTruth* truth, const Fold& fold,
                     const TrainConfig& config, IndexRecorder* audit = nullptr);

/// Predictions in original phenotype units for the given rows.
Vector predict_rows(const TrainableModel& model, const Matrix& X,
                    const std::vector<Index>& rows, const Standardizer& scaler);

}  // namespace binn
