#include "binn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace binn {

Vector gather(const Vector& v, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[rows[i]];
  return out;
}

Matrix gather_rows_raw(const Matrix& X, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = X.row(rows[i]);
  }
  return out;
}

Standardizer Standardizer::fit(const Matrix& X, const Vector& y,
                               const std::vector<Index>& rows) {
  if (rows.empty()) throw InsufficientLines("standardizer: no rows to fit on");
  Standardizer s;
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  s.feature_mean = Vector::Zero(X.cols());
  for (Index r : rows) s.feature_mean += X.row(r).transpose();
  s.feature_mean *= inv_n;

  Vector var = Vector::Zero(X.cols());
  for (Index r : rows) {
    const Vector d = X.row(r).transpose() - s.feature_mean;
    var += d.cwiseProduct(d);
  }
  var *= inv_n;
  s.feature_scale = var.cwiseSqrt();
  for (Index c = 0; c < s.feature_scale.size(); ++c) {
    if (s.feature_scale[c] == 0.0) s.feature_scale[c] = 1.0;
  }

  double ym = 0.0;
  for (Index r : rows) ym += y[r];
  s.y_mean = ym * inv_n;
  return s;
}

Matrix Standardizer::gather_rows(const Matrix& X, const std::vector<Index>& rows) const {
  Matrix out(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) =
        (X.row(rows[i]).transpose() - feature_mean).cwiseQuotient(feature_scale);
  }
  return out;
}

Vector Standardizer::center_y(const Vector& y, const std::vector<Index>& rows) const {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[static_cast<Index>(i)] = y[rows[i]] - y_mean;
  }
  return out;
}

namespace {

// Chunked standardized forward pass; keeps memory bounded on big eval sets.
Vector predict_standardized(const TrainableModel& model, const Matrix& X,
                            const std::vector<Index>& rows, const Standardizer& scaler) {
  constexpr std::size_t kChunk = 1024;
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const std::size_t stop = std::min(rows.size(), start + kChunk);
    const std::vector<Index> slice(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                   rows.begin() + static_cast<std::ptrdiff_t>(stop));
    const Vector pred = model.predict(scaler.gather_rows(X, slice));
    out.segment(static_cast<Index>(start), static_cast<Index>(slice.size())) = pred;
  }
  return out;
}

}  // namespace

Vector predict_rows(const TrainableModel& model, const Matrix& X,
                    const std::vector<Index>& rows, const Standardizer& scaler) {
  return predict_standardized(model, X, rows, scaler).array() + scaler.y_mean;
}

TrainResult train(TrainableModel& model, const Matrix& X, const Vector& y,
                  const IntermediateTruth* truth, const std::vector<Index>& train_rows,
                  const std::vector<Index>& val_rows, const TrainConfig& config,
                  const Standardizer& scaler, IndexRecorder* audit) {
  if (config.patience < 1) throw Error("train: patience must be >= 1");
  if (config.step_size <= 0) throw Error("train: step size must be positive");
  if (train_rows.empty()) throw InsufficientLines("train: empty training fold");
  if (audit) {
    audit->record(train_rows);
    audit->record(val_rows);
  }

  TrainResult result;
  const Index n_params = model.parameter_count();
  Vector theta = model.parameters();
  Vector best_theta = theta;
  result.best_val_mse = std::numeric_limits<double>::infinity();

  Vector m = Vector::Zero(n_params);
  Vector v = Vector::Zero(n_params);
  constexpr double kEps = 1e-8;
  long t = 0;

  std::mt19937_64 rng(config.seed);
  std::vector<Index> order = train_rows;

  Vector y_val_centered;
  if (!val_rows.empty()) y_val_centered = scaler.center_y(y, val_rows);

  // Constrained losses: the penalty is estimated on its own stream of labeled
  // training lines so the correlation is computed over a stable sample.
  const bool constrained = config.loss.mode != LossMode::kMse && truth != nullptr &&
                           !truth->empty() && config.loss.lambda != 0.0;
  std::vector<Index> labeled_train;
  if (constrained) {
    for (Index r : train_rows) {
      for (const auto& layer : truth->layers) {
        if (layer.has_value() && layer->line_labeled[static_cast<std::size_t>(r)]) {
          labeled_train.push_back(r);
          break;
        }
      }
    }
  }

  int since_best = 0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                               order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Matrix xb = scaler.gather_rows(X, batch);
      const Vector yb = scaler.center_y(y, batch);

      Vector grad;
      const LossConfig mse_only{LossMode::kMse, 0.0};
      double loss = model.loss_and_gradient(xb, yb, nullptr, mse_only, grad);
      if (constrained && !labeled_train.empty()) {
        std::vector<Index> penalty_rows = labeled_train;
        if (static_cast<int>(penalty_rows.size()) > config.penalty_batch) {
          std::shuffle(penalty_rows.begin(), penalty_rows.end(), rng);
          penalty_rows.resize(static_cast<std::size_t>(config.penalty_batch));
        }
        const Matrix xp = scaler.gather_rows(X, penalty_rows);
        const IntermediateTruth tp = truth->gather_rows(penalty_rows);
        loss += model.add_penalty_gradient(xp, tp, config.loss, grad);
      }
      if (!std::isfinite(loss) || !grad.allFinite()) {
        std::ostringstream dump;
        dump << "non-finite loss at epoch " << epoch << " batch " << batches
             << ": loss=" << loss << " |theta|=" << theta.norm()
             << " |grad|=" << (grad.size() ? grad.norm() : 0.0);
        throw NonFiniteLoss(dump.str());
      }
      if (config.weight_decay > 0.0) grad += config.weight_decay * theta;

      ++t;
      m = config.beta1 * m + (1.0 - config.beta1) * grad;
      v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
      const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      const Vector step =
          (m / bias1).cwiseQuotient(((v / bias2).cwiseSqrt().array() + kEps).matrix());
      theta -= config.step_size * step;
      model.set_parameters(theta);

      epoch_loss += loss;
      ++batches;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = batches > 0 ? epoch_loss / batches : 0.0;
    if (!val_rows.empty()) {
      const Vector pred = predict_standardized(model, X, val_rows, scaler);
      record.val_mse = mse(y_val_centered, pred);
    } else {
      record.val_mse = record.train_loss;
    }
    result.history.push_back(record);
    result.epochs_run = epoch + 1;

    if (record.val_mse < result.best_val_mse) {
      result.best_val_mse = record.val_mse;
      result.best_epoch = epoch;
      best_theta = theta;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  if (result.best_epoch >= 0) {
    model.set_parameters(best_theta);
  }
  return result;
}

FitOutcome fit_model(TrainableModel& model, const Matrix& X, const Vector& y,
                     const IntermediateTruth* truth, const Fold& fold,
                     const TrainConfig& config, IndexRecorder* audit) {
  FitOutcome out;
  out.scaler = Standardizer::fit(X, y, fold.train);
  out.result = train(model, X, y, truth, fold.train, fold.val, config, out.scaler, audit);
  return out;
}

}  // namespace binn
