#include "binn/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "binn/metrics.hpp"

namespace binn {

LatentStats latent_stats(const BinnModel& model, const Matrix& X_eval) {
  if (X_eval.rows() < 1) throw InsufficientLines("latent_stats: empty evaluation set");
  const LatentTrace trace = model.forward(X_eval);
  LatentStats stats;
  const double inv_n = 1.0 / static_cast<double>(X_eval.rows());
  for (const Matrix& U : trace.per_layer_latents) {
    Vector mean = U.colwise().mean();
    Vector sd(U.cols());
    for (Index j = 0; j < U.cols(); ++j) {
      sd[j] = std::sqrt((U.col(j).array() - mean[j]).square().sum() * inv_n);
    }
    stats.mean.push_back(std::move(mean));
    stats.sd.push_back(std::move(sd));
  }
  stats.baseline_mean_prediction = trace.prediction.mean();
  return stats;
}

double clamp_and_measure(const BinnModel& model, const Matrix& X_eval, int layer_index,
                         Index entity, double a) {
  return clamp_and_measure(model, X_eval, layer_index, entity, a,
                           latent_stats(model, X_eval));
}

double clamp_and_measure(const BinnModel& model, const Matrix& X_eval, int layer_index,
                         Index entity, double a, const LatentStats& stats) {
  if (a < 0.0) throw Error("clamp_and_measure: perturbation scale must be nonnegative");
  if (layer_index < 1 || layer_index > model.n_layers()) {
    throw UnknownEntity("clamp_and_measure: layer out of range");
  }
  const auto l = static_cast<std::size_t>(layer_index - 1);
  if (entity < 0 || entity >= stats.mean[l].size()) {
    throw UnknownEntity("clamp_and_measure: entity out of range");
  }
  const double mu = stats.mean[l][entity];
  const double sigma = stats.sd[l][entity];

  const auto mean_pred = [&](double value) {
    return model.forward(X_eval, LatentClamp{layer_index, entity, value})
        .prediction.mean();
  };
  const double up = mean_pred(mu + a * sigma);
  const double down = mean_pred(mu - a * sigma);
  const double y0 = stats.baseline_mean_prediction;
  return 0.5 * (std::abs(up - y0) + std::abs(down - y0));
}

std::vector<EntitySensitivity> measure_layer(const BinnModel& model, const Matrix& X_eval,
                                             int layer_index, double a) {
  const LatentStats stats = latent_stats(model, X_eval);
  const auto& ids = model.mask(layer_index).entity_ids();
  std::vector<EntitySensitivity> out;
  out.reserve(ids.size());
  for (Index j = 0; j < static_cast<Index>(ids.size()); ++j) {
    out.push_back({ids[static_cast<std::size_t>(j)],
                   clamp_and_measure(model, X_eval, layer_index, j, a, stats)});
  }
  return out;
}

SensitivityReport aggregate(const std::vector<std::vector<EntitySensitivity>>& per_model,
                            double a) {
  std::map<std::string, std::pair<double, int>> totals;  // id -> (sum, count)
  for (const auto& model_result : per_model) {
    for (const auto& e : model_result) {
      auto& t = totals[e.entity_id];
      t.first += e.delta_y;
      t.second += 1;
    }
  }

  SensitivityReport report;
  report.perturb_scale = a;
  for (const auto& [id, t] : totals) {
    SensitivityReport::Row row;
    row.entity_id = id;
    row.model_count = t.second;
    row.delta_y_mean = t.first / static_cast<double>(t.second);
    report.rows.push_back(std::move(row));
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const auto& x, const auto& y) {
    if (x.delta_y_mean != y.delta_y_mean) return x.delta_y_mean > y.delta_y_mean;
    return x.entity_id < y.entity_id;
  });
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    report.rows[i].rank = static_cast<int>(i) + 1;
  }
  return report;
}

std::vector<LatentTruthCorrelation> latent_truth_correlations(const BinnModel& model,
                                                              const Matrix& X_eval,
                                                              int layer_index,
                                                              const Matrix& truth) {
  const LatentTrace trace = model.forward(X_eval);
  const Matrix& U = trace.per_layer_latents.at(static_cast<std::size_t>(layer_index - 1));
  if (truth.rows() != U.rows() || truth.cols() != U.cols()) {
    throw ShapeMismatch("latent_truth_correlations: truth shape mismatch");
  }
  const auto& ids = model.mask(layer_index).entity_ids();
  std::vector<LatentTruthCorrelation> out;
  for (Index j = 0; j < U.cols(); ++j) {
    LatentTruthCorrelation c;
    c.entity_id = ids[static_cast<std::size_t>(j)];
    try {
      c.r = pearson(U.col(j), truth.col(j));
    } catch (const DegenerateVariance&) {
      c.r = std::numeric_limits<double>::quiet_NaN();
      c.degenerate = true;
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace binn
