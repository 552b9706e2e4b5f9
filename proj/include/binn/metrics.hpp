#pragma once

#include <optional>

#include "binn/types.hpp"

namespace binn {

/// (1/n) * sum (y_i - y_hat_i)^2. Throws LengthMismatch.
double mse(const Vector& y, const Vector& y_hat);

/// Sample Pearson correlation. Throws DegenerateVariance if either argument
/// has zero variance; requires length >= 2.
double pearson(const Vector& t, const Vector& z);

/// Fractional ranks with average tie handling (1-based).
std::vector<double> average_ranks(const Vector& x);

/// Pearson correlation of average-tie fractional ranks.
double spearman(const Vector& x, const Vector& y);

/// (value - baseline) / |baseline| * 100; empty when baseline == 0.
std::optional<double> percent_change(double value, double baseline);

struct MetricSet {
  double mse = 0.0;
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  std::optional<double> percent_change_vs_baseline;
};

/// Degenerate correlations (constant predictions) are reported as 0.
MetricSet evaluate_predictions(const Vector& y, const Vector& y_hat);

}  // namespace binn
