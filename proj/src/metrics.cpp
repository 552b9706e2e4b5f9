#include "binn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace binn {

double mse(const Vector& y, const Vector& y_hat) {
  if (y.size() != y_hat.size()) {
    throw LengthMismatch("mse: vectors have different lengths");
  }
  if (y.size() < 1) {
    throw LengthMismatch("mse: empty vectors");
  }
  return (y - y_hat).squaredNorm() / static_cast<double>(y.size());
}

double pearson(const Vector& t, const Vector& z) {
  if (t.size() != z.size()) {
    throw LengthMismatch("pearson: vectors have different lengths");
  }
  const Index n = t.size();
  if (n < 2) {
    throw LengthMismatch("pearson: need at least 2 samples");
  }
  const Vector tc = t.array() - t.mean();
  const Vector zc = z.array() - z.mean();
  const double stt = tc.squaredNorm();
  const double szz = zc.squaredNorm();
  if (stt <= 0.0 || szz <= 0.0) {
    throw DegenerateVariance("pearson: constant input vector");
  }
  const double rho = tc.dot(zc) / std::sqrt(stt * szz);
  return std::clamp(rho, -1.0, 1.0);
}

std::vector<double> average_ranks(const Vector& x) {
  const Index n = x.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return x[a] < x[b]; });

  std::vector<double> ranks(static_cast<std::size_t>(n));
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    // tied block [i, j]: everyone gets the mean of ranks i+1 .. j+1
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k) {
      ranks[static_cast<std::size_t>(order[k])] = r;
    }
    i = j + 1;
  }
  return ranks;
}

double spearman(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) {
    throw LengthMismatch("spearman: vectors have different lengths");
  }
  if (x.size() < 2) {
    throw LengthMismatch("spearman: need at least 2 samples");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const Vector vx = Eigen::Map<const Vector>(rx.data(), static_cast<Index>(rx.size()));
  const Vector vy = Eigen::Map<const Vector>(ry.data(), static_cast<Index>(ry.size()));
  return pearson(vx, vy);
}

std::optional<double> percent_change(double value, double baseline) {
  if (baseline == 0.0) return std::nullopt;
  return (value - baseline) / std::abs(baseline) * 100.0;
}

MetricSet evaluate_predictions(const Vector& y, const Vector& y_hat) {
  MetricSet m;
  m.mse = mse(y, y_hat);
  try {
    m.pearson_r = pearson(y, y_hat);
  } catch (const DegenerateVariance&) {
    m.pearson_r = 0.0;
  }
  try {
    m.spearman_rho = spearman(y, y_hat);
  } catch (const DegenerateVariance&) {
    m.spearman_rho = 0.0;
  }
  return m;
}

}  // namespace binn
