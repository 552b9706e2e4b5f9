#include "binn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace binn {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<Index> labeled_indices(const std::vector<char>& mask) {
  std::vector<Index> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(static_cast<Index>(i));
  }
  return idx;
}

Vector gather(const Eigen::Ref<const Vector>& col, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = col[rows[i]];
  return out;
}

}  // namespace

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "mse") return LossMode::kMse;
  if (s == "soft_constraint") return LossMode::kSoftConstraint;
  if (s == "hard_constraint") return LossMode::kHardConstraint;
  throw Error("unknown loss mode: " + s);
}

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kMse: return "mse";
    case LossMode::kSoftConstraint: return "soft_constraint";
    case LossMode::kHardConstraint: return "hard_constraint";
  }
  return "mse";
}

Index IntermediateTruth::Layer::labeled_count() const {
  Index c = 0;
  for (char b : line_labeled) c += b ? 1 : 0;
  return c;
}

bool IntermediateTruth::empty() const {
  for (const auto& l : layers) {
    if (l.has_value()) return false;
  }
  return true;
}

IntermediateTruth IntermediateTruth::gather_rows(const std::vector<Index>& rows) const {
  IntermediateTruth out;
  out.layers.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].has_value()) continue;
    const Layer& src = *layers[l];
    Layer dst;
    dst.values.resize(static_cast<Index>(rows.size()), src.values.cols());
    dst.line_labeled.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      dst.values.row(static_cast<Index>(i)) = src.values.row(rows[i]);
      dst.line_labeled[i] = src.line_labeled[static_cast<std::size_t>(rows[i])];
    }
    dst.entity_available = src.entity_available;
    out.layers[l] = std::move(dst);
  }
  return out;
}

std::vector<char> sample_label_mask(Index n, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw Error("label fraction must be in [0,1]");
  }
  std::vector<char> mask(static_cast<std::size_t>(n), 0);
  const Index n_labeled =
      static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (Index i = 0; i < n_labeled; ++i) {
    mask[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  }
  return mask;
}

IntermediateTruth IntermediateTruth::single_layer(Matrix values,
                                                  double label_fraction,
                                                  std::uint64_t seed) {
  Layer layer;
  const Index n = values.rows();
  const Index k = values.cols();
  layer.values = std::move(values);
  layer.entity_available.assign(static_cast<std::size_t>(k), 1);
  layer.line_labeled = sample_label_mask(n, label_fraction, seed);

  IntermediateTruth truth;
  truth.layers.push_back(std::move(layer));
  return truth;
}

namespace {

// Shared core: computes the penalty (and optionally its latent gradients).
// Gradient of (1 - rho) w.r.t. t is -(zc - (Stz/Stt) tc) / sqrt(Stt*Szz);
// orthogonal to the all-ones direction since both zc and tc are centered.
void accumulate_penalty(const std::vector<Matrix>& latents,
                        const IntermediateTruth& truth, const LossConfig& config,
                        LossValue& out, std::vector<Matrix>* d_latents) {
  out.correlations.resize(latents.size());
  for (std::size_t l = 0; l < latents.size(); ++l) {
    if (l >= truth.layers.size() || !truth.layers[l].has_value()) continue;
    const auto& layer = *truth.layers[l];
    const Matrix& T = latents[l];
    if (layer.values.rows() != T.rows()) {
      throw ShapeMismatch("intermediate truth rows != latent rows");
    }
    if (layer.values.cols() != T.cols()) {
      throw ShapeMismatch("intermediate truth columns != entity count");
    }
    auto& summary = out.correlations[l];
    summary.per_entity_rho.assign(static_cast<std::size_t>(T.cols()), kNan);

    const auto rows = labeled_indices(layer.line_labeled);
    if (rows.empty()) continue;  // no labeled lines -> no constraint term

    for (Index j = 0; j < T.cols(); ++j) {
      if (!layer.entity_available[static_cast<std::size_t>(j)]) continue;
      const Vector t = gather(T.col(j), rows);
      const Vector z = gather(layer.values.col(j), rows);

      if (config.mode == LossMode::kHardConstraint) {
        const Vector diff = t - z;
        out.penalty_term += diff.squaredNorm();
        if (d_latents) {
          auto& G = (*d_latents)[l];
          for (std::size_t i = 0; i < rows.size(); ++i) {
            G(rows[i], j) += config.lambda * 2.0 * diff[static_cast<Index>(i)];
          }
        }
        try {
          summary.per_entity_rho[static_cast<std::size_t>(j)] = pearson(t, z);
        } catch (const DegenerateVariance&) {
          ++summary.skipped_entities;
        }
        continue;
      }

      // Soft constraint: 1 - pearson per labeled entity.
      const Index m = t.size();
      const Vector tc = t.array() - t.mean();
      const Vector zc = z.array() - z.mean();
      const double stt = tc.squaredNorm();
      const double szz = zc.squaredNorm();
      if (m < 2 || stt <= 0.0 || szz <= 0.0) {
        // Neutral penalty, equivalent to rho = 0; avoids NaN poisoning when
        // sigmoids saturate early in training.
        out.penalty_term += 1.0;
        ++summary.skipped_entities;
        ++out.degenerate_entities;
        continue;
      }
      const double denom = std::sqrt(stt * szz);
      const double stz = tc.dot(zc);
      const double rho = std::clamp(stz / denom, -1.0, 1.0);
      summary.per_entity_rho[static_cast<std::size_t>(j)] = rho;
      out.penalty_term += 1.0 - rho;
      if (d_latents) {
        const Vector grad = -(zc - (stz / stt) * tc) / denom;
        auto& G = (*d_latents)[l];
        for (std::size_t i = 0; i < rows.size(); ++i) {
          G(rows[i], j) += config.lambda * grad[static_cast<Index>(i)];
        }
      }
    }
  }
}

}  // namespace

LossValue bio_loss(const Vector& y, const Vector& y_hat,
                   const std::vector<Matrix>& latents,
                   const IntermediateTruth* truth, const LossConfig& config) {
  LossValue out;
  out.mse_term = mse(y, y_hat);
  if (config.mode != LossMode::kMse && truth != nullptr && !truth->empty()) {
    accumulate_penalty(latents, *truth, config, out, nullptr);
  }
  out.total = out.mse_term + config.lambda * out.penalty_term;
  return out;
}

LossGradient penalty_gradient(const std::vector<Matrix>& latents,
                              const IntermediateTruth& truth,
                              const LossConfig& config) {
  LossGradient g;
  if (latents.empty()) return g;
  g.d_prediction = Vector::Zero(latents.front().rows());
  g.d_latents.reserve(latents.size());
  for (const auto& T : latents) g.d_latents.emplace_back(Matrix::Zero(T.rows(), T.cols()));
  if (config.mode != LossMode::kMse && !truth.empty()) {
    accumulate_penalty(latents, truth, config, g.value, &g.d_latents);
  }
  g.value.total = config.lambda * g.value.penalty_term;
  return g;
}

LossGradient loss_gradient(const Vector& y, const Vector& y_hat,
                           const std::vector<Matrix>& latents,
                           const IntermediateTruth* truth,
                           const LossConfig& config) {
  LossGradient g;
  const Index n = y.size();
  if (y_hat.size() != n) {
    throw LengthMismatch("loss_gradient: prediction length != target length");
  }
  g.value.mse_term = mse(y, y_hat);
  g.d_prediction = 2.0 / static_cast<double>(n) * (y_hat - y);

  const bool constrained =
      config.mode != LossMode::kMse && truth != nullptr && !truth->empty();
  if (constrained) {
    g.d_latents.reserve(latents.size());
    for (const auto& T : latents) g.d_latents.emplace_back(Matrix::Zero(T.rows(), T.cols()));
    accumulate_penalty(latents, *truth, config, g.value, &g.d_latents);
  }
  g.value.total = g.value.mse_term + config.lambda * g.value.penalty_term;
  return g;
}

}  // namespace binn
