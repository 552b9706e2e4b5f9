#pragma once

#include <cstdint>
#include <optional>

#include "binn/subnet.hpp"
#include "binn/trainable.hpp"
#include "binn/types.hpp"

namespace binn {

/// Clamp one latent entity to a constant for every sample during a forward
/// pass (sensitivity probing). Layers are 1-based, matching LayerMask.
struct LatentClamp {
  int layer_index = 1;
  Index entity = 0;
  double value = 0.0;
};

using ParameterGradients = Vector;

/// Pathway-masked network: per-entity subnetworks at each omics layer, an
/// optional residual net over markers no mask touches, and an integrator that
/// fuses the last layer's latents (plus the residual output) into the
/// phenotype prediction.
///
/// Masked-out connections are never materialized: each pathway subnet reads a
/// gathered column subset of its layer input, so perturbing a marker outside
/// an entity's support cannot change that entity's latent, bit for bit.
class BinnModel : public TrainableModel {
 public:
  BinnModel() = default;

  static BinnModel build(std::vector<LayerMask> masks, const SubnetSpec& pathway_spec,
                         const SubnetSpec& residual_spec, const SubnetSpec& integrator_spec,
                         std::uint64_t seed);

  // --- architecture ----------------------------------------------------
  int n_layers() const { return static_cast<int>(masks_.size()); }
  Index n_markers() const { return masks_.empty() ? 0 : masks_.front().rows(); }
  Index n_entities(int layer_index) const;  // 1-based
  const LayerMask& mask(int layer_index) const;
  const std::vector<LayerMask>& masks() const { return masks_; }
  const std::vector<Index>& residual_marker_index() const { return residual_markers_; }
  bool has_residual() const { return residual_.has_value(); }
  Index residual_width() const { return residual_ ? residual_->output_width() : 0; }
  std::uint64_t seed() const { return seed_; }

  const Subnet& pathway_subnet(int layer_index, Index entity) const;
  const Subnet& integrator() const { return integrator_; }

  // --- evaluation -------------------------------------------------------
  LatentTrace forward(const Matrix& X) const;
  LatentTrace forward(const Matrix& X, const std::optional<LatentClamp>& clamp) const;
  LatentTrace forward(const GenotypeMatrix& X) const;

  /// Gradients of sum_i upstream_gradient_i * prediction_i w.r.t. every
  /// parameter, plus optional externally supplied per-layer latent gradients
  /// (used by constrained losses).
  ParameterGradients backward(const Matrix& X, const Vector& upstream_gradient,
                              const std::vector<Matrix>& latent_gradients = {}) const;

  // --- TrainableModel ----------------------------------------------------
  Index parameter_count() const override { return parameter_count_; }
  Vector parameters() const override;
  void set_parameters(const Vector& theta) override;
  Vector predict(const Matrix& X) const override;
  double loss_and_gradient(const Matrix& X, const Vector& y,
                           const IntermediateTruth* truth, const LossConfig& config,
                           Vector& grad) const override;
  double add_penalty_gradient(const Matrix& X, const IntermediateTruth& truth,
                              const LossConfig& config, Vector& grad) const override;

  // Specs used at build time, retained for serialization.
  const SubnetSpec& pathway_spec() const { return pathway_spec_; }
  const SubnetSpec& residual_spec() const { return residual_spec_; }
  const SubnetSpec& integrator_spec() const { return integrator_spec_; }

 private:
  struct ForwardCache {
    // [layer][entity] -> per-dense-layer activations
    std::vector<std::vector<std::vector<Matrix>>> pathway;
    std::vector<Matrix> latents;  // U^(1..L)
    std::vector<Matrix> residual;
    Matrix residual_out;
    std::vector<Matrix> integrator;
    Vector prediction;
  };

  LatentTrace run_forward(const Matrix& X, const std::optional<LatentClamp>& clamp,
                          ForwardCache* cache) const;
  ParameterGradients run_backward(const Matrix& X, const ForwardCache& cache,
                                  const Vector& d_prediction,
                                  const std::vector<Matrix>& latent_gradients) const;

  Matrix gather_columns(const Matrix& source, const std::vector<Index>& cols) const;

  // Flat parameter layout: pathway subnets (layer-major, then entity), the
  // residual subnet, then the integrator.
  Index subnet_offset(int layer, Index entity) const;

  std::vector<LayerMask> masks_;
  std::vector<std::vector<Subnet>> pathway_;  // [layer][entity]
  std::optional<Subnet> residual_;
  Subnet integrator_;
  std::vector<Index> residual_markers_;
  SubnetSpec pathway_spec_, residual_spec_, integrator_spec_;
  Index parameter_count_ = 0;
  Index residual_offset_ = 0;
  Index integrator_offset_ = 0;
  std::uint64_t seed_ = 0;
};

}  // namespace binn
