#include "binn/model.hpp"

#include <random>

namespace binn {

BinnModel BinnModel::build(std::vector<LayerMask> masks, const SubnetSpec& pathway_spec,
                           const SubnetSpec& residual_spec,
                           const SubnetSpec& integrator_spec, std::uint64_t seed) {
  if (masks.empty()) throw DimensionMismatch("model needs at least one layer mask");
  if (pathway_spec.output_width != 1) {
    throw DimensionMismatch("pathway subnets must emit one latent scalar");
  }
  if (integrator_spec.output_width != 1) {
    throw DimensionMismatch("integrator must emit a scalar phenotype");
  }
  for (std::size_t l = 0; l < masks.size(); ++l) {
    if (masks[l].layer_index() != static_cast<int>(l) + 1) {
      throw DimensionMismatch("mask layer indices must be 1..L in order");
    }
    if (l > 0 && masks[l].rows() != masks[l - 1].cols()) {
      throw DimensionMismatch("mask chain breaks between layers " +
                              std::to_string(l) + " and " + std::to_string(l + 1));
    }
  }

  BinnModel model;
  model.masks_ = std::move(masks);
  model.pathway_spec_ = pathway_spec;
  model.residual_spec_ = residual_spec;
  model.integrator_spec_ = integrator_spec;
  model.seed_ = seed;
  model.residual_markers_ = model.masks_.front().unconnected_rows();

  for (const auto& mask : model.masks_) {
    std::vector<Subnet> nets;
    nets.reserve(static_cast<std::size_t>(mask.cols()));
    for (Index j = 0; j < mask.cols(); ++j) {
      nets.emplace_back(static_cast<Index>(mask.support(j).size()), pathway_spec);
    }
    model.pathway_.push_back(std::move(nets));
  }

  if (!model.residual_markers_.empty()) {
    model.residual_.emplace(static_cast<Index>(model.residual_markers_.size()),
                            residual_spec);
  }
  const Index k_last = model.masks_.back().cols();
  model.integrator_ = Subnet(k_last + model.residual_width(), integrator_spec);

  Index off = 0;
  for (const auto& layer : model.pathway_) {
    for (const auto& net : layer) off += net.parameter_count();
  }
  model.residual_offset_ = off;
  if (model.residual_) off += model.residual_->parameter_count();
  model.integrator_offset_ = off;
  off += model.integrator_.parameter_count();
  model.parameter_count_ = off;

  std::mt19937_64 rng(seed);
  for (auto& layer : model.pathway_) {
    for (auto& net : layer) net.init_parameters(rng);
  }
  if (model.residual_) model.residual_->init_parameters(rng);
  model.integrator_.init_parameters(rng);
  return model;
}

Index BinnModel::n_entities(int layer_index) const {
  return mask(layer_index).cols();
}

const LayerMask& BinnModel::mask(int layer_index) const {
  if (layer_index < 1 || layer_index > n_layers()) {
    throw UnknownEntity("layer index out of range: " + std::to_string(layer_index));
  }
  return masks_[static_cast<std::size_t>(layer_index - 1)];
}

const Subnet& BinnModel::pathway_subnet(int layer_index, Index entity) const {
  const auto& layer = pathway_.at(static_cast<std::size_t>(layer_index - 1));
  if (entity < 0 || entity >= static_cast<Index>(layer.size())) {
    throw UnknownEntity("entity index out of range");
  }
  return layer[static_cast<std::size_t>(entity)];
}

Matrix BinnModel::gather_columns(const Matrix& source, const std::vector<Index>& cols) const {
  Matrix out(source.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out.col(static_cast<Index>(c)) = source.col(cols[c]);
  }
  return out;
}

LatentTrace BinnModel::forward(const Matrix& X) const {
  return run_forward(X, std::nullopt, nullptr);
}

LatentTrace BinnModel::forward(const Matrix& X, const std::optional<LatentClamp>& clamp) const {
  return run_forward(X, clamp, nullptr);
}

LatentTrace BinnModel::forward(const GenotypeMatrix& X) const {
  return run_forward(X.values, std::nullopt, nullptr);
}

LatentTrace BinnModel::run_forward(const Matrix& X, const std::optional<LatentClamp>& clamp,
                                   ForwardCache* cache) const {
  if (X.cols() != n_markers()) {
    throw DimensionMismatch("forward: expected " + std::to_string(n_markers()) +
                            " markers, got " + std::to_string(X.cols()));
  }
  if (clamp) {
    if (clamp->layer_index < 1 || clamp->layer_index > n_layers() ||
        clamp->entity < 0 || clamp->entity >= n_entities(clamp->layer_index)) {
      throw UnknownEntity("latent clamp addresses a nonexistent entity");
    }
  }
  const Index n = X.rows();
  if (cache) {
    cache->pathway.assign(masks_.size(), {});
    cache->latents.clear();
  }

  LatentTrace trace;
  const Matrix* input = &X;
  Matrix current;
  for (std::size_t l = 0; l < masks_.size(); ++l) {
    const auto& mask = masks_[l];
    Matrix latents(n, mask.cols());
    if (cache) {
      cache->pathway[l].resize(static_cast<std::size_t>(mask.cols()));
    }
    for (Index j = 0; j < mask.cols(); ++j) {
      if (clamp && clamp->layer_index == static_cast<int>(l) + 1 && clamp->entity == j) {
        latents.col(j).setConstant(clamp->value);
        continue;
      }
      const Matrix sub = gather_columns(*input, mask.support(j));
      const auto& net = pathway_[l][static_cast<std::size_t>(j)];
      if (cache) {
        latents.col(j) = net.forward(sub, cache->pathway[l][static_cast<std::size_t>(j)]);
      } else {
        latents.col(j) = net.forward(sub);
      }
    }
    trace.per_layer_latents.push_back(latents);
    if (cache) cache->latents.push_back(latents);
    current = std::move(latents);
    input = &current;
  }

  Matrix residual_out(n, 0);
  if (residual_) {
    const Matrix xres = gather_columns(X, residual_markers_);
    if (cache) {
      residual_out = residual_->forward(xres, cache->residual);
    } else {
      residual_out = residual_->forward(xres);
    }
  }
  trace.residual_output = residual_out;

  Matrix z(n, current.cols() + residual_out.cols());
  z.leftCols(current.cols()) = current;
  if (residual_out.cols() > 0) z.rightCols(residual_out.cols()) = residual_out;

  Matrix yhat;
  if (cache) {
    yhat = integrator_.forward(z, cache->integrator);
  } else {
    yhat = integrator_.forward(z);
  }
  trace.prediction = yhat.col(0);
  if (cache) {
    cache->residual_out = std::move(residual_out);
    cache->prediction = trace.prediction;
  }
  return trace;
}

ParameterGradients BinnModel::backward(const Matrix& X, const Vector& upstream_gradient,
                                       const std::vector<Matrix>& latent_gradients) const {
  if (upstream_gradient.size() != X.rows()) {
    throw ShapeMismatch("backward: upstream gradient length != sample count");
  }
  ForwardCache cache;
  run_forward(X, std::nullopt, &cache);
  return run_backward(X, cache, upstream_gradient, latent_gradients);
}

Index BinnModel::subnet_offset(int layer, Index entity) const {
  Index off = 0;
  for (int l = 0; l < layer; ++l) {
    for (const auto& net : pathway_[static_cast<std::size_t>(l)]) {
      off += net.parameter_count();
    }
  }
  for (Index j = 0; j < entity; ++j) {
    off += pathway_[static_cast<std::size_t>(layer)][static_cast<std::size_t>(j)]
               .parameter_count();
  }
  return off;
}

ParameterGradients BinnModel::run_backward(const Matrix& X, const ForwardCache& cache,
                                           const Vector& d_prediction,
                                           const std::vector<Matrix>& latent_gradients) const {
  if (!latent_gradients.empty() && latent_gradients.size() != masks_.size()) {
    throw ShapeMismatch("backward: latent gradient count != layer count");
  }
  Vector grad = Vector::Zero(parameter_count_);
  const Index n = X.rows();
  const Index k_last = masks_.back().cols();
  const Index h_r = residual_width();

  // Integrator.
  const Matrix g_out = d_prediction;  // n x 1
  Matrix g_z(n, k_last + h_r);
  integrator_.backward(cache.integrator, g_out,
                       grad.segment(integrator_offset_, integrator_.parameter_count()),
                       &g_z);

  // Residual subnet (input gradients are not needed).
  if (residual_) {
    const Matrix g_res = g_z.rightCols(h_r);
    residual_->backward(cache.residual, g_res,
                        grad.segment(residual_offset_, residual_->parameter_count()),
                        nullptr);
  }

  // Pathway layers, top down.
  Matrix g_latent = g_z.leftCols(k_last);
  for (int l = n_layers() - 1; l >= 0; --l) {
    const auto& mask = masks_[static_cast<std::size_t>(l)];
    if (!latent_gradients.empty() && latent_gradients[static_cast<std::size_t>(l)].size() > 0) {
      const Matrix& extra = latent_gradients[static_cast<std::size_t>(l)];
      if (extra.rows() != n || extra.cols() != mask.cols()) {
        throw ShapeMismatch("backward: latent gradient shape mismatch at layer " +
                            std::to_string(l + 1));
      }
      g_latent += extra;
    }
    Matrix g_below;
    const bool need_input_grad = l > 0;
    if (need_input_grad) {
      g_below = Matrix::Zero(n, masks_[static_cast<std::size_t>(l - 1)].cols());
    }
    for (Index j = 0; j < mask.cols(); ++j) {
      const auto& net = pathway_[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
      const Index off = subnet_offset(l, j);
      Matrix g_in;
      net.backward(cache.pathway[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)],
                   g_latent.col(j), grad.segment(off, net.parameter_count()),
                   need_input_grad ? &g_in : nullptr);
      if (need_input_grad) {
        const auto& sup = mask.support(j);
        for (std::size_t c = 0; c < sup.size(); ++c) {
          g_below.col(sup[c]) += g_in.col(static_cast<Index>(c));
        }
      }
    }
    if (need_input_grad) g_latent = std::move(g_below);
  }
  return grad;
}

Vector BinnModel::parameters() const {
  Vector out(parameter_count_);
  Index off = 0;
  for (const auto& layer : pathway_) {
    for (const auto& net : layer) {
      net.get_parameters(out.segment(off, net.parameter_count()));
      off += net.parameter_count();
    }
  }
  if (residual_) {
    residual_->get_parameters(out.segment(off, residual_->parameter_count()));
    off += residual_->parameter_count();
  }
  integrator_.get_parameters(out.segment(off, integrator_.parameter_count()));
  return out;
}

void BinnModel::set_parameters(const Vector& theta) {
  if (theta.size() != parameter_count_) {
    throw ShapeMismatch("set_parameters: expected " + std::to_string(parameter_count_) +
                        " values, got " + std::to_string(theta.size()));
  }
  Index off = 0;
  for (auto& layer : pathway_) {
    for (auto& net : layer) {
      net.set_parameters(theta.segment(off, net.parameter_count()));
      off += net.parameter_count();
    }
  }
  if (residual_) {
    residual_->set_parameters(theta.segment(off, residual_->parameter_count()));
    off += residual_->parameter_count();
  }
  integrator_.set_parameters(theta.segment(off, integrator_.parameter_count()));
}

Vector BinnModel::predict(const Matrix& X) const { return forward(X).prediction; }

double BinnModel::loss_and_gradient(const Matrix& X, const Vector& y,
                                    const IntermediateTruth* truth,
                                    const LossConfig& config, Vector& grad) const {
  ForwardCache cache;
  run_forward(X, std::nullopt, &cache);
  const LossGradient lg = loss_gradient(y, cache.prediction, cache.latents, truth, config);
  grad = run_backward(X, cache, lg.d_prediction, lg.d_latents);
  return lg.value.total;
}

double BinnModel::add_penalty_gradient(const Matrix& X, const IntermediateTruth& truth,
                                       const LossConfig& config, Vector& grad) const {
  if (grad.size() != parameter_count_) {
    throw ShapeMismatch("add_penalty_gradient: gradient buffer size mismatch");
  }
  ForwardCache cache;
  run_forward(X, std::nullopt, &cache);
  const LossGradient lg = penalty_gradient(cache.latents, truth, config);
  grad += run_backward(X, cache, lg.d_prediction, lg.d_latents);
  return lg.value.total;
}

}  // namespace binn
