#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "binn/errors.hpp"

namespace binn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// n x p allele-dosage matrix with line/marker identifiers. The only input a
/// trained model needs at inference time.
struct GenotypeMatrix {
  Matrix values;                                // n x p, conventionally {0,1,2}
  std::vector<std::string> line_ids;            // n
  std::vector<std::string> marker_ids;          // p
  std::vector<std::string> population_labels;   // empty or n

  Index n_lines() const { return values.rows(); }
  Index n_markers() const { return values.cols(); }

  // Throws on duplicate ids, shape disagreement, or non-finite entries.
  void validate() const;
};

/// Binary connectivity prior for one omics layer: which input features feed
/// which biological entity. Stored as per-entity support lists, so a
/// connection that is masked out simply does not exist.
class LayerMask {
 public:
  LayerMask(int layer_index, std::vector<std::string> input_feature_ids,
            std::vector<std::string> entity_ids,
            std::vector<std::vector<Index>> column_support);

  // entries must be exactly 0 or 1.
  static LayerMask from_dense(int layer_index, const Matrix& entries,
                              std::vector<std::string> input_feature_ids,
                              std::vector<std::string> entity_ids);

  int layer_index() const { return layer_index_; }
  Index rows() const { return static_cast<Index>(input_feature_ids_.size()); }
  Index cols() const { return static_cast<Index>(entity_ids_.size()); }

  const std::vector<Index>& support(Index entity) const {
    return column_support_.at(static_cast<std::size_t>(entity));
  }
  bool connected(Index row, Index entity) const;

  const std::vector<std::string>& input_feature_ids() const { return input_feature_ids_; }
  const std::vector<std::string>& entity_ids() const { return entity_ids_; }

  // Rows that appear in no entity's support (candidates for the residual net).
  std::vector<Index> unconnected_rows() const;

  Matrix to_dense() const;

 private:
  int layer_index_ = 1;
  std::vector<std::string> input_feature_ids_;
  std::vector<std::string> entity_ids_;
  std::vector<std::vector<Index>> column_support_;  // sorted, unique, nonempty
};

/// Per-layer latent activations captured during a forward pass.
struct LatentTrace {
  std::vector<Matrix> per_layer_latents;  // [l] is n x k_l
  Matrix residual_output;                 // n x h_r (0 columns if no residual net)
  Vector prediction;                      // n
};

}  // namespace binn
