#include "binn/types.hpp"

#include <algorithm>
#include <unordered_set>

namespace binn {

namespace {

void check_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids) {
    if (!seen.insert(id).second) {
      throw Error(std::string("duplicate ") + what + " id: " + id);
    }
  }
}

}  // namespace

void GenotypeMatrix::validate() const {
  if (values.rows() != static_cast<Index>(line_ids.size())) {
    throw DimensionMismatch("genotype rows != line_ids length");
  }
  if (values.cols() != static_cast<Index>(marker_ids.size())) {
    throw DimensionMismatch("genotype cols != marker_ids length");
  }
  if (!population_labels.empty() &&
      population_labels.size() != line_ids.size()) {
    throw DimensionMismatch("population_labels length != line count");
  }
  check_unique(line_ids, "line");
  check_unique(marker_ids, "marker");
  if (!values.allFinite()) {
    throw Error("genotype matrix contains non-finite entries");
  }
}

LayerMask::LayerMask(int layer_index,
                     std::vector<std::string> input_feature_ids,
                     std::vector<std::string> entity_ids,
                     std::vector<std::vector<Index>> column_support)
    : layer_index_(layer_index),
      input_feature_ids_(std::move(input_feature_ids)),
      entity_ids_(std::move(entity_ids)),
      column_support_(std::move(column_support)) {
  if (column_support_.size() != entity_ids_.size()) {
    throw DimensionMismatch("mask support count != entity count");
  }
  if (layer_index_ < 1) {
    throw Error("mask layer_index must be >= 1");
  }
  check_unique(entity_ids_, "entity");
  const Index n_rows = rows();
  for (std::size_t j = 0; j < column_support_.size(); ++j) {
    auto& sup = column_support_[j];
    std::sort(sup.begin(), sup.end());
    sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
    if (sup.empty()) {
      throw EmptyEntity("entity '" + entity_ids_[j] + "' has no inputs");
    }
    if (sup.front() < 0 || sup.back() >= n_rows) {
      throw DimensionMismatch("mask support index out of range for entity '" +
                              entity_ids_[j] + "'");
    }
  }
}

LayerMask LayerMask::from_dense(int layer_index, const Matrix& entries,
                                std::vector<std::string> input_feature_ids,
                                std::vector<std::string> entity_ids) {
  if (entries.rows() != static_cast<Index>(input_feature_ids.size()) ||
      entries.cols() != static_cast<Index>(entity_ids.size())) {
    throw DimensionMismatch("dense mask shape does not match id lists");
  }
  std::vector<std::vector<Index>> support(
      static_cast<std::size_t>(entries.cols()));
  for (Index j = 0; j < entries.cols(); ++j) {
    for (Index i = 0; i < entries.rows(); ++i) {
      const double v = entries(i, j);
      if (v != 0.0 && v != 1.0) {
        throw Error("mask entries must be 0 or 1");
      }
      if (v == 1.0) support[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  return LayerMask(layer_index, std::move(input_feature_ids),
                   std::move(entity_ids), std::move(support));
}

bool LayerMask::connected(Index row, Index entity) const {
  const auto& sup = support(entity);
  return std::binary_search(sup.begin(), sup.end(), row);
}

std::vector<Index> LayerMask::unconnected_rows() const {
  std::vector<char> hit(static_cast<std::size_t>(rows()), 0);
  for (const auto& sup : column_support_) {
    for (Index i : sup) hit[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<Index> out;
  for (Index i = 0; i < rows(); ++i) {
    if (!hit[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

Matrix LayerMask::to_dense() const {
  Matrix m = Matrix::Zero(rows(), cols());
  for (Index j = 0; j < cols(); ++j) {
    for (Index i : support(j)) m(i, j) = 1.0;
  }
  return m;
}

}  // namespace binn
