#include "binn/mask_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "binn/baselines.hpp"
#include "binn/metrics.hpp"
#include "binn/splits.hpp"
#include "binn/training.hpp"

namespace binn {

GeneSelection select_genes(const Matrix& expression,
                           const std::vector<std::string>& gene_ids, const Vector& y,
                           double l1_ratio, int cv_folds, std::uint64_t seed) {
  const Index n = expression.rows();
  const Index g = expression.cols();
  if (g != static_cast<Index>(gene_ids.size())) {
    throw DimensionMismatch("select_genes: gene_ids length != expression columns");
  }
  if (y.size() != n) throw LengthMismatch("select_genes: y length != expression rows");
  if (l1_ratio <= 0.0 || l1_ratio > 1.0) {
    throw Error("select_genes: l1_ratio must lie in (0, 1]");
  }

  // Work on standardized expression so the penalty treats genes comparably.
  std::vector<Index> all_rows(static_cast<std::size_t>(n));
  std::iota(all_rows.begin(), all_rows.end(), Index{0});
  const Standardizer scaler = Standardizer::fit(expression, y, all_rows);
  const Matrix Xs = scaler.gather_rows(expression, all_rows);
  const Vector yc = y.array() - y.mean();

  // Penalty path: log-spaced from the all-zero critical value downward.
  const double penalty_max =
      std::max(lasso_critical_penalty(Xs, yc) / l1_ratio, 1e-12);
  constexpr int kPathPoints = 30;
  constexpr double kPathShrink = 1e-3;
  std::vector<double> path;
  for (int i = 0; i < kPathPoints; ++i) {
    const double f = static_cast<double>(i) / (kPathPoints - 1);
    path.push_back(penalty_max * std::pow(kPathShrink, f));
  }

  const auto folds = make_folds(all_rows, cv_folds, seed);
  std::vector<double> cv_mse(path.size(), 0.0);
  for (const auto& fold : folds) {
    const Matrix Xtr = gather_rows_raw(Xs, fold.train);
    const Vector ytr = gather(yc, fold.train);
    const Matrix Xva = gather_rows_raw(Xs, fold.val);
    const Vector yva = gather(yc, fold.val);
    for (std::size_t i = 0; i < path.size(); ++i) {
      const auto model = elastic_net_fit(Xtr, ytr, path[i], l1_ratio);
      cv_mse[i] += mse(yva, model.predict(Xva));
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (cv_mse[i] < cv_mse[best]) best = i;
  }

  const auto final_model = elastic_net_fit(Xs, yc, path[best], l1_ratio);
  GeneSelection selection;
  selection.chosen_penalty = path[best];
  selection.l1_ratio = l1_ratio;
  for (Index k : final_model.support()) {
    selection.gene_ids.push_back(gene_ids[static_cast<std::size_t>(k)]);
  }
  if (selection.gene_ids.empty()) {
    throw EmptySelection("no gene survived the elastic net at l1_ratio=" +
                         std::to_string(l1_ratio) + "; relax the ratio");
  }
  return selection;
}

SnpNomination nominate_snps(const Matrix& X, const Vector& expression_col, Index top_k) {
  const Index p = X.cols();
  if (expression_col.size() != X.rows()) {
    throw LengthMismatch("nominate_snps: expression length != genotype rows");
  }
  if (top_k < 1 || top_k > p) {
    throw Error("nominate_snps: top_k must lie in [1, p]");
  }

  SnpNomination result;
  const double e_mean = expression_col.mean();
  const Vector ec = expression_col.array() - e_mean;
  const double see = ec.squaredNorm();
  if (see <= 0.0) result.degenerate = true;

  std::vector<double> stat(static_cast<std::size_t>(p), 0.0);
  bool any_marker_varies = false;
  for (Index m = 0; m < p; ++m) {
    const Vector xc = X.col(m).array() - X.col(m).mean();
    const double sxx = xc.squaredNorm();
    if (sxx <= 0.0 || see <= 0.0) continue;
    any_marker_varies = true;
    const double c = xc.dot(ec);
    stat[static_cast<std::size_t>(m)] = (c * c) / (sxx * see);  // squared correlation
  }
  if (!any_marker_varies) result.degenerate = true;

  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double sa = stat[static_cast<std::size_t>(a)];
    const double sb = stat[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  result.markers.assign(order.begin(), order.begin() + top_k);
  return result;
}

AssembledMask assemble_mask(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& entity_markers,
    const std::vector<std::string>& all_marker_ids) {
  std::map<std::string, Index> marker_index;
  for (std::size_t i = 0; i < all_marker_ids.size(); ++i) {
    marker_index[all_marker_ids[i]] = static_cast<Index>(i);
  }

  // Sort entities by id so assembly is independent of input ordering.
  auto sorted = entity_markers;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::string> entity_ids;
  std::vector<std::vector<Index>> support;
  std::set<Index> used;
  for (const auto& [entity, markers] : sorted) {
    if (markers.empty()) {
      throw EmptyEntity("entity '" + entity + "' has an empty marker list");
    }
    std::vector<Index> rows;
    for (const auto& id : markers) {
      const auto it = marker_index.find(id);
      if (it == marker_index.end()) {
        throw IdMismatch("unknown marker id in mask: " + id);
      }
      rows.push_back(it->second);
      used.insert(it->second);
    }
    entity_ids.push_back(entity);
    support.push_back(std::move(rows));
  }

  AssembledMask out{LayerMask(1, all_marker_ids, entity_ids, support), {}};
  for (std::size_t i = 0; i < all_marker_ids.size(); ++i) {
    if (!used.count(static_cast<Index>(i))) {
      out.residual_marker_ids.push_back(all_marker_ids[i]);
    }
  }
  return out;
}

AssembledMask mask_from_pathway_table(
    const std::map<std::string, std::string>& gene_to_entity,
    const std::vector<std::string>& all_marker_ids) {
  std::map<std::string, std::vector<std::string>> by_entity;
  for (const auto& [gene, entity] : gene_to_entity) {
    by_entity[entity].push_back(gene);
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> entity_markers(
      by_entity.begin(), by_entity.end());
  return assemble_mask(entity_markers, all_marker_ids);
}

}  // namespace binn
