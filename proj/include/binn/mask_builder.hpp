#pragma once

#include <cstdint>
#include <map>

#include "binn/types.hpp"

namespace binn {

/// How a layer mask is produced: direct pathway tables (the synthetic case)
/// or elastic-net gene selection followed by association-based SNP
/// nomination (the data-driven case).
struct MaskRecipe {
  std::string source = "pathway_table";  // or "elastic_net_plus_association"
  double l1_ratio = 0.10;
  int top_k_snps_per_gene = 20;
  int cv_folds = 5;
};

struct GeneSelection {
  std::vector<std::string> gene_ids;  // genes with nonzero coefficients
  double chosen_penalty = 0.0;
  double l1_ratio = 0.0;
};

/// Elastic-net gene selection against the trait, penalty chosen by K-fold CV
/// over the supplied (training) lines. Throws EmptySelection when nothing
/// survives.
GeneSelection select_genes(const Matrix& expression,
                           const std::vector<std::string>& gene_ids, const Vector& y,
                           double l1_ratio, int cv_folds, std::uint64_t seed);

struct SnpNomination {
  std::vector<Index> markers;  // top_k marker indices, best first
  bool degenerate = false;     // expression (or every marker) was constant
};

/// Top markers by squared marginal correlation with one gene's expression;
/// ties broken by marker index. Degenerate inputs yield an
/// arbitrary-but-deterministic ranking with the warning flag set.
SnpNomination nominate_snps(const Matrix& X, const Vector& expression_col, Index top_k);

struct AssembledMask {
  LayerMask mask;
  std::vector<std::string> residual_marker_ids;  // markers in no entity's list
};

/// Builds a layer-1 mask whose column j's support is gene j's marker list.
/// Entities are ordered by id, so the result is independent of input order.
AssembledMask assemble_mask(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& entity_markers,
    const std::vector<std::string>& all_marker_ids);

/// Mask straight from a known gene -> entity table (markers here are genes).
AssembledMask mask_from_pathway_table(const std::map<std::string, std::string>& gene_to_entity,
                                      const std::vector<std::string>& all_marker_ids);

}  // namespace binn
