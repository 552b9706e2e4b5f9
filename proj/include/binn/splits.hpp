#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "binn/types.hpp"

namespace binn {

enum class SplitScheme { kPooled, kWithinPopulation, kLeaveOnePopulationOut };

SplitScheme scheme_from_string(const std::string& s);
std::string to_string(SplitScheme scheme);

struct Fold {
  std::vector<Index> train;
  std::vector<Index> val;
};

struct OuterSplit {
  int index = 0;
  std::string population;  // "all", the subject population, or the held-out one
  std::vector<Index> train;
  std::vector<Index> test;
  std::vector<Fold> folds;
};

struct SplitPlan {
  SplitScheme scheme = SplitScheme::kPooled;
  int outer_splits = 5;
  int inner_folds = 5;
  double train_fraction = 0.2;
  std::uint64_t seed = 0;
  std::vector<OuterSplit> splits;
};

/// Deterministic split plan.
///
/// pooled: S independent train/test splits, stratified by population when
/// labels are given; within_population: S splits per population, train and
/// test both drawn from that population; leave_one_population_out: one split
/// per population with that population as the test set.
SplitPlan make_splits(const std::vector<std::string>& line_ids,
                      const std::vector<std::string>& population_labels,
                      SplitScheme scheme, int outer_splits, int inner_folds,
                      std::uint64_t seed, double train_fraction = 0.2);

/// F-fold partition of `pool` (disjoint, exhaustive). Throws
/// InsufficientLines if a fold would be empty.
std::vector<Fold> make_folds(const std::vector<Index>& pool, int n_folds,
                             std::uint64_t seed);

}  // namespace binn
