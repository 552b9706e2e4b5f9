#include "binn/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace binn {

SplitScheme scheme_from_string(const std::string& s) {
  if (s == "pooled") return SplitScheme::kPooled;
  if (s == "within_population") return SplitScheme::kWithinPopulation;
  if (s == "leave_one_population_out") return SplitScheme::kLeaveOnePopulationOut;
  throw Error("unknown split scheme: " + s);
}

std::string to_string(SplitScheme scheme) {
  switch (scheme) {
    case SplitScheme::kPooled: return "pooled";
    case SplitScheme::kWithinPopulation: return "within_population";
    case SplitScheme::kLeaveOnePopulationOut: return "leave_one_population_out";
  }
  return "pooled";
}

namespace {

// Population -> member indices, in deterministic (sorted) population order.
std::map<std::string, std::vector<Index>> group_by_population(
    const std::vector<std::string>& labels, Index n) {
  std::map<std::string, std::vector<Index>> groups;
  if (labels.empty()) {
    groups["all"] = {};
    auto& v = groups["all"];
    for (Index i = 0; i < n; ++i) v.push_back(i);
  } else {
    for (Index i = 0; i < n; ++i) groups[labels[static_cast<std::size_t>(i)]].push_back(i);
  }
  return groups;
}

// Stratified train/test split over the given groups.
OuterSplit split_groups(const std::map<std::string, std::vector<Index>>& groups,
                        double train_fraction, std::mt19937_64& rng) {
  OuterSplit split;
  for (const auto& [name, members] : groups) {
    std::vector<Index> shuffled = members;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(shuffled.size())));
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      (i < n_train ? split.train : split.test).push_back(shuffled[i]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  if (split.train.empty() || split.test.empty()) {
    throw InsufficientLines("split produced an empty train or test set");
  }
  return split;
}

}  // namespace

std::vector<Fold> make_folds(const std::vector<Index>& pool, int n_folds,
                             std::uint64_t seed) {
  if (n_folds < 2) throw InsufficientLines("need at least 2 folds");
  if (static_cast<int>(pool.size()) < n_folds) {
    throw InsufficientLines("fold would be empty: pool of " +
                            std::to_string(pool.size()) + " lines for " +
                            std::to_string(n_folds) + " folds");
  }
  std::vector<Index> shuffled = pool;
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  std::vector<std::vector<Index>> chunks(static_cast<std::size_t>(n_folds));
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    chunks[i % static_cast<std::size_t>(n_folds)].push_back(shuffled[i]);
  }
  std::vector<Fold> folds;
  for (int f = 0; f < n_folds; ++f) {
    Fold fold;
    fold.val = chunks[static_cast<std::size_t>(f)];
    for (int g = 0; g < n_folds; ++g) {
      if (g == f) continue;
      fold.train.insert(fold.train.end(), chunks[static_cast<std::size_t>(g)].begin(),
                        chunks[static_cast<std::size_t>(g)].end());
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.val.begin(), fold.val.end());
    folds.push_back(std::move(fold));
  }
  return folds;
}

SplitPlan make_splits(const std::vector<std::string>& line_ids,
                      const std::vector<std::string>& population_labels,
                      SplitScheme scheme, int outer_splits, int inner_folds,
                      std::uint64_t seed, double train_fraction) {
  const Index n = static_cast<Index>(line_ids.size());
  if (!population_labels.empty() && population_labels.size() != line_ids.size()) {
    throw DimensionMismatch("population labels length != line count");
  }
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw Error("train_fraction must lie strictly between 0 and 1");
  }

  SplitPlan plan;
  plan.scheme = scheme;
  plan.outer_splits = outer_splits;
  plan.inner_folds = inner_folds;
  plan.train_fraction = train_fraction;
  plan.seed = seed;

  std::mt19937_64 rng(seed);
  const auto groups = group_by_population(population_labels, n);

  int index = 0;
  if (scheme == SplitScheme::kPooled) {
    for (int s = 0; s < outer_splits; ++s) {
      OuterSplit split = split_groups(groups, train_fraction, rng);
      split.index = index++;
      split.population = "all";
      split.folds = make_folds(split.train, inner_folds, rng());
      plan.splits.push_back(std::move(split));
    }
  } else if (scheme == SplitScheme::kWithinPopulation) {
    for (const auto& [name, members] : groups) {
      std::map<std::string, std::vector<Index>> one{{name, members}};
      for (int s = 0; s < outer_splits; ++s) {
        OuterSplit split = split_groups(one, train_fraction, rng);
        split.index = index++;
        split.population = name;
        split.folds = make_folds(split.train, inner_folds, rng());
        plan.splits.push_back(std::move(split));
      }
    }
  } else {  // leave one population out
    if (groups.size() < 2) {
      throw InsufficientLines("leave-one-population-out needs at least 2 populations");
    }
    for (const auto& [held_out, members] : groups) {
      OuterSplit split;
      split.index = index++;
      split.population = held_out;
      split.test = members;
      for (const auto& [other, other_members] : groups) {
        if (other == held_out) continue;
        split.train.insert(split.train.end(), other_members.begin(), other_members.end());
      }
      std::sort(split.train.begin(), split.train.end());
      std::sort(split.test.begin(), split.test.end());
      split.folds = make_folds(split.train, inner_folds, rng());
      plan.splits.push_back(std::move(split));
    }
  }
  return plan;
}

}  // namespace binn
