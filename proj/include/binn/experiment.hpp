#pragma once

#include <map>
#include <set>
#include <variant>

#include "binn/io.hpp"
#include "binn/mask_builder.hpp"
#include "binn/model.hpp"
#include "binn/sensitivity.hpp"
#include "binn/splits.hpp"
#include "binn/training.hpp"

namespace binn {

enum class Family { kBinnMse, kBinnSoft, kBinnHard, kRidge, kFcn };

Family family_from_string(const std::string& s);
std::string to_string(Family family);

/// Where the split masks come from. Data-driven recipes are re-run per outer
/// split on training lines only.
struct MaskSource {
  enum class Kind { kFixed, kPathwayTable, kElasticNetAssociation };
  Kind kind = Kind::kPathwayTable;
  std::vector<LayerMask> fixed;
  std::map<std::string, std::string> table;  // gene -> entity
  MaskRecipe recipe;
};

std::vector<double> default_alpha_grid();  // 13 log points, 1e-3 .. 1e3

/// Sizes rounded from first * (last/first)^(k/(points-1)).
std::vector<Index> geometric_sizes(Index first, Index last, int points);

struct ExperimentConfig {
  std::vector<Family> families;
  SplitScheme scheme = SplitScheme::kPooled;
  int outer_splits = 5;
  int inner_folds = 5;
  double train_fraction = 0.2;
  std::vector<Index> train_sizes;          // empty = full training pool
  std::vector<std::uint64_t> seeds = {0};  // replicate seeds
  TrainConfig train;
  std::vector<double> lambda_grid = {0.1};
  std::vector<double> alpha_grid = default_alpha_grid();
  double label_fraction = 1.0;  // fraction of lines with intermediate labels
  int fcn_hidden_layers = 1;
  int jobs = 1;

  SubnetSpec pathway_spec = default_pathway_spec();
  SubnetSpec residual_spec = default_pathway_spec();
  SubnetSpec integrator_spec = default_integrator_spec();

  static SubnetSpec default_pathway_spec();
  static SubnetSpec default_integrator_spec();
};

struct MetricsRow {
  std::string family;
  int split = 0;
  int fold = 0;
  Index size = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double pearson = 0.0;
  double spearman = 0.0;
  double wall_seconds = 0.0;
  bool ok = true;
  std::string error;  // not part of the CSV schema; failed cells carry nan metrics
};

struct EnsembleMember {
  int split = 0;
  int fold = 0;
  Index size = 0;
  std::uint64_t seed = 0;
  Family family = Family::kBinnMse;
  double lambda = 0.0;  // chosen for binn_soft / binn_hard
  double alpha = 0.0;   // chosen for ridge
  double val_mse = 0.0;
  Standardizer scaler;
  std::vector<Index> test_rows;  // outer test set of this member's split
  std::variant<RidgeModel, BinnModel, FcnModel> model;
};

struct Ensemble {
  std::vector<std::string> line_ids;
  std::vector<std::string> marker_ids;
  std::vector<EnsembleMember> members;
};

struct SplitAudit {
  std::uint64_t seed = 0;
  int split = 0;
  std::vector<Index> test;
  std::set<Index> training;    // gradient / fit computations
  std::set<Index> selection;   // hyperparameter and early-stopping decisions
  std::set<Index> mask_build;  // mask-construction inputs
};

struct LeakageAudit {
  std::vector<SplitAudit> splits;
  bool clean() const;
  std::string describe_violations() const;
};

struct RunResult {
  std::vector<MetricsRow> rows;
  Ensemble ensemble;
  LeakageAudit audit;
};

/// Full protocol: replicate seeds x outer splits x training sizes x model
/// families, with per-split mask construction, inner-fold hyperparameter
/// selection, and early stopping. Failing cells are marked, not fatal.
RunResult run_experiment(const DatasetBundle& data, const MaskSource& mask_source,
                         const ExperimentConfig& config);

std::string metrics_csv_header();
std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const fs::path& path);

nlohmann::json ensemble_to_json(const Ensemble& ensemble);
Ensemble ensemble_from_json(const nlohmann::json& j);
void write_ensemble_json(const fs::path& path, const Ensemble& ensemble);
Ensemble read_ensemble_json(const fs::path& path);

/// Ensemble predictions on new genotype-only data: the mean over members, in
/// original phenotype units. Markers must match the training layout.
Vector ensemble_predict(const Ensemble& ensemble, const GenotypeMatrix& X);

/// Clamp-based sensitivity over every BINN member, each evaluated on its own
/// held-out test rows. layer_index -1 means the final omics layer.
SensitivityReport ensemble_sensitivity(const Ensemble& ensemble, const Matrix& X,
                                       double a, int layer_index = -1);

struct LatentCorrRow {
  int split = 0;
  int fold = 0;
  std::string entity_id;
  double r = 0.0;
};

/// Latent-vs-measured-intermediate Pearson r per BINN member on its test rows.
std::vector<LatentCorrRow> ensemble_latent_correlations(const Ensemble& ensemble,
                                                        const Matrix& X,
                                                        const NamedMatrix& truth,
                                                        int layer_index = -1);

// --- report aggregation -----------------------------------------------------

struct SummaryRow {
  std::string family;
  Index size = 0;
  std::uint64_t seed = 0;
  int cells = 0;
  double mse_median = 0.0, mse_iqr = 0.0;
  double pearson_median = 0.0, pearson_iqr = 0.0;
  double spearman_median = 0.0, spearman_iqr = 0.0;
};

/// Type-7 (linear interpolation) quantile of a sample.
double quantile(std::vector<double> values, double q);

/// One row per (family, size, seed): median and IQR over splits and folds.
std::vector<SummaryRow> summarize_metrics(const std::vector<MetricsRow>& rows);
void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows);

/// Long-format percent change of each family's median metric against a
/// baseline family at the same (size, seed).
void write_percent_change_csv(const fs::path& path, const std::vector<SummaryRow>& rows,
                              const std::string& baseline_family);

}  // namespace binn
