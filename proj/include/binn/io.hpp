#pragma once

#include <filesystem>
#include <map>
#include <optional>

#include <json.hpp>

#include "binn/baselines.hpp"
#include "binn/mask_builder.hpp"
#include "binn/model.hpp"
#include "binn/synthetic.hpp"
#include "binn/training.hpp"
#include "binn/types.hpp"

namespace binn {

namespace fs = std::filesystem;

/// Shortest round-trip decimal rendering (used for every CSV number so
/// export -> ingest is bit-exact).
std::string format_double(double v);

/// Writes via a temp file in the same directory, then renames into place.
void atomic_write_text(const fs::path& path, const std::string& content);

struct NamedMatrix {
  Matrix values;                        // rows = lines
  std::vector<std::string> line_ids;    // row labels
  std::vector<std::string> column_ids;  // column labels
};

// --- CSV ------------------------------------------------------------------

void write_genotype_csv(const fs::path& path, const GenotypeMatrix& X);
/// Empty cells and "NA" are mean-imputed per marker; the count is returned.
GenotypeMatrix read_genotype_csv(const fs::path& path, int* imputed_entries = nullptr);

void write_named_matrix_csv(const fs::path& path, const NamedMatrix& m,
                            const std::string& id_header = "line_id");
NamedMatrix read_named_matrix_csv(const fs::path& path,
                                  const std::string& id_header = "line_id");

void write_phenotype_csv(const fs::path& path, const std::vector<std::string>& line_ids,
                         const Vector& y);
void write_population_csv(const fs::path& path, const std::vector<std::string>& line_ids,
                          const std::vector<std::string>& labels);

// --- JSON -----------------------------------------------------------------

nlohmann::json mask_to_json(const LayerMask& mask, const MaskRecipe* recipe = nullptr);
LayerMask mask_from_json(const nlohmann::json& j);
void write_mask_json(const fs::path& path, const LayerMask& mask,
                     const MaskRecipe* recipe = nullptr);
LayerMask read_mask_json(const fs::path& path);

void write_causal_table_json(const fs::path& path,
                             const std::map<std::string, std::string>& table);
std::map<std::string, std::string> read_causal_table_json(const fs::path& path);

/// Versioned model containers. Parameters are the flat canonical vector
/// (pathway subnets layer-major then entity; per dense layer the out-by-in
/// weight matrix column-major, then bias; then residual net, then
/// integrator).
nlohmann::json binn_to_json(const BinnModel& model);
BinnModel binn_from_json(const nlohmann::json& j);
nlohmann::json ridge_to_json(const RidgeModel& model);
RidgeModel ridge_from_json(const nlohmann::json& j);
nlohmann::json fcn_to_json(const FcnModel& model);
FcnModel fcn_from_json(const nlohmann::json& j);
nlohmann::json subnet_spec_to_json(const SubnetSpec& spec);
SubnetSpec subnet_spec_from_json(const nlohmann::json& j);
nlohmann::json standardizer_to_json(const Standardizer& s);
Standardizer standardizer_from_json(const nlohmann::json& j);

// --- dataset ingestion ------------------------------------------------------

struct IngestPaths {
  fs::path genotype;
  std::optional<fs::path> phenotype;
  std::optional<fs::path> intermediates;  // metabolites or expression as truth
  std::optional<fs::path> expression;     // mask-recipe input
  std::optional<fs::path> populations;
};

struct DatasetBundle {
  GenotypeMatrix genotype;
  Vector phenotype;
  std::optional<NamedMatrix> intermediates;  // aligned to genotype line order
  std::optional<NamedMatrix> expression;
  int imputed_entries = 0;
};

/// Loads, validates headers, aligns every file to the genotype's line order
/// by id, and mean-imputes missing genotype entries. Misaligned ids raise
/// IdMismatch naming the offenders.
DatasetBundle ingest(const IngestPaths& paths);

/// Writes a synthetic dataset in exactly the formats `ingest` reads.
void export_dataset(const fs::path& out_dir, const SyntheticDataset& data);

}  // namespace binn
