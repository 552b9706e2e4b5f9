#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>

#include "binn/types.hpp"

namespace binn {

inline constexpr std::array<const char*, 4> kMetaboliteNames = {"A", "S", "CK", "SL"};

int metabolite_index(const std::string& name);

/// Configuration of the synthetic genotype -> metabolite -> phenotype
/// benchmark. Noise fractions scale additive Gaussian noise by the noise-free
/// standard deviation of the corrupted quantity.
struct GeneratorConfig {
  Index n_lines = 1000;
  Index n_genes = 1600;
  std::array<Index, 4> genes_per_metabolite = {400, 400, 400, 400};
  double intermediate_noise_fraction = 0.05;
  double phenotype_noise_fraction = 0.10;
  std::string dominant_metabolite = "S";
  double dominant_weight_factor = 3.0;
  std::array<double, 4> phenotype_weights = {1.0, 1.0, 1.0, 1.0};
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> noise_seed;  // defaults to a stream derived from seed
};

/// The metabolite -> phenotype map with all calibration constants frozen at
/// generation time, so it can be differentiated independently of the dataset.
/// Outgrowth time decreases with S and CK and increases with A and SL via a
/// steep logistic switch; the dominant metabolite's weight is scaled up.
struct PhenotypeMap {
  std::array<double, 4> met_mean{};
  std::array<double, 4> met_sd{};
  std::array<double, 4> signed_weights{};
  double combo_mean = 0.0;
  double combo_sd = 1.0;
  double switch_gain = 1.0;
  double out_mean = 0.0;
  double out_sd = 1.0;

  double operator()(const std::array<double, 4>& metabolites) const;
};

struct SyntheticDataset {
  GenotypeMatrix X;
  Matrix metabolites;             // recorded (noisy) intermediate traits, n x 4
  Matrix metabolites_noise_free;  // n x 4
  Vector phenotype;               // recorded (noisy), standardized units
  Vector phenotype_noise_free;
  std::vector<std::string> metabolite_ids;      // A, S, CK, SL
  std::map<std::string, std::string> causal_table;  // gene id -> metabolite id
  PhenotypeMap phenotype_map;
  GeneratorConfig config;
};

/// Deterministic per (config, seed); the noise stream is separate so noiseless
/// regeneration is independent of the noise seed.
SyntheticDataset generate(const GeneratorConfig& config);

/// Ground-truth per-metabolite sensitivity: the mean absolute change of the
/// generator's phenotype map per one-standard-deviation metabolite
/// perturbation, numerically differentiated at sampled metabolite states.
/// Sorted descending, ties broken by metabolite id.
std::vector<std::pair<std::string, double>> true_sensitivity(const SyntheticDataset& data);
std::vector<std::pair<std::string, double>> true_sensitivity(const GeneratorConfig& config);

}  // namespace binn
