#include "binn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace binn {

namespace {

constexpr double kMetaboliteGain = 1.8;  // saturation of gene -> metabolite maps
constexpr double kSwitchGain = 3.0;      // steepness of the outgrowth switch
// Gene effects decay exponentially with rank inside each metabolite's block:
// every causal gene contributes, but a core of ~2*kEffectDecay genes carries
// most of the variance, the usual oligogenic-leaning architecture.
constexpr double kEffectDecay = 5.0;
constexpr std::uint64_t kNoiseStreamSalt = 0x9E3779B97F4A7C15ull;

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double mean_of(const Vector& v) { return v.size() > 0 ? v.mean() : 0.0; }

double sd_of(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size()));
}

int dominant_index(const GeneratorConfig& config) {
  return metabolite_index(config.dominant_metabolite);
}

}  // namespace

int metabolite_index(const std::string& name) {
  for (std::size_t i = 0; i < kMetaboliteNames.size(); ++i) {
    if (name == kMetaboliteNames[i]) return static_cast<int>(i);
  }
  throw UnknownEntity("unknown metabolite: " + name);
}

double PhenotypeMap::operator()(const std::array<double, 4>& metabolites) const {
  double u = 0.0;
  for (int c = 0; c < 4; ++c) {
    const double sd = met_sd[static_cast<std::size_t>(c)] > 0.0
                          ? met_sd[static_cast<std::size_t>(c)]
                          : 1.0;
    const double z = (metabolites[static_cast<std::size_t>(c)] -
                      met_mean[static_cast<std::size_t>(c)]) / sd;
    u += signed_weights[static_cast<std::size_t>(c)] * z;
  }
  const double u_std = (u - combo_mean) / (combo_sd > 0.0 ? combo_sd : 1.0);
  const double v = sigmoid(switch_gain * u_std);
  return (v - out_mean) / (out_sd > 0.0 ? out_sd : 1.0);
}

SyntheticDataset generate(const GeneratorConfig& config) {
  if (config.n_lines < 1) throw Error("generator: n_lines must be >= 1");
  if (config.intermediate_noise_fraction < 0 || config.phenotype_noise_fraction < 0) {
    throw Error("generator: noise fractions must be nonnegative");
  }
  Index causal_total = 0;
  for (Index c : config.genes_per_metabolite) {
    if (c < 1) throw InvalidPartition("each metabolite needs at least one causal gene");
    causal_total += c;
  }
  if (causal_total > config.n_genes) {
    throw InvalidPartition("causal gene partition exceeds n_genes");
  }
  const int dom = dominant_index(config);

  const Index n = config.n_lines;
  const Index p = config.n_genes;
  std::mt19937_64 structure_rng(config.seed);
  std::mt19937_64 noise_rng(config.noise_seed.value_or(config.seed ^ kNoiseStreamSalt));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticDataset data;
  data.config = config;
  data.metabolite_ids.assign(kMetaboliteNames.begin(), kMetaboliteNames.end());

  // Genotypes: independent dosage draws from per-marker allele frequencies.
  Vector freq(p);
  {
    std::uniform_real_distribution<double> freq_dist(0.05, 0.5);
    for (Index m = 0; m < p; ++m) freq(m) = freq_dist(structure_rng);
  }
  data.X.values.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index m = 0; m < p; ++m) {
      const double q = freq(m);
      const double d = (unit(structure_rng) < q ? 1.0 : 0.0) +
                       (unit(structure_rng) < q ? 1.0 : 0.0);
      data.X.values(i, m) = d;
    }
  }
  data.X.line_ids.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) data.X.line_ids.push_back("line" + std::to_string(i));
  data.X.marker_ids.reserve(static_cast<std::size_t>(p));
  for (Index m = 0; m < p; ++m) data.X.marker_ids.push_back("gene" + std::to_string(m));

  // Causal partition: consecutive blocks of genes per metabolite; leftover
  // genes are non-causal.
  std::array<std::vector<Index>, 4> causal_genes;
  Index next = 0;
  for (int c = 0; c < 4; ++c) {
    for (Index k = 0; k < config.genes_per_metabolite[static_cast<std::size_t>(c)]; ++k) {
      causal_genes[static_cast<std::size_t>(c)].push_back(next);
      data.causal_table[data.X.marker_ids[static_cast<std::size_t>(next)]] =
          kMetaboliteNames[static_cast<std::size_t>(c)];
      ++next;
    }
  }

  // Gene effect sizes, all positive.
  Vector gene_weight(p);
  {
    std::uniform_real_distribution<double> w_dist(0.5, 1.5);
    for (Index g = 0; g < p; ++g) gene_weight(g) = w_dist(structure_rng);
  }

  // Metabolites: saturating transform of the weighted causal dosage sum.
  data.metabolites_noise_free.resize(n, 4);
  for (int c = 0; c < 4; ++c) {
    Vector raw = Vector::Zero(n);
    Index rank = 0;
    for (Index g : causal_genes[static_cast<std::size_t>(c)]) {
      const double effect =
          gene_weight(g) * std::exp(-static_cast<double>(rank++) / kEffectDecay);
      raw += data.X.values.col(g) * effect;
    }
    const double m = mean_of(raw);
    const double s = sd_of(raw);
    const double scale = s > 0.0 ? s : 1.0;
    for (Index i = 0; i < n; ++i) {
      data.metabolites_noise_free(i, c) = sigmoid(kMetaboliteGain * (raw(i) - m) / scale);
    }
  }

  // Phenotype map calibration: signs encode that outgrowth time falls with
  // S and CK and rises with A and SL; the dominant metabolite is upweighted.
  PhenotypeMap& map = data.phenotype_map;
  const std::array<double, 4> signs = {+1.0, -1.0, -1.0, +1.0};
  for (int c = 0; c < 4; ++c) {
    map.met_mean[static_cast<std::size_t>(c)] = mean_of(data.metabolites_noise_free.col(c));
    map.met_sd[static_cast<std::size_t>(c)] = sd_of(data.metabolites_noise_free.col(c));
    double w = config.phenotype_weights[static_cast<std::size_t>(c)];
    if (c == dom) w *= config.dominant_weight_factor;
    map.signed_weights[static_cast<std::size_t>(c)] = signs[static_cast<std::size_t>(c)] * w;
  }
  map.switch_gain = kSwitchGain;

  Vector combo = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    for (int c = 0; c < 4; ++c) {
      const double sd = map.met_sd[static_cast<std::size_t>(c)] > 0.0
                            ? map.met_sd[static_cast<std::size_t>(c)]
                            : 1.0;
      combo(i) += map.signed_weights[static_cast<std::size_t>(c)] *
                  (data.metabolites_noise_free(i, c) -
                   map.met_mean[static_cast<std::size_t>(c)]) / sd;
    }
  }
  map.combo_mean = mean_of(combo);
  map.combo_sd = sd_of(combo) > 0.0 ? sd_of(combo) : 1.0;

  Vector switched(n);
  for (Index i = 0; i < n; ++i) {
    switched(i) = sigmoid(map.switch_gain * (combo(i) - map.combo_mean) / map.combo_sd);
  }
  map.out_mean = mean_of(switched);
  map.out_sd = sd_of(switched) > 0.0 ? sd_of(switched) : 1.0;

  data.phenotype_noise_free =
      (switched.array() - map.out_mean) / map.out_sd;

  // Measurement noise, drawn from the separate noise stream. Zero fractions
  // add nothing and consume nothing.
  data.metabolites = data.metabolites_noise_free;
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (config.intermediate_noise_fraction > 0.0) {
    for (int c = 0; c < 4; ++c) {
      const double s = sd_of(data.metabolites_noise_free.col(c));
      const double noise_sd = config.intermediate_noise_fraction * s;
      for (Index i = 0; i < n; ++i) {
        data.metabolites(i, c) += noise_sd * gauss(noise_rng);
      }
    }
  }
  data.phenotype = data.phenotype_noise_free;
  if (config.phenotype_noise_fraction > 0.0) {
    const double noise_sd =
        config.phenotype_noise_fraction * sd_of(data.phenotype_noise_free);
    for (Index i = 0; i < n; ++i) {
      data.phenotype(i) += noise_sd * gauss(noise_rng);
    }
  }
  return data;
}

std::vector<std::pair<std::string, double>> true_sensitivity(const SyntheticDataset& data) {
  const Index n = data.metabolites_noise_free.rows();
  const Index stride = std::max<Index>(1, n / 2000);

  std::vector<std::pair<std::string, double>> out;
  for (int c = 0; c < 4; ++c) {
    const double sd = data.phenotype_map.met_sd[static_cast<std::size_t>(c)];
    double total = 0.0;
    Index count = 0;
    const double h = sd > 0.0 ? 1e-2 * sd : 1e-4;
    for (Index i = 0; i < n; i += stride) {
      std::array<double, 4> m{};
      for (int k = 0; k < 4; ++k) m[static_cast<std::size_t>(k)] = data.metabolites_noise_free(i, k);
      auto up = m, down = m;
      up[static_cast<std::size_t>(c)] += h;
      down[static_cast<std::size_t>(c)] -= h;
      const double deriv =
          std::abs(data.phenotype_map(up) - data.phenotype_map(down)) / (2.0 * h);
      // Scale to a one-standard-deviation move so metabolites are comparable.
      total += deriv * sd;
      ++count;
    }
    out.emplace_back(kMetaboliteNames[static_cast<std::size_t>(c)],
                     count > 0 ? total / static_cast<double>(count) : 0.0);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

std::vector<std::pair<std::string, double>> true_sensitivity(const GeneratorConfig& config) {
  return true_sensitivity(generate(config));
}

}  // namespace binn
