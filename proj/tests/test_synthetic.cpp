#include <doctest.h>

#include <cmath>
#include <numeric>

#include "binn/baselines.hpp"
#include "binn/metrics.hpp"
#include "binn/splits.hpp"
#include "binn/subnet.hpp"
#include "binn/synthetic.hpp"
#include "binn/training.hpp"

using namespace binn;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig cfg;
  cfg.n_lines = 200;
  cfg.n_genes = 40;
  cfg.genes_per_metabolite = {10, 10, 10, 10};
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST_CASE("generated shapes follow the configuration") {
  GeneratorConfig cfg;
  cfg.n_lines = 100;
  cfg.n_genes = 1600;
  cfg.seed = 1;
  const auto data = generate(cfg);
  CHECK(data.X.values.rows() == 100);
  CHECK(data.X.values.cols() == 1600);
  CHECK(data.metabolites.rows() == 100);
  CHECK(data.metabolites.cols() == 4);
  CHECK(data.phenotype.size() == 100);
  CHECK(data.causal_table.size() == 1600);
  // Dosages stay in {0,1,2}.
  for (Index i = 0; i < 20; ++i) {
    for (Index j = 0; j < 40; ++j) {
      const double v = data.X.values(i, j);
      CHECK((v == 0.0 || v == 1.0 || v == 2.0));
    }
  }
}

TEST_CASE("generation is bit-identical per (config, seed)") {
  const auto a = generate(small_config());
  const auto b = generate(small_config());
  CHECK(a.X.values == b.X.values);
  CHECK(a.metabolites == b.metabolites);
  CHECK(a.phenotype == b.phenotype);

  auto other = small_config();
  other.seed = 43;
  const auto c = generate(other);
  CHECK(a.X.values != c.X.values);
}

TEST_CASE("noiseless generation ignores the noise seed") {
  auto cfg = small_config();
  cfg.intermediate_noise_fraction = 0.0;
  cfg.phenotype_noise_fraction = 0.0;
  cfg.noise_seed = 1;
  const auto a = generate(cfg);
  cfg.noise_seed = 999;
  const auto b = generate(cfg);
  CHECK(a.metabolites == b.metabolites);
  CHECK(a.phenotype == b.phenotype);
  CHECK(a.metabolites == a.metabolites_noise_free);
}

TEST_CASE("noise scaling matches the configured fraction") {
  GeneratorConfig cfg;
  cfg.n_lines = 20000;
  cfg.n_genes = 80;
  cfg.genes_per_metabolite = {20, 20, 20, 20};
  cfg.seed = 7;
  const auto data = generate(cfg);
  for (int c = 0; c < 4; ++c) {
    const Vector noise = data.metabolites.col(c) - data.metabolites_noise_free.col(c);
    const double noise_sd =
        std::sqrt(noise.squaredNorm() / static_cast<double>(noise.size()));
    const Vector clean = data.metabolites_noise_free.col(c);
    const double clean_sd = std::sqrt(
        (clean.array() - clean.mean()).square().sum() / static_cast<double>(clean.size()));
    CHECK(noise_sd == doctest::Approx(0.05 * clean_sd).epsilon(0.10));
  }
  const Vector pnoise = data.phenotype - data.phenotype_noise_free;
  const double pnoise_sd =
      std::sqrt(pnoise.squaredNorm() / static_cast<double>(pnoise.size()));
  CHECK(pnoise_sd == doctest::Approx(0.10).epsilon(0.10));  // phenotype is standardized
}

TEST_CASE("dominant-only phenotype is monotone in the dominant metabolite") {
  auto cfg = small_config();
  cfg.phenotype_weights = {0.0, 1.0, 0.0, 0.0};  // S only
  cfg.dominant_metabolite = "S";
  cfg.intermediate_noise_fraction = 0.0;
  cfg.phenotype_noise_fraction = 0.0;
  const auto data = generate(cfg);

  // Sorting by the S metabolite must sort the phenotype (descending: outgrowth
  // time falls as sucrose rises).
  std::vector<Index> order(static_cast<std::size_t>(cfg.n_lines));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return data.metabolites_noise_free(a, 1) < data.metabolites_noise_free(b, 1);
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    CHECK(data.phenotype_noise_free(order[i]) <=
          data.phenotype_noise_free(order[i - 1]) + 1e-12);
  }
}

TEST_CASE("true sensitivity ranks the dominant metabolite first") {
  auto cfg = small_config();
  cfg.dominant_metabolite = "S";
  const auto ranking = true_sensitivity(cfg);
  REQUIRE(ranking.size() == 4);
  CHECK(ranking[0].first == "S");

  cfg.dominant_metabolite = "CK";
  const auto ranking_ck = true_sensitivity(cfg);
  CHECK(ranking_ck[0].first == "CK");
}

TEST_CASE("equal weights give near-equal sensitivities") {
  auto cfg = small_config();
  cfg.n_lines = 2000;
  cfg.dominant_weight_factor = 1.0;
  const auto ranking = true_sensitivity(cfg);
  const double top = ranking.front().second;
  const double bottom = ranking.back().second;
  CHECK(bottom >= 0.9 * top);
}

TEST_CASE("zero phenotype weights give zero sensitivities") {
  auto cfg = small_config();
  cfg.phenotype_weights = {0, 0, 0, 0};
  const auto ranking = true_sensitivity(cfg);
  for (const auto& [id, value] : ranking) CHECK(value == 0.0);
}

TEST_CASE("invalid partitions are rejected") {
  auto cfg = small_config();
  cfg.genes_per_metabolite = {30, 10, 10, 10};  // exceeds 40 genes
  CHECK_THROWS_AS(generate(cfg), InvalidPartition);
  cfg.genes_per_metabolite = {0, 10, 10, 10};
  CHECK_THROWS_AS(generate(cfg), InvalidPartition);
}

TEST_CASE("phenotype map is genuinely nonlinear in the metabolites") {
  // Ridge on metabolites must lose to a small nonlinear net on metabolites.
  GeneratorConfig cfg;
  cfg.n_lines = 5000;
  cfg.n_genes = 200;
  cfg.genes_per_metabolite = {50, 50, 50, 50};
  cfg.seed = 77;
  const auto data = generate(cfg);

  std::vector<Index> train_rows, test_rows;
  for (Index i = 0; i < cfg.n_lines; ++i) {
    (i < 4000 ? train_rows : test_rows).push_back(i);
  }
  const Vector y_test = gather(data.phenotype, test_rows);

  const Standardizer scaler = Standardizer::fit(data.metabolites, data.phenotype, train_rows);
  const auto ridge =
      ridge_fit(scaler.gather_rows(data.metabolites, train_rows),
                scaler.center_y(data.phenotype, train_rows), 1e-3);
  const Vector ridge_pred =
      ridge.predict(scaler.gather_rows(data.metabolites, test_rows)).array() +
      scaler.y_mean;
  const double ridge_mse = mse(y_test, ridge_pred);

  SubnetSpec spec;
  spec.hidden_widths = {8};
  FcnModel net(4, spec, 5);
  TrainConfig tc;
  tc.max_epochs = 200;
  tc.patience = 20;
  Fold fold;
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    (i % 5 == 0 ? fold.val : fold.train).push_back(train_rows[i]);
  }
  const auto fit = fit_model(net, data.metabolites, data.phenotype, nullptr, fold, tc);
  const Vector net_pred = predict_rows(net, data.metabolites, test_rows, fit.scaler);
  const double net_mse = mse(y_test, net_pred);

  CHECK(net_mse < ridge_mse);
}
