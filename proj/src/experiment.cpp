#include "binn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "binn/baselines.hpp"
#include "binn/metrics.hpp"

namespace binn {

using nlohmann::json;

Family family_from_string(const std::string& s) {
  if (s == "binn_mse") return Family::kBinnMse;
  if (s == "binn_soft") return Family::kBinnSoft;
  if (s == "binn_hard") return Family::kBinnHard;
  if (s == "ridge") return Family::kRidge;
  if (s == "fcn") return Family::kFcn;
  throw Error("unknown model family: " + s);
}

std::string to_string(Family family) {
  switch (family) {
    case Family::kBinnMse: return "binn_mse";
    case Family::kBinnSoft: return "binn_soft";
    case Family::kBinnHard: return "binn_hard";
    case Family::kRidge: return "ridge";
    case Family::kFcn: return "fcn";
  }
  return "binn_mse";
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 13; ++i) {
    grid.push_back(std::pow(10.0, -3.0 + 6.0 * static_cast<double>(i) / 12.0));
  }
  return grid;
}

std::vector<Index> geometric_sizes(Index first, Index last, int points) {
  if (first < 1 || last < first) throw Error("geometric_sizes: bad endpoints");
  if (points < 2) return {first};
  std::vector<Index> sizes;
  const double ratio = static_cast<double>(last) / static_cast<double>(first);
  for (int k = 0; k < points; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(points - 1);
    sizes.push_back(static_cast<Index>(
        std::llround(static_cast<double>(first) * std::pow(ratio, f))));
  }
  return sizes;
}

SubnetSpec ExperimentConfig::default_pathway_spec() {
  SubnetSpec s;
  s.hidden_widths = {kAutoHiddenWidth};
  s.activation = Activation::kSigmoid;
  s.output_activation = Activation::kIdentity;
  return s;
}

SubnetSpec ExperimentConfig::default_integrator_spec() {
  SubnetSpec s;
  s.hidden_widths = {16};
  s.activation = Activation::kSigmoid;
  s.output_activation = Activation::kIdentity;
  return s;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t p : parts) h = splitmix64(h ^ p);
  return h;
}

std::vector<Index> subsample(const std::vector<Index>& pool, Index size,
                             std::uint64_t seed) {
  if (size <= 0 || size >= static_cast<Index>(pool.size())) return pool;
  std::vector<Index> shuffled = pool;
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  shuffled.resize(static_cast<std::size_t>(size));
  std::sort(shuffled.begin(), shuffled.end());
  return shuffled;
}

void parallel_tasks(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : workers) t.join();
}

struct SplitContext {
  std::uint64_t seed = 0;
  OuterSplit split;
  std::vector<LayerMask> masks;
  std::optional<IntermediateTruth> truth;
  Index binn_param_count = 0;
  SplitAudit* audit = nullptr;
  std::string error;  // nonempty when mask construction failed
};

std::vector<LayerMask> resolve_masks(const DatasetBundle& data, const MaskSource& source,
                                     const OuterSplit& split, std::uint64_t seed,
                                     const MaskRecipe& recipe, SplitAudit* audit,
                                     std::mutex& audit_mutex) {
  switch (source.kind) {
    case MaskSource::Kind::kFixed:
      return source.fixed;
    case MaskSource::Kind::kPathwayTable:
      return {mask_from_pathway_table(source.table, data.genotype.marker_ids).mask};
    case MaskSource::Kind::kElasticNetAssociation: {
      if (!data.expression.has_value()) {
        throw Error("elastic_net_plus_association mask needs an expression matrix");
      }
      {
        std::lock_guard<std::mutex> lock(audit_mutex);
        audit->mask_build.insert(split.train.begin(), split.train.end());
      }
      const Matrix expr_tr = gather_rows_raw(data.expression->values, split.train);
      const Vector y_tr = gather(data.phenotype, split.train);
      const auto selection = select_genes(
          expr_tr, data.expression->column_ids, y_tr, recipe.l1_ratio, recipe.cv_folds,
          derive_seed(seed, {static_cast<std::uint64_t>(split.index), 0x6d61736bull}));

      std::map<std::string, Index> expr_col;
      for (std::size_t i = 0; i < data.expression->column_ids.size(); ++i) {
        expr_col[data.expression->column_ids[i]] = static_cast<Index>(i);
      }
      const Matrix X_tr = gather_rows_raw(data.genotype.values, split.train);
      const Index top_k = std::min<Index>(recipe.top_k_snps_per_gene,
                                          data.genotype.n_markers());
      std::vector<std::pair<std::string, std::vector<std::string>>> entity_markers;
      for (const auto& gene : selection.gene_ids) {
        const Vector e = expr_tr.col(expr_col.at(gene));
        const auto nomination = nominate_snps(X_tr, e, top_k);
        std::vector<std::string> ids;
        for (Index m : nomination.markers) {
          ids.push_back(data.genotype.marker_ids[static_cast<std::size_t>(m)]);
        }
        entity_markers.emplace_back(gene, std::move(ids));
      }
      return {assemble_mask(entity_markers, data.genotype.marker_ids).mask};
    }
  }
  throw Error("unhandled mask source");
}

std::optional<IntermediateTruth> build_truth(const DatasetBundle& data,
                                             const std::vector<LayerMask>& masks,
                                             double label_fraction, std::uint64_t seed) {
  if (!data.intermediates.has_value() || masks.empty()) return std::nullopt;
  const auto& nm = *data.intermediates;
  std::map<std::string, Index> col;
  for (std::size_t i = 0; i < nm.column_ids.size(); ++i) {
    col[nm.column_ids[i]] = static_cast<Index>(i);
  }
  const LayerMask& final_mask = masks.back();
  const Index n = nm.values.rows();
  const Index k = final_mask.cols();

  IntermediateTruth::Layer layer;
  layer.values = Matrix::Zero(n, k);
  layer.entity_available.assign(static_cast<std::size_t>(k), 0);
  bool any = false;
  for (Index j = 0; j < k; ++j) {
    const auto it = col.find(final_mask.entity_ids()[static_cast<std::size_t>(j)]);
    if (it == col.end()) continue;
    layer.values.col(j) = nm.values.col(it->second);
    layer.entity_available[static_cast<std::size_t>(j)] = 1;
    any = true;
  }
  if (!any) return std::nullopt;
  layer.line_labeled = sample_label_mask(n, label_fraction, derive_seed(seed, {0x6c61626cull}));

  IntermediateTruth truth;
  truth.layers.resize(masks.size());
  truth.layers.back() = std::move(layer);
  return truth;
}

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct FoldFit {
  Standardizer scaler;
  double val_mse = kNan;
  double wall_seconds = 0.0;
  std::variant<RidgeModel, BinnModel, FcnModel> model;
};

struct CellOutput {
  std::vector<MetricsRow> rows;
  std::vector<EnsembleMember> members;
};

// Trains one (family, candidate, fold) tuple.
FoldFit fit_fold(const DatasetBundle& data, const SplitContext& ctx,
                 const ExperimentConfig& cfg, Family family, double candidate,
                 const Fold& fold, std::uint64_t fit_seed) {
  const auto start = std::chrono::steady_clock::now();
  FoldFit fit;
  fit.scaler = Standardizer::fit(data.genotype.values, data.phenotype, fold.train);

  if (family == Family::kRidge) {
    const Matrix Xtr = fit.scaler.gather_rows(data.genotype.values, fold.train);
    const Vector ytr = fit.scaler.center_y(data.phenotype, fold.train);
    RidgeModel model = ridge_fit(Xtr, ytr, candidate);
    const Matrix Xva = fit.scaler.gather_rows(data.genotype.values, fold.val);
    const Vector yva = fit.scaler.center_y(data.phenotype, fold.val);
    fit.val_mse = mse(yva, model.predict(Xva));
    fit.model = std::move(model);
  } else {
    TrainConfig tc = cfg.train;
    tc.seed = fit_seed;
    const IntermediateTruth* truth = nullptr;
    if (family == Family::kBinnMse) {
      tc.loss = {LossMode::kMse, 0.0};
    } else if (family == Family::kBinnSoft) {
      tc.loss = {LossMode::kSoftConstraint, candidate};
      truth = ctx.truth.has_value() ? &*ctx.truth : nullptr;
    } else if (family == Family::kBinnHard) {
      tc.loss = {LossMode::kHardConstraint, candidate};
      truth = ctx.truth.has_value() ? &*ctx.truth : nullptr;
    } else {
      tc.loss = {LossMode::kMse, 0.0};
    }

    if (family == Family::kFcn) {
      const SubnetSpec spec = fcn_spec_for_budget(data.genotype.n_markers(),
                                                  ctx.binn_param_count,
                                                  cfg.fcn_hidden_layers);
      FcnModel model(data.genotype.n_markers(), spec, fit_seed);
      const TrainResult tr = train(model, data.genotype.values, data.phenotype, nullptr,
                                   fold.train, fold.val, tc, fit.scaler);
      fit.val_mse = tr.best_val_mse;
      fit.model = std::move(model);
    } else {
      BinnModel model = BinnModel::build(ctx.masks, cfg.pathway_spec, cfg.residual_spec,
                                         cfg.integrator_spec, fit_seed);
      const TrainResult tr = train(model, data.genotype.values, data.phenotype, truth,
                                   fold.train, fold.val, tc, fit.scaler);
      fit.val_mse = tr.best_val_mse;
      fit.model = std::move(model);
    }
  }

  fit.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return fit;
}

CellOutput run_cell(const DatasetBundle& data, const SplitContext& ctx,
                    const ExperimentConfig& cfg, Family family, Index requested_size,
                    bool explicit_size, std::mutex& audit_mutex) {
  CellOutput out;
  const std::uint64_t cell_seed =
      derive_seed(ctx.seed, {static_cast<std::uint64_t>(ctx.split.index),
                             static_cast<std::uint64_t>(requested_size),
                             static_cast<std::uint64_t>(family)});

  const std::vector<Index> pool =
      explicit_size
          ? subsample(ctx.split.train, requested_size, derive_seed(cell_seed, {1}))
          : ctx.split.train;
  const Index size = static_cast<Index>(pool.size());
  const std::vector<Fold> folds =
      explicit_size ? make_folds(pool, cfg.inner_folds, derive_seed(cell_seed, {2}))
                    : ctx.split.folds;

  std::vector<double> grid = {0.0};
  if (family == Family::kRidge) {
    grid = cfg.alpha_grid;
  } else if (family == Family::kBinnSoft || family == Family::kBinnHard) {
    grid = cfg.lambda_grid;
  }

  // Inner folds pick the hyperparameter by mean validation MSE; the winning
  // candidate's fold models are all retained.
  std::vector<std::vector<FoldFit>> fits(grid.size());
  std::vector<double> mean_val(grid.size(), 0.0);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    fits[c].reserve(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
      fits[c].push_back(fit_fold(data, ctx, cfg, family, grid[c], folds[f],
                                 derive_seed(cell_seed, {3, c, f})));
      mean_val[c] += fits[c].back().val_mse;
    }
    mean_val[c] /= static_cast<double>(folds.size());
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < grid.size(); ++c) {
    if (mean_val[c] < mean_val[best]) best = c;
  }

  {
    std::lock_guard<std::mutex> lock(audit_mutex);
    for (const auto& fold : folds) {
      ctx.audit->training.insert(fold.train.begin(), fold.train.end());
      ctx.audit->selection.insert(fold.val.begin(), fold.val.end());
    }
  }

  const Vector y_test = gather(data.phenotype, ctx.split.test);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    FoldFit& fit = fits[best][f];
    MetricsRow row;
    row.family = to_string(family);
    row.split = ctx.split.index;
    row.fold = static_cast<int>(f);
    row.size = size;
    row.seed = ctx.seed;
    row.wall_seconds = fit.wall_seconds;

    Vector pred;
    if (const auto* ridge = std::get_if<RidgeModel>(&fit.model)) {
      pred = ridge->predict(fit.scaler.gather_rows(data.genotype.values, ctx.split.test))
                 .array() + fit.scaler.y_mean;
    } else if (const auto* binn = std::get_if<BinnModel>(&fit.model)) {
      pred = predict_rows(*binn, data.genotype.values, ctx.split.test, fit.scaler);
    } else {
      pred = predict_rows(std::get<FcnModel>(fit.model), data.genotype.values,
                          ctx.split.test, fit.scaler);
    }
    const MetricSet metrics = evaluate_predictions(y_test, pred);
    row.mse = metrics.mse;
    row.pearson = metrics.pearson_r;
    row.spearman = metrics.spearman_rho;
    out.rows.push_back(row);

    EnsembleMember member;
    member.split = ctx.split.index;
    member.fold = static_cast<int>(f);
    member.size = size;
    member.seed = ctx.seed;
    member.family = family;
    member.lambda = (family == Family::kBinnSoft || family == Family::kBinnHard)
                        ? grid[best] : 0.0;
    member.alpha = family == Family::kRidge ? grid[best] : 0.0;
    member.val_mse = fit.val_mse;
    member.scaler = fit.scaler;
    member.test_rows = ctx.split.test;
    member.model = std::move(fit.model);
    out.members.push_back(std::move(member));
  }
  return out;
}

}  // namespace

bool LeakageAudit::clean() const { return describe_violations().empty(); }

std::string LeakageAudit::describe_violations() const {
  std::ostringstream out;
  for (const auto& split : splits) {
    const auto check = [&](const std::set<Index>& used, const char* phase) {
      for (Index t : split.test) {
        if (used.count(t)) {
          out << "seed " << split.seed << " split " << split.split << ": test line "
              << t << " used in " << phase << "\n";
        }
      }
    };
    check(split.training, "training");
    check(split.selection, "hyperparameter selection");
    check(split.mask_build, "mask construction");
  }
  return out.str();
}

RunResult run_experiment(const DatasetBundle& data, const MaskSource& mask_source,
                         const ExperimentConfig& config) {
  data.genotype.validate();
  if (data.phenotype.size() != data.genotype.n_lines()) {
    throw DimensionMismatch("run_experiment: phenotype length != line count");
  }

  RunResult result;
  result.ensemble.line_ids = data.genotype.line_ids;
  result.ensemble.marker_ids = data.genotype.marker_ids;
  if (config.families.empty()) return result;  // vacuous sweep

  std::mutex audit_mutex;

  // One context per (replicate seed, outer split); mask construction happens
  // here, on training lines only.
  std::vector<std::unique_ptr<SplitContext>> contexts;
  for (const std::uint64_t seed : config.seeds) {
    const SplitPlan plan =
        make_splits(data.genotype.line_ids, data.genotype.population_labels,
                    config.scheme, config.outer_splits, config.inner_folds, seed,
                    config.train_fraction);
    for (const auto& split : plan.splits) {
      auto ctx = std::make_unique<SplitContext>();
      ctx->seed = seed;
      ctx->split = split;
      SplitAudit audit;
      audit.seed = seed;
      audit.split = split.index;
      audit.test = split.test;
      result.audit.splits.push_back(std::move(audit));
      contexts.push_back(std::move(ctx));
    }
  }
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    contexts[i]->audit = &result.audit.splits[i];
  }

  parallel_tasks(contexts.size(), config.jobs, [&](std::size_t i) {
    SplitContext& ctx = *contexts[i];
    try {
      ctx.masks = resolve_masks(data, mask_source, ctx.split, ctx.seed,
                                mask_source.recipe, ctx.audit, audit_mutex);
      ctx.truth = build_truth(data, ctx.masks, config.label_fraction, ctx.seed);
      bool needs_binn_params = false;
      for (Family f : config.families) {
        if (f != Family::kRidge) needs_binn_params = true;
      }
      if (needs_binn_params) {
        ctx.binn_param_count =
            BinnModel::build(ctx.masks, config.pathway_spec, config.residual_spec,
                             config.integrator_spec, 0)
                .parameter_count();
      }
    } catch (const std::exception& e) {
      ctx.error = e.what();
    }
  });

  struct Task {
    const SplitContext* ctx;
    Index size;
    bool explicit_size;
    Family family;
  };
  std::vector<Task> tasks;
  const std::vector<Index> sizes =
      config.train_sizes.empty() ? std::vector<Index>{0} : config.train_sizes;
  for (const auto& ctx : contexts) {
    for (Index size : sizes) {
      for (Family family : config.families) {
        tasks.push_back({ctx.get(), size, !config.train_sizes.empty(), family});
      }
    }
  }

  std::vector<CellOutput> outputs(tasks.size());
  parallel_tasks(tasks.size(), config.jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    if (!task.ctx->error.empty()) {
      MetricsRow row;
      row.family = to_string(task.family);
      row.split = task.ctx->split.index;
      row.seed = task.ctx->seed;
      row.size = task.size;
      row.mse = row.pearson = row.spearman = row.wall_seconds = kNan;
      row.ok = false;
      row.error = task.ctx->error;
      outputs[i].rows.push_back(std::move(row));
      return;
    }
    try {
      outputs[i] = run_cell(data, *task.ctx, config, task.family, task.size,
                            task.explicit_size, audit_mutex);
    } catch (const std::exception& e) {
      // The sweep continues; this cell is marked.
      CellOutput failed;
      MetricsRow row;
      row.family = to_string(task.family);
      row.split = task.ctx->split.index;
      row.seed = task.ctx->seed;
      row.size = task.size;
      row.mse = row.pearson = row.spearman = row.wall_seconds = kNan;
      row.ok = false;
      row.error = e.what();
      failed.rows.push_back(std::move(row));
      outputs[i] = std::move(failed);
    }
  });

  for (auto& output : outputs) {
    for (auto& row : output.rows) result.rows.push_back(std::move(row));
    for (auto& member : output.members) {
      result.ensemble.members.push_back(std::move(member));
    }
  }
  return result;
}

// --- metrics CSV -------------------------------------------------------------

std::string metrics_csv_header() {
  return "family,split,fold,size,seed,mse,pearson,spearman,wall_seconds";
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << metrics_csv_header() << '\n';
  for (const auto& r : rows) {
    out << r.family << ',' << r.split << ',' << r.fold << ',' << r.size << ','
        << r.seed << ',' << format_double(r.mse) << ',' << format_double(r.pearson)
        << ',' << format_double(r.spearman) << ',' << format_double(r.wall_seconds)
        << '\n';
  }
  return out.str();
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
  atomic_write_text(path, metrics_to_csv(rows));
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open metrics file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty metrics file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_csv_header()) {
    throw SchemaError("unexpected metrics header: " + line);
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    MetricsRow r;
    std::getline(ss, r.family, ',');
    std::getline(ss, field, ',');
    r.split = std::stoi(field);
    std::getline(ss, field, ',');
    r.fold = std::stoi(field);
    std::getline(ss, field, ',');
    r.size = static_cast<Index>(std::stoll(field));
    std::getline(ss, field, ',');
    r.seed = static_cast<std::uint64_t>(std::stoull(field));
    std::getline(ss, field, ',');
    r.mse = std::stod(field);
    std::getline(ss, field, ',');
    r.pearson = std::stod(field);
    std::getline(ss, field, ',');
    r.spearman = std::stod(field);
    std::getline(ss, field, ',');
    r.wall_seconds = std::stod(field);
    r.ok = std::isfinite(r.mse);
    rows.push_back(std::move(r));
  }
  return rows;
}

// --- ensemble serialization ---------------------------------------------------

json ensemble_to_json(const Ensemble& ensemble) {
  json j;
  j["format"] = "binn-ensemble";
  j["version"] = 1;
  j["line_ids"] = ensemble.line_ids;
  j["marker_ids"] = ensemble.marker_ids;
  json members = json::array();
  for (const auto& m : ensemble.members) {
    json mj;
    mj["split"] = m.split;
    mj["fold"] = m.fold;
    mj["size"] = m.size;
    mj["seed"] = m.seed;
    mj["family"] = to_string(m.family);
    mj["lambda"] = m.lambda;
    mj["alpha"] = m.alpha;
    mj["val_mse"] = m.val_mse;
    mj["scaler"] = standardizer_to_json(m.scaler);
    mj["test_rows"] = m.test_rows;
    if (const auto* ridge = std::get_if<RidgeModel>(&m.model)) {
      mj["model"] = ridge_to_json(*ridge);
    } else if (const auto* binn = std::get_if<BinnModel>(&m.model)) {
      mj["model"] = binn_to_json(*binn);
    } else {
      mj["model"] = fcn_to_json(std::get<FcnModel>(m.model));
    }
    members.push_back(std::move(mj));
  }
  j["members"] = std::move(members);
  return j;
}

Ensemble ensemble_from_json(const json& j) {
  if (j.value("format", "") != "binn-ensemble") {
    throw SchemaError("not an ensemble file");
  }
  Ensemble ensemble;
  ensemble.line_ids = j.at("line_ids").get<std::vector<std::string>>();
  ensemble.marker_ids = j.at("marker_ids").get<std::vector<std::string>>();
  for (const auto& mj : j.at("members")) {
    EnsembleMember m;
    m.split = mj.at("split").get<int>();
    m.fold = mj.at("fold").get<int>();
    m.size = mj.at("size").get<Index>();
    m.seed = mj.at("seed").get<std::uint64_t>();
    m.family = family_from_string(mj.at("family").get<std::string>());
    m.lambda = mj.at("lambda").get<double>();
    m.alpha = mj.at("alpha").get<double>();
    m.val_mse = mj.at("val_mse").get<double>();
    m.scaler = standardizer_from_json(mj.at("scaler"));
    m.test_rows = mj.at("test_rows").get<std::vector<Index>>();
    const std::string family = mj.at("model").at("family").get<std::string>();
    if (family == "ridge") {
      m.model = ridge_from_json(mj.at("model"));
    } else if (family == "binn") {
      m.model = binn_from_json(mj.at("model"));
    } else {
      m.model = fcn_from_json(mj.at("model"));
    }
    ensemble.members.push_back(std::move(m));
  }
  return ensemble;
}

void write_ensemble_json(const fs::path& path, const Ensemble& ensemble) {
  atomic_write_text(path, ensemble_to_json(ensemble).dump() + "\n");
}

Ensemble read_ensemble_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open ensemble file: " + path.string());
  json j;
  in >> j;
  return ensemble_from_json(j);
}

Vector ensemble_predict(const Ensemble& ensemble, const GenotypeMatrix& X) {
  if (ensemble.members.empty()) throw Error("empty ensemble");
  if (X.marker_ids != ensemble.marker_ids) {
    throw IdMismatch("genotype markers do not match the ensemble's training layout");
  }
  std::vector<Index> all_rows(static_cast<std::size_t>(X.n_lines()));
  std::iota(all_rows.begin(), all_rows.end(), Index{0});

  Vector total = Vector::Zero(X.n_lines());
  for (const auto& m : ensemble.members) {
    Vector pred;
    if (const auto* ridge = std::get_if<RidgeModel>(&m.model)) {
      pred = ridge->predict(m.scaler.gather_rows(X.values, all_rows)).array() +
             m.scaler.y_mean;
    } else if (const auto* binn = std::get_if<BinnModel>(&m.model)) {
      pred = predict_rows(*binn, X.values, all_rows, m.scaler);
    } else {
      pred = predict_rows(std::get<FcnModel>(m.model), X.values, all_rows, m.scaler);
    }
    total += pred;
  }
  return total / static_cast<double>(ensemble.members.size());
}

SensitivityReport ensemble_sensitivity(const Ensemble& ensemble, const Matrix& X,
                                       double a, int layer_index) {
  std::vector<std::vector<EntitySensitivity>> per_model;
  for (const auto& m : ensemble.members) {
    const auto* binn = std::get_if<BinnModel>(&m.model);
    if (binn == nullptr) continue;
    const int layer = layer_index > 0 ? layer_index : binn->n_layers();
    const Matrix X_eval = m.scaler.gather_rows(X, m.test_rows);
    per_model.push_back(measure_layer(*binn, X_eval, layer, a));
  }
  if (per_model.empty()) {
    throw Error("ensemble contains no pathway-masked models to probe");
  }
  return aggregate(per_model, a);
}

std::vector<LatentCorrRow> ensemble_latent_correlations(const Ensemble& ensemble,
                                                        const Matrix& X,
                                                        const NamedMatrix& truth,
                                                        int layer_index) {
  std::map<std::string, Index> col;
  for (std::size_t i = 0; i < truth.column_ids.size(); ++i) {
    col[truth.column_ids[i]] = static_cast<Index>(i);
  }
  std::vector<LatentCorrRow> rows;
  for (const auto& m : ensemble.members) {
    const auto* binn = std::get_if<BinnModel>(&m.model);
    if (binn == nullptr) continue;
    const int layer = layer_index > 0 ? layer_index : binn->n_layers();
    const Matrix X_eval = m.scaler.gather_rows(X, m.test_rows);
    const LatentTrace trace = binn->forward(X_eval);
    const Matrix& U = trace.per_layer_latents.at(static_cast<std::size_t>(layer - 1));
    const auto& ids = binn->mask(layer).entity_ids();
    for (Index j = 0; j < U.cols(); ++j) {
      const auto it = col.find(ids[static_cast<std::size_t>(j)]);
      if (it == col.end()) continue;
      Vector z(static_cast<Index>(m.test_rows.size()));
      for (std::size_t r = 0; r < m.test_rows.size(); ++r) {
        z[static_cast<Index>(r)] = truth.values(m.test_rows[r], it->second);
      }
      LatentCorrRow row;
      row.split = m.split;
      row.fold = m.fold;
      row.entity_id = ids[static_cast<std::size_t>(j)];
      try {
        row.r = pearson(U.col(j), z);
      } catch (const DegenerateVariance&) {
        row.r = kNan;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// --- report aggregation --------------------------------------------------------

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - std::floor(h);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<SummaryRow> summarize_metrics(const std::vector<MetricsRow>& rows) {
  std::map<std::tuple<std::string, Index, std::uint64_t>, std::vector<const MetricsRow*>>
      groups;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    groups[{r.family, r.size, r.seed}].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    SummaryRow s;
    s.family = std::get<0>(key);
    s.size = std::get<1>(key);
    s.seed = std::get<2>(key);
    s.cells = static_cast<int>(members.size());
    const auto stats = [&](auto getter, double& median, double& iqr) {
      std::vector<double> v;
      for (const auto* r : members) v.push_back(getter(*r));
      median = quantile(v, 0.5);
      iqr = quantile(v, 0.75) - quantile(v, 0.25);
    };
    stats([](const MetricsRow& r) { return r.mse; }, s.mse_median, s.mse_iqr);
    stats([](const MetricsRow& r) { return r.pearson; }, s.pearson_median, s.pearson_iqr);
    stats([](const MetricsRow& r) { return r.spearman; }, s.spearman_median,
          s.spearman_iqr);
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "family,size,seed,cells,mse_median,mse_iqr,pearson_median,pearson_iqr,"
         "spearman_median,spearman_iqr\n";
  for (const auto& r : rows) {
    out << r.family << ',' << r.size << ',' << r.seed << ',' << r.cells << ','
        << format_double(r.mse_median) << ',' << format_double(r.mse_iqr) << ','
        << format_double(r.pearson_median) << ',' << format_double(r.pearson_iqr) << ','
        << format_double(r.spearman_median) << ',' << format_double(r.spearman_iqr)
        << '\n';
  }
  atomic_write_text(path, out.str());
}

void write_percent_change_csv(const fs::path& path, const std::vector<SummaryRow>& rows,
                              const std::string& baseline_family) {
  std::map<std::pair<Index, std::uint64_t>, const SummaryRow*> baseline;
  for (const auto& r : rows) {
    if (r.family == baseline_family) baseline[{r.size, r.seed}] = &r;
  }
  std::ostringstream out;
  out << "family,size,seed,metric,baseline_family,percent_change\n";
  for (const auto& r : rows) {
    if (r.family == baseline_family) continue;
    const auto it = baseline.find({r.size, r.seed});
    if (it == baseline.end()) continue;
    const auto emit = [&](const char* metric, double value, double base) {
      const auto pc = percent_change(value, base);
      if (!pc.has_value()) return;
      out << r.family << ',' << r.size << ',' << r.seed << ',' << metric << ','
          << baseline_family << ',' << format_double(*pc) << '\n';
    };
    emit("mse_median", r.mse_median, it->second->mse_median);
    emit("spearman_median", r.spearman_median, it->second->spearman_median);
  }
  atomic_write_text(path, out.str());
}

}  // namespace binn
