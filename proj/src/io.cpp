#include "binn/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace binn {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void atomic_write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out << content;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

double parse_double(const std::string& s, const fs::path& path) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw SchemaError("bad number '" + s + "' in " + path.string());
  }
  return v;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "nan" || s == "NaN";
}

}  // namespace

void write_genotype_csv(const fs::path& path, const GenotypeMatrix& X) {
  std::ostringstream out;
  out << "line_id";
  for (const auto& m : X.marker_ids) out << ',' << m;
  out << '\n';
  for (Index i = 0; i < X.n_lines(); ++i) {
    out << X.line_ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < X.n_markers(); ++j) out << ',' << format_double(X.values(i, j));
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

GenotypeMatrix read_genotype_csv(const fs::path& path, int* imputed_entries) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw SchemaError("empty genotype file: " + path.string());
  auto header = split_csv_line(lines[0]);
  if (header.empty() || header[0] != "line_id") {
    throw SchemaError("genotype header must start with line_id: " + path.string());
  }

  GenotypeMatrix X;
  X.marker_ids.assign(header.begin() + 1, header.end());
  const Index p = static_cast<Index>(X.marker_ids.size());
  const Index n = static_cast<Index>(lines.size()) - 1;
  X.values.resize(n, p);

  // missing entries: remember position, fill later with the marker mean
  std::vector<std::pair<Index, Index>> missing;
  for (Index i = 0; i < n; ++i) {
    const auto fields = split_csv_line(lines[static_cast<std::size_t>(i) + 1]);
    if (static_cast<Index>(fields.size()) != p + 1) {
      throw SchemaError("genotype row " + std::to_string(i + 2) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(p + 1));
    }
    X.line_ids.push_back(fields[0]);
    for (Index j = 0; j < p; ++j) {
      const auto& f = fields[static_cast<std::size_t>(j) + 1];
      if (is_missing(f)) {
        missing.emplace_back(i, j);
        X.values(i, j) = 0.0;
      } else {
        X.values(i, j) = parse_double(f, path);
      }
    }
  }

  if (!missing.empty()) {
    std::vector<double> col_sum(static_cast<std::size_t>(p), 0.0);
    std::vector<Index> col_count(static_cast<std::size_t>(p), 0);
    std::vector<std::vector<char>> is_miss_col(static_cast<std::size_t>(p));
    for (auto& v : is_miss_col) v.assign(static_cast<std::size_t>(n), 0);
    for (const auto& [i, j] : missing) is_miss_col[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = 1;
    for (Index j = 0; j < p; ++j) {
      for (Index i = 0; i < n; ++i) {
        if (!is_miss_col[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
          col_sum[static_cast<std::size_t>(j)] += X.values(i, j);
          ++col_count[static_cast<std::size_t>(j)];
        }
      }
    }
    for (const auto& [i, j] : missing) {
      X.values(i, j) = col_count[static_cast<std::size_t>(j)] > 0
                           ? col_sum[static_cast<std::size_t>(j)] /
                                 static_cast<double>(col_count[static_cast<std::size_t>(j)])
                           : 0.0;
    }
  }
  if (imputed_entries) *imputed_entries = static_cast<int>(missing.size());
  X.validate();
  return X;
}

void write_named_matrix_csv(const fs::path& path, const NamedMatrix& m,
                            const std::string& id_header) {
  std::ostringstream out;
  out << id_header;
  for (const auto& c : m.column_ids) out << ',' << c;
  out << '\n';
  for (Index i = 0; i < m.values.rows(); ++i) {
    out << m.line_ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m.values.cols(); ++j) out << ',' << format_double(m.values(i, j));
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

NamedMatrix read_named_matrix_csv(const fs::path& path, const std::string& id_header) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw SchemaError("empty file: " + path.string());
  auto header = split_csv_line(lines[0]);
  if (header.empty() || header[0] != id_header) {
    throw SchemaError("header must start with " + id_header + ": " + path.string());
  }
  NamedMatrix m;
  m.column_ids.assign(header.begin() + 1, header.end());
  const Index cols = static_cast<Index>(m.column_ids.size());
  const Index n = static_cast<Index>(lines.size()) - 1;
  m.values.resize(n, cols);
  for (Index i = 0; i < n; ++i) {
    const auto fields = split_csv_line(lines[static_cast<std::size_t>(i) + 1]);
    if (static_cast<Index>(fields.size()) != cols + 1) {
      throw SchemaError("row " + std::to_string(i + 2) + " of " + path.string() +
                        " has the wrong field count");
    }
    m.line_ids.push_back(fields[0]);
    for (Index j = 0; j < cols; ++j) {
      m.values(i, j) = parse_double(fields[static_cast<std::size_t>(j) + 1], path);
    }
  }
  return m;
}

void write_phenotype_csv(const fs::path& path, const std::vector<std::string>& line_ids,
                         const Vector& y) {
  NamedMatrix m;
  m.line_ids = line_ids;
  m.column_ids = {"phenotype"};
  m.values = y;
  write_named_matrix_csv(path, m);
}

void write_population_csv(const fs::path& path, const std::vector<std::string>& line_ids,
                          const std::vector<std::string>& labels) {
  std::ostringstream out;
  out << "line_id,population\n";
  for (std::size_t i = 0; i < line_ids.size(); ++i) {
    out << line_ids[i] << ',' << labels[i] << '\n';
  }
  atomic_write_text(path, out.str());
}

// --- JSON -------------------------------------------------------------------

json mask_to_json(const LayerMask& mask, const MaskRecipe* recipe) {
  json j;
  j["format"] = "binn-mask";
  j["version"] = 1;
  j["layer_index"] = mask.layer_index();
  j["input_feature_ids"] = mask.input_feature_ids();
  json entities = json::array();
  for (Index e = 0; e < mask.cols(); ++e) {
    json entity;
    entity["id"] = mask.entity_ids()[static_cast<std::size_t>(e)];
    json markers = json::array();
    for (Index r : mask.support(e)) {
      markers.push_back(mask.input_feature_ids()[static_cast<std::size_t>(r)]);
    }
    entity["markers"] = markers;
    entities.push_back(std::move(entity));
  }
  j["entities"] = entities;
  if (recipe) {
    j["recipe"] = {{"source", recipe->source},
                   {"l1_ratio", recipe->l1_ratio},
                   {"top_k_snps_per_gene", recipe->top_k_snps_per_gene},
                   {"cv_folds", recipe->cv_folds}};
  }
  return j;
}

LayerMask mask_from_json(const json& j) {
  if (j.value("format", "") != "binn-mask") throw SchemaError("not a mask file");
  const auto features = j.at("input_feature_ids").get<std::vector<std::string>>();
  std::unordered_map<std::string, Index> index;
  for (std::size_t i = 0; i < features.size(); ++i) index[features[i]] = static_cast<Index>(i);

  std::vector<std::string> entity_ids;
  std::vector<std::vector<Index>> support;
  for (const auto& entity : j.at("entities")) {
    entity_ids.push_back(entity.at("id").get<std::string>());
    std::vector<Index> rows;
    for (const auto& m : entity.at("markers")) {
      const auto it = index.find(m.get<std::string>());
      if (it == index.end()) throw IdMismatch("mask references unknown feature");
      rows.push_back(it->second);
    }
    support.push_back(std::move(rows));
  }
  return LayerMask(j.value("layer_index", 1), features, entity_ids, support);
}

void write_mask_json(const fs::path& path, const LayerMask& mask, const MaskRecipe* recipe) {
  atomic_write_text(path, mask_to_json(mask, recipe).dump(2) + "\n");
}

LayerMask read_mask_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open mask file: " + path.string());
  json j;
  in >> j;
  return mask_from_json(j);
}

void write_causal_table_json(const fs::path& path,
                             const std::map<std::string, std::string>& table) {
  json j;
  j["format"] = "binn-causal-table";
  j["version"] = 1;
  j["gene_to_entity"] = table;
  atomic_write_text(path, j.dump(2) + "\n");
}

std::map<std::string, std::string> read_causal_table_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open causal table: " + path.string());
  json j;
  in >> j;
  if (j.value("format", "") != "binn-causal-table") {
    throw SchemaError("not a causal table file: " + path.string());
  }
  return j.at("gene_to_entity").get<std::map<std::string, std::string>>();
}

json subnet_spec_to_json(const SubnetSpec& spec) {
  return json{{"hidden_widths", spec.hidden_widths},
              {"activation", to_string(spec.activation)},
              {"output_activation", to_string(spec.output_activation)},
              {"output_width", spec.output_width}};
}

SubnetSpec subnet_spec_from_json(const json& j) {
  SubnetSpec spec;
  spec.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
  spec.activation = activation_from_string(j.at("activation").get<std::string>());
  spec.output_activation =
      activation_from_string(j.at("output_activation").get<std::string>());
  spec.output_width = j.at("output_width").get<int>();
  return spec;
}

namespace {

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Index>(arr.size()));
  Index i = 0;
  for (const auto& x : arr) v[i++] = x.get<double>();
  return v;
}

}  // namespace

json binn_to_json(const BinnModel& model) {
  json j;
  j["format"] = "binn-model";
  j["version"] = 1;
  j["family"] = "binn";
  j["seed"] = model.seed();
  json masks = json::array();
  for (const auto& mask : model.masks()) masks.push_back(mask_to_json(mask));
  j["masks"] = masks;
  j["pathway_spec"] = subnet_spec_to_json(model.pathway_spec());
  j["residual_spec"] = subnet_spec_to_json(model.residual_spec());
  j["integrator_spec"] = subnet_spec_to_json(model.integrator_spec());
  j["parameters"] = vector_to_json(model.parameters());
  return j;
}

BinnModel binn_from_json(const json& j) {
  if (j.value("format", "") != "binn-model" || j.value("family", "") != "binn") {
    throw SchemaError("not a binn model payload");
  }
  std::vector<LayerMask> masks;
  for (const auto& mj : j.at("masks")) masks.push_back(mask_from_json(mj));
  BinnModel model = BinnModel::build(
      std::move(masks), subnet_spec_from_json(j.at("pathway_spec")),
      subnet_spec_from_json(j.at("residual_spec")),
      subnet_spec_from_json(j.at("integrator_spec")), j.at("seed").get<std::uint64_t>());
  model.set_parameters(vector_from_json(j.at("parameters")));
  return model;
}

json ridge_to_json(const RidgeModel& model) {
  json j;
  j["format"] = "binn-model";
  j["version"] = 1;
  j["family"] = "ridge";
  j["alpha"] = model.alpha;
  j["intercept"] = model.intercept;
  j["coefficients"] = vector_to_json(model.coefficients);
  return j;
}

RidgeModel ridge_from_json(const json& j) {
  if (j.value("family", "") != "ridge") throw SchemaError("not a ridge payload");
  RidgeModel model;
  model.alpha = j.at("alpha").get<double>();
  model.intercept = j.at("intercept").get<double>();
  model.coefficients = vector_from_json(j.at("coefficients"));
  return model;
}

json fcn_to_json(const FcnModel& model) {
  json j;
  j["format"] = "binn-model";
  j["version"] = 1;
  j["family"] = "fcn";
  j["seed"] = model.seed();
  j["n_features"] = model.n_features();
  j["spec"] = subnet_spec_to_json(model.spec());
  j["parameters"] = vector_to_json(model.parameters());
  return j;
}

FcnModel fcn_from_json(const json& j) {
  if (j.value("family", "") != "fcn") throw SchemaError("not an fcn payload");
  FcnModel model(j.at("n_features").get<Index>(), subnet_spec_from_json(j.at("spec")),
                 j.at("seed").get<std::uint64_t>());
  model.set_parameters(vector_from_json(j.at("parameters")));
  return model;
}

json standardizer_to_json(const Standardizer& s) {
  return json{{"feature_mean", vector_to_json(s.feature_mean)},
              {"feature_scale", vector_to_json(s.feature_scale)},
              {"y_mean", s.y_mean}};
}

Standardizer standardizer_from_json(const json& j) {
  Standardizer s;
  s.feature_mean = vector_from_json(j.at("feature_mean"));
  s.feature_scale = vector_from_json(j.at("feature_scale"));
  s.y_mean = j.at("y_mean").get<double>();
  return s;
}

// --- ingestion ----------------------------------------------------------------

namespace {

// Maps every id to the genotype row order; throws IdMismatch naming offenders.
std::vector<Index> align_to(const std::vector<std::string>& canonical,
                            const std::vector<std::string>& other,
                            const std::string& what) {
  std::unordered_map<std::string, Index> pos;
  for (std::size_t i = 0; i < other.size(); ++i) pos[other[i]] = static_cast<Index>(i);
  std::vector<Index> mapping;
  std::string missing;
  for (const auto& id : canonical) {
    const auto it = pos.find(id);
    if (it == pos.end()) {
      missing += missing.empty() ? id : ", " + id;
      continue;
    }
    mapping.push_back(it->second);
  }
  if (!missing.empty()) {
    throw IdMismatch(what + " is missing line ids: " + missing);
  }
  if (other.size() != canonical.size()) {
    std::unordered_map<std::string, char> have;
    for (const auto& id : canonical) have[id] = 1;
    std::string extra;
    for (const auto& id : other) {
      if (!have.count(id)) extra += extra.empty() ? id : ", " + id;
    }
    throw IdMismatch(what + " has unknown line ids: " + extra);
  }
  return mapping;
}

NamedMatrix reorder(const NamedMatrix& m, const std::vector<Index>& mapping,
                    const std::vector<std::string>& canonical) {
  NamedMatrix out;
  out.column_ids = m.column_ids;
  out.line_ids = canonical;
  out.values.resize(static_cast<Index>(mapping.size()), m.values.cols());
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    out.values.row(static_cast<Index>(i)) = m.values.row(mapping[i]);
  }
  return out;
}

}  // namespace

DatasetBundle ingest(const IngestPaths& paths) {
  DatasetBundle bundle;
  bundle.genotype = read_genotype_csv(paths.genotype, &bundle.imputed_entries);
  const auto& ids = bundle.genotype.line_ids;

  if (paths.phenotype) {
    const NamedMatrix ph = read_named_matrix_csv(*paths.phenotype);
    if (ph.values.cols() != 1) {
      throw SchemaError("phenotype file must have exactly one value column");
    }
    const auto mapping = align_to(ids, ph.line_ids, "phenotype file");
    bundle.phenotype.resize(static_cast<Index>(mapping.size()));
    for (std::size_t i = 0; i < mapping.size(); ++i) {
      bundle.phenotype[static_cast<Index>(i)] = ph.values(mapping[i], 0);
    }
  }

  if (paths.intermediates) {
    const NamedMatrix m = read_named_matrix_csv(*paths.intermediates);
    bundle.intermediates = reorder(m, align_to(ids, m.line_ids, "intermediates file"), ids);
  }
  if (paths.expression) {
    const NamedMatrix m = read_named_matrix_csv(*paths.expression);
    bundle.expression = reorder(m, align_to(ids, m.line_ids, "expression file"), ids);
  }
  if (paths.populations) {
    const auto lines = read_lines(*paths.populations);
    if (lines.empty() || split_csv_line(lines[0]) !=
                             std::vector<std::string>{"line_id", "population"}) {
      throw SchemaError("population file header must be line_id,population");
    }
    std::vector<std::string> file_ids, labels;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto fields = split_csv_line(lines[i]);
      if (fields.size() != 2) throw SchemaError("bad population row");
      file_ids.push_back(fields[0]);
      labels.push_back(fields[1]);
    }
    const auto mapping = align_to(ids, file_ids, "population file");
    bundle.genotype.population_labels.resize(ids.size());
    for (std::size_t i = 0; i < mapping.size(); ++i) {
      bundle.genotype.population_labels[i] = labels[static_cast<std::size_t>(mapping[i])];
    }
  }
  return bundle;
}

void export_dataset(const fs::path& out_dir, const SyntheticDataset& data) {
  fs::create_directories(out_dir);
  write_genotype_csv(out_dir / "genotype.csv", data.X);
  NamedMatrix met;
  met.values = data.metabolites;
  met.line_ids = data.X.line_ids;
  met.column_ids = data.metabolite_ids;
  write_named_matrix_csv(out_dir / "metabolites.csv", met);
  write_phenotype_csv(out_dir / "phenotype.csv", data.X.line_ids, data.phenotype);
  write_causal_table_json(out_dir / "causal_table.json", data.causal_table);
}

}  // namespace binn
