#include "sermet/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sermet/rng.hpp"

namespace sermet::data {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_double(const std::string& token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

int class_id_from_string(const std::string& token) {
  static const std::map<std::string, int> table = {
      {"n", 0},   {"neutral", 0},
      {"s", 1},   {"sad", 1},     {"sadness", 1},
      {"h", 2},   {"happy", 2},   {"happiness", 2}, {"joy", 2},
      {"a", 3},   {"angry", 3},   {"anger", 3},
  };
  auto it = table.find(lower(trim(token)));
  if (it == table.end())
    throw std::invalid_argument("unknown emotion class label '" + token + "'");
  return it->second;
}

std::string class_letter(int class_id) {
  switch (class_id) {
    case 0: return "N";
    case 1: return "S";
    case 2: return "H";
    case 3: return "A";
    default: throw std::invalid_argument("class id out of range: " + std::to_string(class_id));
  }
}

LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = lower(header[i]);
    if (column.count(name))
      throw std::runtime_error("load_csv: duplicate column '" + header[i] + "' in " + path);
    column[name] = i;
  }

  LabeledDataset ds;
  std::vector<std::size_t> feature_cols(kFeatureCount);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const std::string name = "feat_" + std::to_string(f);
    auto it = column.find(name);
    if (it == column.end())
      throw std::runtime_error("load_csv: missing column '" + name + "' in " + path);
    feature_cols[f] = it->second;
    column.erase(it);
  }
  auto class_it = column.find("class");
  if (class_it == column.end())
    throw std::runtime_error("load_csv: missing column 'class' in " + path);
  const std::size_t class_col = class_it->second;
  column.erase(class_it);

  std::optional<std::size_t> act_col, val_col;
  if (auto it = column.find("activation"); it != column.end()) {
    act_col = it->second;
    column.erase(it);
  }
  if (auto it = column.find("valence"); it != column.end()) {
    val_col = it->second;
    column.erase(it);
  }
  for (const auto& [name, idx] : column)
    ds.warnings.push_back("ignoring unknown column '" + header[idx] + "'");

  std::vector<double> row_values(kFeatureCount);
  std::vector<std::vector<double>> rows;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      ds.warnings.push_back("row " + std::to_string(line_number) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()) + "; row rejected");
      continue;
    }
    bool ok = true;
    for (std::size_t f = 0; f < kFeatureCount && ok; ++f) {
      if (!parse_double(fields[feature_cols[f]], row_values[f])) {
        ds.warnings.push_back("row " + std::to_string(line_number) + ": feature feat_" +
                              std::to_string(f) + " value '" + fields[feature_cols[f]] +
                              "' is not numeric; row rejected");
        ok = false;
      }
    }
    if (!ok) continue;

    double act = 0.0, val = 0.0;
    if (act_col && !parse_double(fields[*act_col], act)) {
      ds.warnings.push_back("row " + std::to_string(line_number) +
                            ": activation value not numeric; row rejected");
      continue;
    }
    if (val_col && !parse_double(fields[*val_col], val)) {
      ds.warnings.push_back("row " + std::to_string(line_number) +
                            ": valence value not numeric; row rejected");
      continue;
    }
    const int class_id = class_id_from_string(fields[class_col]);

    rows.push_back(row_values);
    ds.class_ids.push_back(class_id);
    if (act_col) ds.activation.push_back(act);
    if (val_col) ds.valence.push_back(val);
  }

  if (rows.empty()) throw std::runtime_error("load_csv: no usable data rows in " + path);
  ds.features = Matrix(rows.size(), kFeatureCount);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t f = 0; f < kFeatureCount; ++f) ds.features(i, f) = rows[i][f];
  ds.name = path;
  return ds;
}

LabeledDataset generate_synthetic(std::size_t n, std::uint64_t seed,
                                  const SyntheticConfig& config, Matrix* true_latent) {
  if (n < 16) throw std::invalid_argument("generate_synthetic: need n >= 16");
  const std::size_t factors = 2 + static_cast<std::size_t>(std::max(0, config.nuisance_dims));

  // The lift map is fixed by its own seed so corpora drawn with different
  // sample seeds still live in the same feature space.
  Rng map_rng(config.map_seed);
  Matrix lift(kFeatureCount, factors);
  const double column_scale = 1.0 / std::sqrt(static_cast<double>(factors));
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    for (std::size_t j = 0; j < factors; ++j) lift(i, j) = map_rng.gaussian() * column_scale;
  std::vector<double> offset(kFeatureCount);
  for (double& v : offset) v = map_rng.gaussian() * 0.1;

  Rng rng(seed);
  LabeledDataset ds;
  ds.name = "synthetic";
  ds.features = Matrix(n, kFeatureCount);
  ds.class_ids.resize(n);
  ds.activation.resize(n);
  ds.valence.resize(n);
  if (true_latent) *true_latent = Matrix(n, 2);

  std::vector<double> sample(factors);
  for (std::size_t i = 0; i < n; ++i) {
    const double t1 = rng.uniform(-1.0, 1.0) + config.latent_shift;
    const double t2 = rng.uniform(-1.0, 1.0) + config.latent_shift;
    sample[0] = t1;
    sample[1] = t2;
    for (std::size_t j = 2; j < factors; ++j)
      sample[j] = rng.uniform(-1.0, 1.0) * config.nuisance_scale;

    ds.activation[i] = t1 + config.label_noise * rng.gaussian();
    ds.valence[i] = std::tanh(2.0 * t2) + config.label_noise * rng.gaussian();
    // Quadrants of the emotional plane: activation splits {S,N} from {A,H},
    // valence splits {S,A} from {N,H}.
    if (t1 < 0.0)
      ds.class_ids[i] = t2 < 0.0 ? 1 : 0;  // sad / neutral
    else
      ds.class_ids[i] = t2 < 0.0 ? 3 : 2;  // angry / happy

    if (true_latent) {
      (*true_latent)(i, 0) = t1;
      (*true_latent)(i, 1) = t2;
    }
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      double acc = offset[f];
      for (std::size_t j = 0; j < factors; ++j) acc += lift(f, j) * sample[j];
      ds.features(i, f) = acc + config.feature_noise * rng.gaussian();
    }
  }
  return ds;
}

void export_embeddings(const Matrix& z, const std::vector<int>& class_ids,
                       const std::vector<double>* activation, const std::vector<double>* valence,
                       const std::string& path) {
  const std::size_t n = z.rows();
  if (z.cols() != 2) throw std::invalid_argument("export_embeddings: expected 2 columns");
  if (class_ids.size() != n)
    throw std::invalid_argument("export_embeddings: class id count mismatch");
  if (activation && activation->size() != n)
    throw std::invalid_argument("export_embeddings: activation length mismatch");
  if (valence && valence->size() != n)
    throw std::invalid_argument("export_embeddings: valence length mismatch");

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("export_embeddings: cannot open " + path);
  std::fprintf(f, "z1,z2,class,activation,valence\n");
  for (std::size_t i = 0; i < n; ++i) {
    std::fprintf(f, "%.17g,%.17g,%s,", z(i, 0), z(i, 1), class_letter(class_ids[i]).c_str());
    if (activation)
      std::fprintf(f, "%.17g,", (*activation)[i]);
    else
      std::fprintf(f, "NA,");
    if (valence)
      std::fprintf(f, "%.17g\n", (*valence)[i]);
    else
      std::fprintf(f, "NA\n");
  }
  std::fclose(f);
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_csv: cannot open " + path);
  for (std::size_t j = 0; j < kFeatureCount; ++j) std::fprintf(f, "feat_%zu,", j);
  std::fprintf(f, "class");
  if (ds.has_activation()) std::fprintf(f, ",activation");
  if (ds.has_valence()) std::fprintf(f, ",valence");
  std::fprintf(f, "\n");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) std::fprintf(f, "%.17g,", ds.features(i, j));
    std::fprintf(f, "%s", class_letter(ds.class_ids[i]).c_str());
    if (ds.has_activation()) std::fprintf(f, ",%.17g", ds.activation[i]);
    if (ds.has_valence()) std::fprintf(f, ",%.17g", ds.valence[i]);
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

const ManifestEntry& Manifest::train_entry() const {
  for (const ManifestEntry& e : datasets)
    if (e.role == Role::kTrain) return e;
  throw std::runtime_error("manifest: no train dataset");
}

std::vector<ManifestEntry> Manifest::transfer_entries() const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : datasets)
    if (e.role == Role::kTransfer) out.push_back(e);
  return out;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_manifest: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_manifest: " + path + ": " + e.what());
  }

  Manifest m;
  m.seed = j.value("seed", 1ULL);
  m.folds = j.value("folds", 5);
  if (m.folds < 2) throw std::runtime_error("load_manifest: folds must be >= 2");
  if (!j.contains("datasets") || !j["datasets"].is_array() || j["datasets"].empty())
    throw std::runtime_error("load_manifest: 'datasets' array required");

  int train_count = 0;
  for (const auto& entry : j["datasets"]) {
    ManifestEntry e;
    e.name = entry.at("name").get<std::string>();
    e.path = entry.at("path").get<std::string>();
    const std::string role = entry.at("role").get<std::string>();
    if (role == "train") {
      e.role = Role::kTrain;
      ++train_count;
    } else if (role == "transfer") {
      e.role = Role::kTransfer;
    } else {
      throw std::runtime_error("load_manifest: role must be 'train' or 'transfer', got '" +
                               role + "'");
    }
    m.datasets.push_back(std::move(e));
  }
  if (train_count != 1)
    throw std::runtime_error("load_manifest: exactly one train dataset required, found " +
                             std::to_string(train_count));
  return m;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  nlohmann::ordered_json j;
  j["seed"] = manifest.seed;
  j["folds"] = manifest.folds;
  j["datasets"] = nlohmann::ordered_json::array();
  for (const ManifestEntry& e : manifest.datasets) {
    j["datasets"].push_back({{"name", e.name},
                             {"path", e.path},
                             {"role", e.role == Role::kTrain ? "train" : "transfer"}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace sermet::data
