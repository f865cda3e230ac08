#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sermet/matrix.hpp"

namespace sermet::data {

inline constexpr std::size_t kFeatureCount = 88;

// Class ids: 0 = neutral (N), 1 = sad (S), 2 = happy (H), 3 = angry (A).
int class_id_from_string(const std::string& token);
std::string class_letter(int class_id);

enum class Role { kTrain, kTransfer };

struct LabeledDataset {
  std::string name;
  Matrix features;  // [n x 88]
  std::vector<int> class_ids;
  std::vector<double> activation;  // empty when the corpus lacks the label
  std::vector<double> valence;
  Role role = Role::kTransfer;
  std::vector<std::string> warnings;  // rejected rows, ignored columns

  std::size_t size() const { return features.rows(); }
  bool has_activation() const { return !activation.empty(); }
  bool has_valence() const { return !valence.empty(); }
};

// Feature CSV: header feat_0..feat_87,class[,activation][,valence] in any
// column order; '.' decimal separator; class letters or full names. Rows
// with unparsable feature or label cells are rejected with a per-row
// diagnostic in warnings; structural problems (missing columns, unknown
// class label, no data rows) throw.
LabeledDataset load_csv(const std::string& path);

struct SyntheticConfig {
  double label_noise = 0.05;    // sigma on the activation/valence labels
  double feature_noise = 0.1;   // isotropic noise on the 88-dim lift
  int nuisance_dims = 8;        // extra generative factors hidden in the lift
  double nuisance_scale = 3.0;  // their scale relative to the emotional plane
  double latent_shift = 0.0;    // distribution shift for transfer corpora
  std::uint64_t map_seed = 24049;  // fixes the lift map across corpora
};

// Desk-scale stand-in corpus: a 2-D emotional plane drives the labels
// (activation linear in dim 1, valence a squashed function of dim 2, classes
// by quadrant), nuisance factors and noise hide it inside 88 features.
// true_latent, when non-null, receives the generating plane.
LabeledDataset generate_synthetic(std::size_t n, std::uint64_t seed,
                                  const SyntheticConfig& config = {},
                                  Matrix* true_latent = nullptr);

// Plot-ready dump: header z1,z2,class,activation,valence; 17 significant
// digits; NA for absent labels.
void export_embeddings(const Matrix& z, const std::vector<int>& class_ids,
                       const std::vector<double>* activation, const std::vector<double>* valence,
                       const std::string& path);

// Writes a dataset back out in the feature CSV schema (17 significant
// digits, so load_csv round-trips exactly).
void save_csv(const LabeledDataset& ds, const std::string& path);

struct ManifestEntry {
  std::string name;
  std::string path;
  Role role = Role::kTransfer;
};

struct Manifest {
  std::vector<ManifestEntry> datasets;  // exactly one train entry
  std::uint64_t seed = 1;
  int folds = 5;

  const ManifestEntry& train_entry() const;
  std::vector<ManifestEntry> transfer_entries() const;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

}  // namespace sermet::data
