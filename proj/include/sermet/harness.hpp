#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sermet/dae.hpp"
#include "sermet/data.hpp"
#include "sermet/matrix.hpp"
#include "sermet/ols.hpp"
#include "sermet/preprocess.hpp"

namespace sermet::harness {

enum class Mode {
  kUnsupervised,
  kMetricAct,
  kMetricVal,
  kMetricActSupervised,
  kMetricValSupervised,
};

Mode mode_from_string(const std::string& name);
std::string mode_name(Mode mode);
bool mode_is_metric(Mode mode);
bool mode_is_supervised(Mode mode);
bool mode_uses_activation(Mode mode);

struct ExperimentConfig {
  std::string manifest_path;
  Mode mode = Mode::kUnsupervised;
  int epochs = 50;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double metric_weight = 1.0;
  double noise_std = 1.0;
  double corrupt_fraction = 1.0;
  std::optional<int> folds;           // defaults to the manifest's fold count
  std::optional<std::uint64_t> seed;  // defaults to the manifest's seed
  std::vector<std::size_t> encoder_hidden;
  double outlier_threshold = 10.0;
  double transfer_fit_fraction = 0.2;
  double svc_c = 1.0;
  bool slope_gradient = true;
  bool euclidean_distance_regressor = false;
  bool parallel_folds = true;
  bool export_embeddings = false;
  std::string out_dir;  // empty: nothing written

  void validate() const;
};

// JSON config file; relative manifest paths resolve against the config's
// directory.
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

struct MetricCell {
  double value = 0.0;
  double p_value = 1.0;
  bool valid = false;  // false: label absent or regression degenerate
  bool insignificant = false;
};

struct AccuracyCell {
  double value = 0.0;
  std::string classes;  // e.g. "N-S-A"
  bool valid = false;
};

struct ResultRow {
  std::string dataset;
  int fold = 0;
  std::size_t eval_count = 0;
  MetricCell act_label, val_label;  // label on latent coordinates
  MetricCell act_dist, val_dist;    // label distances on latent distances
  AccuracyCell ba3, ba4;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
  int insignificant = 0;
  bool valid = false;
  std::string classes;
};

struct EvalReport {
  std::uint64_t seed = 0;
  int folds = 0;
  std::vector<std::string> dataset_order;
  std::vector<ResultRow> rows;

  Aggregate aggregate_metric(const std::string& dataset, MetricCell ResultRow::* cell) const;
  Aggregate aggregate_accuracy(const std::string& dataset, AccuracyCell ResultRow::* cell) const;
};

// Full cross-validated experiment: preprocess, train one model per fold
// (per fold and transfer dataset in the supervised reference modes),
// embed, regress, classify, aggregate. Deterministic given the seed.
// Writes report files, checkpoints and optional embedding exports when
// out_dir is set.
EvalReport run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// Supervised SVC reference on raw standardized features: per-dataset
// stratified cross-validation, no autoencoder involved.
struct RawClassificationRow {
  std::string dataset;
  int fold = 0;
  AccuracyCell ba3, ba4;
};

struct RawReport {
  std::uint64_t seed = 0;
  int folds = 0;
  std::vector<std::string> dataset_order;
  std::vector<RawClassificationRow> rows;
};

RawReport run_raw_classification(const ExperimentConfig& config, std::ostream* log = nullptr);

// Report files: results.csv (per fold and dataset), results.json (rows plus
// aggregates), report.txt (rendered tables). Contents carry results only, so
// runs that produce identical numbers produce identical bytes.
void write_report_files(const EvalReport& report, const std::string& out_dir);
void write_raw_report_files(const RawReport& report, const std::string& out_dir);
std::string render_report(const EvalReport& report);
std::string render_raw_report(const RawReport& report);

// Merge several runs' results.json into side-by-side tables; labels name the
// rows.
std::string render_combined_report(const std::vector<std::pair<std::string, std::string>>&
                                       labeled_result_files);

// Re-evaluates a finished run from its checkpoints (no training).
EvalReport evaluate_run(const std::string& run_dir, const std::string& manifest_override = "",
                        std::ostream* log = nullptr);

// Embedding export for a finished run: one CSV per dataset, either from fold
// k's checkpoint or from a model freshly trained on the full training set.
void embed_run(const std::string& run_dir, std::optional<int> fold, bool full_training,
               const std::string& out_dir, std::ostream* log = nullptr);

// Deterministic stratified fold partition: a disjoint cover, each sample in
// exactly one validation fold.
struct FoldSplit {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
};

std::vector<FoldSplit> stratified_folds(const std::vector<int>& class_ids, int folds,
                                        std::uint64_t seed);

// (v - min) / (max - min); throws when the labels are constant.
std::vector<double> minmax_normalize(const std::vector<double>& values);

}  // namespace sermet::harness
