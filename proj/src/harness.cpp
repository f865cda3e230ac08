#include "sermet/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sermet/metric.hpp"
#include "sermet/nn.hpp"
#include "sermet/rng.hpp"
#include "sermet/svc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace sermet::harness {

namespace {

std::string g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string f3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

}  // namespace

Mode mode_from_string(const std::string& name) {
  if (name == "unsupervised") return Mode::kUnsupervised;
  if (name == "metric-act") return Mode::kMetricAct;
  if (name == "metric-val") return Mode::kMetricVal;
  if (name == "metric-act-supervised") return Mode::kMetricActSupervised;
  if (name == "metric-val-supervised") return Mode::kMetricValSupervised;
  throw std::invalid_argument(
      "unknown mode '" + name +
      "' (expected unsupervised, metric-act, metric-val, metric-act-supervised, "
      "metric-val-supervised)");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kUnsupervised: return "unsupervised";
    case Mode::kMetricAct: return "metric-act";
    case Mode::kMetricVal: return "metric-val";
    case Mode::kMetricActSupervised: return "metric-act-supervised";
    case Mode::kMetricValSupervised: return "metric-val-supervised";
  }
  return "unsupervised";
}

bool mode_is_metric(Mode mode) { return mode != Mode::kUnsupervised; }

bool mode_is_supervised(Mode mode) {
  return mode == Mode::kMetricActSupervised || mode == Mode::kMetricValSupervised;
}

bool mode_uses_activation(Mode mode) {
  return mode == Mode::kMetricAct || mode == Mode::kMetricActSupervised;
}

void ExperimentConfig::validate() const {
  if (manifest_path.empty()) throw std::invalid_argument("config: manifest path required");
  if (epochs <= 0) throw std::invalid_argument("config: epochs must be > 0");
  if (batch_size == 0) throw std::invalid_argument("config: batch size must be > 0");
  if (learning_rate <= 0.0) throw std::invalid_argument("config: learning rate must be > 0");
  if (metric_weight < 0.0) throw std::invalid_argument("config: metric weight must be >= 0");
  if (noise_std < 0.0) throw std::invalid_argument("config: noise std must be >= 0");
  if (corrupt_fraction <= 0.0 || corrupt_fraction > 1.0)
    throw std::invalid_argument("config: corrupt fraction must be in (0, 1]");
  if (folds && *folds < 2) throw std::invalid_argument("config: folds must be >= 2");
  if (outlier_threshold <= 0.0)
    throw std::invalid_argument("config: outlier threshold must be > 0");
  if (transfer_fit_fraction <= 0.0 || transfer_fit_fraction >= 1.0)
    throw std::invalid_argument("config: transfer fit fraction must be in (0, 1)");
  if (svc_c <= 0.0) throw std::invalid_argument("config: svc C must be > 0");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_config: " + path + ": " + e.what());
  }

  ExperimentConfig cfg;
  if (!j.contains("manifest")) throw std::runtime_error("load_config: 'manifest' required");
  fs::path manifest = j["manifest"].get<std::string>();
  if (manifest.is_relative()) manifest = fs::path(path).parent_path() / manifest;
  cfg.manifest_path = manifest.string();

  cfg.mode = mode_from_string(j.value("mode", std::string("unsupervised")));
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.metric_weight = j.value("metric_weight", cfg.metric_weight);
  cfg.noise_std = j.value("noise_std", cfg.noise_std);
  cfg.corrupt_fraction = j.value("corrupt_fraction", cfg.corrupt_fraction);
  if (j.contains("folds")) cfg.folds = j["folds"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("encoder_hidden"))
    cfg.encoder_hidden = j["encoder_hidden"].get<std::vector<std::size_t>>();
  cfg.outlier_threshold = j.value("outlier_threshold", cfg.outlier_threshold);
  cfg.transfer_fit_fraction = j.value("transfer_fit_fraction", cfg.transfer_fit_fraction);
  cfg.svc_c = j.value("svc_c", cfg.svc_c);
  cfg.slope_gradient = j.value("slope_gradient", cfg.slope_gradient);
  cfg.euclidean_distance_regressor =
      j.value("euclidean_distance_regressor", cfg.euclidean_distance_regressor);
  cfg.parallel_folds = j.value("parallel_folds", cfg.parallel_folds);
  cfg.export_embeddings = j.value("export_embeddings", cfg.export_embeddings);
  cfg.validate();
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  ordered_json j;
  j["manifest"] = cfg.manifest_path;
  j["mode"] = mode_name(cfg.mode);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["metric_weight"] = cfg.metric_weight;
  j["noise_std"] = cfg.noise_std;
  j["corrupt_fraction"] = cfg.corrupt_fraction;
  if (cfg.folds) j["folds"] = *cfg.folds;
  if (cfg.seed) j["seed"] = *cfg.seed;
  j["encoder_hidden"] = cfg.encoder_hidden;
  j["outlier_threshold"] = cfg.outlier_threshold;
  j["transfer_fit_fraction"] = cfg.transfer_fit_fraction;
  j["svc_c"] = cfg.svc_c;
  j["slope_gradient"] = cfg.slope_gradient;
  j["euclidean_distance_regressor"] = cfg.euclidean_distance_regressor;
  j["parallel_folds"] = cfg.parallel_folds;
  j["export_embeddings"] = cfg.export_embeddings;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot open " + path);
  out << j.dump(2) << "\n";
}

std::vector<FoldSplit> stratified_folds(const std::vector<int>& class_ids, int folds,
                                        std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("stratified_folds: need at least 2 folds");
  if (class_ids.size() < static_cast<std::size_t>(folds))
    throw std::invalid_argument("stratified_folds: fewer samples than folds");

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < class_ids.size(); ++i) groups[class_ids[i]].push_back(i);

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> fold_members(folds);
  for (auto& [cls, idx] : groups) {
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i)
      fold_members[i % static_cast<std::size_t>(folds)].push_back(idx[i]);
  }

  std::vector<FoldSplit> splits(folds);
  for (int f = 0; f < folds; ++f) {
    splits[f].validation_indices = fold_members[f];
    std::sort(splits[f].validation_indices.begin(), splits[f].validation_indices.end());
    for (int other = 0; other < folds; ++other) {
      if (other == f) continue;
      splits[f].train_indices.insert(splits[f].train_indices.end(), fold_members[other].begin(),
                                     fold_members[other].end());
    }
    std::sort(splits[f].train_indices.begin(), splits[f].train_indices.end());
  }
  return splits;
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("minmax_normalize: empty labels");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo))
    throw std::invalid_argument("minmax_normalize: labels are constant, metric supervision "
                                "would be degenerate");
  std::vector<double> out(values.size());
  const double span = hi - lo;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / span;
  return out;
}

// ---------------------------------------------------------------------------
// experiment internals

namespace {

data::LabeledDataset subset_dataset(const data::LabeledDataset& ds,
                                    std::span<const std::size_t> idx) {
  data::LabeledDataset out;
  out.name = ds.name;
  out.role = ds.role;
  out.features = take_rows(ds.features, idx);
  out.class_ids = take(ds.class_ids, idx);
  if (ds.has_activation()) out.activation = take(ds.activation, idx);
  if (ds.has_valence()) out.valence = take(ds.valence, idx);
  return out;
}

struct PreparedTransfer {
  std::string name;
  Matrix eval_features;  // standardized with the 20% scaler
  std::vector<int> eval_classes;
  std::vector<double> eval_activation;  // raw; empty when absent
  std::vector<double> eval_valence;
  std::vector<double> supervision_labels;  // normalized; filled in supervised modes
};

struct Context {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  int folds = 0;
  data::LabeledDataset train;  // outlier-removed
  std::vector<FoldSplit> splits;
  std::vector<double> train_metric_labels;  // normalized; semi-supervised modes only
  std::vector<PreparedTransfer> transfers;
  std::vector<std::string> dataset_order;
};

void require_label(const data::LabeledDataset& ds, bool activation, const std::string& why) {
  if (activation && !ds.has_activation())
    throw std::runtime_error("dataset '" + ds.name + "' lacks the activation label " + why);
  if (!activation && !ds.has_valence())
    throw std::runtime_error("dataset '" + ds.name + "' lacks the valence label " + why);
}

Context prepare(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  Context ctx;
  ctx.cfg = cfg;

  const data::Manifest manifest = data::load_manifest(cfg.manifest_path);
  ctx.seed = cfg.seed.value_or(manifest.seed);
  ctx.folds = cfg.folds.value_or(manifest.folds);
  if (ctx.folds < 2) throw std::runtime_error("experiment: folds must be >= 2");

  const fs::path manifest_dir = fs::path(cfg.manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    if (fp.is_relative()) fp = manifest_dir / fp;
    return fp.string();
  };

  const data::ManifestEntry& train_entry = manifest.train_entry();
  data::LabeledDataset train_raw = data::load_csv(resolve(train_entry.path));
  train_raw.name = train_entry.name;
  train_raw.role = data::Role::kTrain;
  if (log)
    for (const std::string& w : train_raw.warnings) *log << train_entry.name << ": " << w << "\n";

  const bool metric = mode_is_metric(cfg.mode);
  const bool supervised = mode_is_supervised(cfg.mode);
  const bool uses_activation = mode_uses_activation(cfg.mode);
  if (metric && !supervised)
    require_label(train_raw, uses_activation, "required by mode " + mode_name(cfg.mode));

  const prep::OutlierResult train_outliers =
      prep::remove_outliers(train_raw.features, cfg.outlier_threshold);
  ctx.train = subset_dataset(train_raw, train_outliers.kept_indices);
  if (log)
    *log << train_entry.name << ": removed " << train_outliers.removed_indices.size()
         << " outlier rows, kept " << ctx.train.size() << "\n";

  ctx.splits = stratified_folds(ctx.train.class_ids, ctx.folds, mix_seed(ctx.seed, 0xF01D));

  if (metric && !supervised)
    ctx.train_metric_labels =
        minmax_normalize(uses_activation ? ctx.train.activation : ctx.train.valence);

  if (!supervised) ctx.dataset_order.push_back(train_entry.name);

  for (const data::ManifestEntry& entry : manifest.transfer_entries()) {
    data::LabeledDataset raw = data::load_csv(resolve(entry.path));
    raw.name = entry.name;
    raw.role = data::Role::kTransfer;
    if (log)
      for (const std::string& w : raw.warnings) *log << entry.name << ": " << w << "\n";
    if (supervised) require_label(raw, uses_activation, "required by mode " + mode_name(cfg.mode));

    const prep::OutlierResult kept_rows =
        prep::remove_outliers(raw.features, cfg.outlier_threshold);
    data::LabeledDataset kept = subset_dataset(raw, kept_rows.kept_indices);

    prep::TransferSplit split =
        prep::transfer_standardize(kept.features, kept.class_ids, cfg.transfer_fit_fraction,
                                   mix_seed(ctx.seed, fnv1a(entry.name)));

    PreparedTransfer t;
    t.name = entry.name;
    t.eval_features = std::move(split.eval_standardized);
    t.eval_classes = take(kept.class_ids, split.eval_indices);
    if (kept.has_activation()) t.eval_activation = take(kept.activation, split.eval_indices);
    if (kept.has_valence()) t.eval_valence = take(kept.valence, split.eval_indices);
    if (supervised) {
      const std::vector<double> normalized =
          minmax_normalize(uses_activation ? kept.activation : kept.valence);
      t.supervision_labels = take(normalized, split.eval_indices);
    }
    ctx.dataset_order.push_back(entry.name);
    ctx.transfers.push_back(std::move(t));
  }
  return ctx;
}

struct TrainSpec {
  const Matrix* x_train = nullptr;                 // standardized clean rows
  const std::vector<double>* row_labels = nullptr; // normalized, aligned with x_train
  const Matrix* sup_x = nullptr;                   // supervision pool (supervised modes)
  const std::vector<double>* sup_labels = nullptr;
  std::string tag;
};

dae::DaeModel train_model(const ExperimentConfig& cfg, const TrainSpec& spec, Rng& rng,
                          std::ostream* log) {
  dae::DaeConfig dcfg;
  dcfg.input_dim = spec.x_train->cols();
  dcfg.latent_dim = 2;
  dcfg.encoder_hidden = cfg.encoder_hidden;
  dcfg.noise_std = cfg.noise_std;
  dcfg.metric_weight = cfg.metric_weight;
  dcfg.corrupt_fraction = cfg.corrupt_fraction;
  dae::DaeModel model = dae::make_dae(dcfg, rng);

  nn::AdamConfig adam;
  adam.learning_rate = cfg.learning_rate;
  nn::AdamState enc_state = nn::AdamState::init(model.encoder, adam);
  nn::AdamState dec_state = nn::AdamState::init(model.decoder, adam);

  const bool use_metric =
      cfg.metric_weight != 0.0 && (spec.row_labels != nullptr || spec.sup_x != nullptr);
  metric::MetricOptions mopts;
  mopts.slope_gradient = cfg.slope_gradient;

  const std::size_t n = spec.x_train->rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::size_t> sup_order;
  std::size_t sup_cursor = 0;
  if (use_metric && spec.sup_x) {
    sup_order.resize(spec.sup_x->rows());
    std::iota(sup_order.begin(), sup_order.end(), 0);
    rng.shuffle(sup_order);
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double rec_sum = 0.0, met_sum = 0.0, slope_sum = 0.0;
    int batches = 0, metric_batches = 0, skipped = 0;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      const std::span<const std::size_t> chunk(order.data() + start, count);
      const Matrix x_clean = take_rows(*spec.x_train, chunk);
      const Matrix x_noisy = dae::corrupt(x_clean, cfg.noise_std, rng, cfg.corrupt_fraction);

      nn::Tape enc_tape, dec_tape;
      const Matrix z = nn::forward(model.encoder, x_noisy, &enc_tape);
      const Matrix reconstruction = nn::forward(model.decoder, z, &dec_tape);

      Matrix grad_rec;
      const double rec_loss = dae::reconstruction_error(x_clean, reconstruction, &grad_rec);

      Matrix dz;
      nn::Gradients dec_grads = nn::backward(model.decoder, dec_tape, grad_rec, &dz);

      double met_loss = 0.0;
      if (use_metric && spec.row_labels && count >= 2) {
        const std::vector<double> batch_labels = take(*spec.row_labels, chunk);
        const metric::MetricLossResult ml = metric::metric_loss(z, batch_labels, mopts);
        if (ml.skipped) {
          ++skipped;
        } else {
          met_loss += ml.total_loss;
          slope_sum += ml.slope;
          ++metric_batches;
          for (std::size_t i = 0; i < dz.size(); ++i)
            dz.data()[i] += cfg.metric_weight * ml.grad_z.data()[i];
        }
      }
      nn::Gradients enc_grads = nn::backward(model.encoder, enc_tape, dz);

      if (use_metric && spec.sup_x) {
        std::vector<std::size_t> sup_chunk;
        sup_chunk.reserve(cfg.batch_size);
        for (std::size_t k = 0; k < cfg.batch_size; ++k) {
          if (sup_cursor == sup_order.size()) {
            rng.shuffle(sup_order);
            sup_cursor = 0;
          }
          sup_chunk.push_back(sup_order[sup_cursor++]);
        }
        nn::Tape sup_tape;
        const Matrix z_sup = nn::forward(model.encoder, take_rows(*spec.sup_x, sup_chunk), &sup_tape);
        const metric::MetricLossResult ml =
            metric::metric_loss(z_sup, take(*spec.sup_labels, sup_chunk), mopts);
        if (ml.skipped) {
          ++skipped;
        } else {
          met_loss += ml.total_loss;
          slope_sum += ml.slope;
          ++metric_batches;
          Matrix upstream = ml.grad_z;
          for (std::size_t i = 0; i < upstream.size(); ++i)
            upstream.data()[i] *= cfg.metric_weight;
          const nn::Gradients sup_grads = nn::backward(model.encoder, sup_tape, upstream);
          enc_grads.add_scaled(sup_grads, 1.0);
        }
      }

      const double total = rec_loss + cfg.metric_weight * met_loss;
      if (!std::isfinite(total))
        throw std::runtime_error("training diverged (non-finite loss) in " + spec.tag +
                                 " epoch " + std::to_string(epoch + 1));

      nn::adam_step(model.encoder, enc_grads, enc_state);
      nn::adam_step(model.decoder, dec_grads, dec_state);
      rec_sum += rec_loss;
      met_sum += met_loss;
      ++batches;
    }

    if (log) {
      *log << spec.tag << " epoch " << (epoch + 1) << "/" << cfg.epochs << " rec "
           << f3(rec_sum / batches);
      if (use_metric) {
        *log << " met " << f3(metric_batches ? met_sum / metric_batches : 0.0) << " p "
             << f3(metric_batches ? slope_sum / metric_batches : 0.0) << " skipped " << skipped;
      }
      *log << "\n";
    }
  }
  return model;
}

MetricCell metric_cell_from(const ols::OlsResult& r) {
  MetricCell cell;
  cell.valid = !r.degenerate;
  cell.value = r.r2_adjusted;
  cell.p_value = r.p_value;
  cell.insignificant = cell.valid && r.insignificant();
  return cell;
}

// Classifier inputs are standardized with training-side statistics so the
// SVC sees unit-scale features whatever scale the embedding settled at.
struct FittedSvc {
  prep::Scaler scaler;
  svc::LinearSvcModel model;
};

using SvcCache = std::map<std::vector<int>, FittedSvc>;

AccuracyCell accuracy_for(const std::vector<int>& scenario, const Matrix& z_train,
                          const std::vector<int>& train_classes, const Matrix& z_eval,
                          const std::vector<int>& eval_classes, double svc_c, SvcCache& cache) {
  AccuracyCell cell;

  std::set<int> eval_present(eval_classes.begin(), eval_classes.end());
  std::set<int> train_present(train_classes.begin(), train_classes.end());
  std::vector<int> effective;
  for (int cls : scenario)
    if (eval_present.count(cls) && train_present.count(cls)) effective.push_back(cls);
  if (effective.size() < 2) return cell;

  std::string classes;
  for (int cls : effective) {
    if (!classes.empty()) classes += "-";
    classes += data::class_letter(cls);
  }

  auto it = cache.find(effective);
  if (it == cache.end()) {
    std::vector<std::size_t> train_rows;
    for (std::size_t i = 0; i < train_classes.size(); ++i)
      if (std::find(effective.begin(), effective.end(), train_classes[i]) != effective.end())
        train_rows.push_back(i);
    FittedSvc fitted;
    fitted.scaler = prep::fit_scaler(take_rows(z_train, train_rows));
    const Matrix x = prep::apply_scaler(fitted.scaler, take_rows(z_train, train_rows));
    const std::vector<int> y = take(train_classes, train_rows);
    fitted.model = svc::svc_train(x, y, svc_c);
    it = cache.emplace(effective, std::move(fitted)).first;
  }

  std::vector<std::size_t> eval_rows;
  for (std::size_t i = 0; i < eval_classes.size(); ++i)
    if (std::find(effective.begin(), effective.end(), eval_classes[i]) != effective.end())
      eval_rows.push_back(i);
  if (eval_rows.empty()) return cell;

  const std::vector<int> predicted = svc::svc_predict(
      it->second.model, prep::apply_scaler(it->second.scaler, take_rows(z_eval, eval_rows)));
  cell.value = svc::balanced_accuracy(take(eval_classes, eval_rows), predicted);
  cell.classes = classes;
  cell.valid = true;
  return cell;
}

const std::vector<int> kThreeClass{0, 1, 3};   // N-S-A
const std::vector<int> kFourClass{0, 1, 2, 3}; // N-S-H-A

ResultRow evaluate_dataset(const std::string& name, int fold, const Matrix& z_eval,
                           const std::vector<int>& eval_classes,
                           const std::vector<double>* act, const std::vector<double>* val,
                           const Matrix& z_train, const std::vector<int>& train_classes,
                           const ExperimentConfig& cfg, SvcCache& cache) {
  ResultRow row;
  row.dataset = name;
  row.fold = fold;
  row.eval_count = z_eval.rows();

  if (act && z_eval.rows() > 3) {
    row.act_label = metric_cell_from(ols::ols_label_analysis(z_eval, *act));
    row.act_dist = metric_cell_from(
        ols::ols_distance_analysis(z_eval, *act, cfg.euclidean_distance_regressor));
  }
  if (val && z_eval.rows() > 3) {
    row.val_label = metric_cell_from(ols::ols_label_analysis(z_eval, *val));
    row.val_dist = metric_cell_from(
        ols::ols_distance_analysis(z_eval, *val, cfg.euclidean_distance_regressor));
  }
  row.ba3 = accuracy_for(kThreeClass, z_train, train_classes, z_eval, eval_classes, cfg.svc_c,
                         cache);
  row.ba4 = accuracy_for(kFourClass, z_train, train_classes, z_eval, eval_classes, cfg.svc_c,
                         cache);
  return row;
}

struct EmbeddingDump {
  std::string file_name;
  Matrix z;
  std::vector<int> classes;
  std::vector<double> activation, valence;  // empty when absent
};

struct FoldOutcome {
  std::vector<ResultRow> rows;
  struct Ckpt {
    std::string label;
    dae::DaeModel model;
    prep::Scaler scaler;
  };
  std::vector<Ckpt> checkpoints;
  std::vector<EmbeddingDump> embeddings;
  std::string log;
};

// Evaluation of one trained model over the fold's validation split (skipped
// when val_* is null, as in the supervised reference modes) plus a set of
// transfer datasets.
std::vector<ResultRow> evaluate_model(const ExperimentConfig& cfg, const dae::DaeModel& model,
                                      int fold, const Matrix& x_train,
                                      const std::vector<int>& train_classes,
                                      const std::string& train_name, const Matrix* x_val,
                                      const std::vector<int>* val_classes,
                                      const std::vector<double>* val_act,
                                      const std::vector<double>* val_val,
                                      const std::vector<const PreparedTransfer*>& transfers,
                                      std::vector<EmbeddingDump>* dumps) {
  std::vector<ResultRow> rows;
  const Matrix z_train = dae::encode(model, x_train);
  SvcCache cache;

  if (x_val) {
    const Matrix z_val = dae::encode(model, *x_val);
    rows.push_back(evaluate_dataset(train_name, fold, z_val, *val_classes, val_act, val_val,
                                    z_train, train_classes, cfg, cache));
    if (dumps) {
      EmbeddingDump dump;
      dump.file_name = sanitize(train_name) + "_fold" + std::to_string(fold) + ".csv";
      dump.z = z_val;
      dump.classes = *val_classes;
      if (val_act) dump.activation = *val_act;
      if (val_val) dump.valence = *val_val;
      dumps->push_back(std::move(dump));
    }
  }

  for (const PreparedTransfer* t : transfers) {
    const Matrix z_t = dae::encode(model, t->eval_features);
    rows.push_back(evaluate_dataset(
        t->name, fold, z_t, t->eval_classes,
        t->eval_activation.empty() ? nullptr : &t->eval_activation,
        t->eval_valence.empty() ? nullptr : &t->eval_valence, z_train, train_classes, cfg,
        cache));
    if (dumps) {
      EmbeddingDump dump;
      dump.file_name = sanitize(t->name) + "_fold" + std::to_string(fold) + ".csv";
      dump.z = z_t;
      dump.classes = t->eval_classes;
      dump.activation = t->eval_activation;
      dump.valence = t->eval_valence;
      dumps->push_back(std::move(dump));
    }
  }
  return rows;
}

FoldOutcome run_fold(const Context& ctx, int fold) {
  const ExperimentConfig& cfg = ctx.cfg;
  const FoldSplit& split = ctx.splits[fold];
  FoldOutcome outcome;
  std::ostringstream fold_log;

  const Matrix train_raw = take_rows(ctx.train.features, split.train_indices);
  const prep::Scaler scaler = prep::fit_scaler(train_raw);
  const Matrix x_train = prep::apply_scaler(scaler, train_raw);
  const std::vector<int> train_classes = take(ctx.train.class_ids, split.train_indices);

  const Matrix x_val =
      prep::apply_scaler(scaler, take_rows(ctx.train.features, split.validation_indices));
  const std::vector<int> val_classes = take(ctx.train.class_ids, split.validation_indices);
  std::vector<double> val_act, val_val;
  if (ctx.train.has_activation()) val_act = take(ctx.train.activation, split.validation_indices);
  if (ctx.train.has_valence()) val_val = take(ctx.train.valence, split.validation_indices);

  std::vector<EmbeddingDump>* dumps = cfg.export_embeddings ? &outcome.embeddings : nullptr;

  if (!mode_is_supervised(cfg.mode)) {
    std::vector<double> row_labels;
    TrainSpec spec;
    spec.x_train = &x_train;
    spec.tag = "fold " + std::to_string(fold);
    if (mode_is_metric(cfg.mode)) {
      row_labels = take(ctx.train_metric_labels, split.train_indices);
      spec.row_labels = &row_labels;
    }
    Rng rng(mix_seed(ctx.seed, 1000 + static_cast<std::uint64_t>(fold)));
    dae::DaeModel model = train_model(cfg, spec, rng, &fold_log);

    std::vector<const PreparedTransfer*> transfers;
    for (const PreparedTransfer& t : ctx.transfers) transfers.push_back(&t);
    outcome.rows = evaluate_model(cfg, model, fold, x_train, train_classes, ctx.train.name,
                                  &x_val, &val_classes,
                                  val_act.empty() ? nullptr : &val_act,
                                  val_val.empty() ? nullptr : &val_val, transfers, dumps);
    outcome.checkpoints.push_back(
        {"fold_" + std::to_string(fold), std::move(model), scaler});
  } else {
    // Reference modes: one model per transfer dataset, supervised by that
    // dataset's labels; the training corpus still drives reconstruction.
    for (std::size_t d = 0; d < ctx.transfers.size(); ++d) {
      const PreparedTransfer& t = ctx.transfers[d];
      TrainSpec spec;
      spec.x_train = &x_train;
      spec.sup_x = &t.eval_features;
      spec.sup_labels = &t.supervision_labels;
      spec.tag = "fold " + std::to_string(fold) + " [" + t.name + "]";
      Rng rng(mix_seed(mix_seed(ctx.seed, 1000 + static_cast<std::uint64_t>(fold)),
                       0xD5 + static_cast<std::uint64_t>(d)));
      dae::DaeModel model = train_model(cfg, spec, rng, &fold_log);

      std::vector<ResultRow> rows =
          evaluate_model(cfg, model, fold, x_train, train_classes, ctx.train.name, nullptr,
                         nullptr, nullptr, nullptr, {&t}, dumps);
      outcome.rows.insert(outcome.rows.end(), rows.begin(), rows.end());
      outcome.checkpoints.push_back(
          {"fold_" + std::to_string(fold) + "_" + sanitize(t.name), std::move(model), scaler});
    }
  }

  outcome.log = fold_log.str();
  return outcome;
}

void sort_rows(EvalReport& report) {
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < report.dataset_order.size(); ++i)
    order[report.dataset_order[i]] = i;
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [&](const ResultRow& a, const ResultRow& b) {
                     const std::size_t ia = order.at(a.dataset), ib = order.at(b.dataset);
                     if (ia != ib) return ia < ib;
                     return a.fold < b.fold;
                   });
}

}  // namespace

// ---------------------------------------------------------------------------
// aggregation and rendering

namespace {

Aggregate aggregate_values(const std::vector<double>& values, int folds, int insignificant,
                           const std::string& classes) {
  Aggregate agg;
  agg.count = static_cast<int>(values.size());
  agg.insignificant = insignificant;
  agg.classes = classes;
  if (values.empty() || agg.count != folds) return agg;  // partial coverage stays NA
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  agg.mean = mean;
  agg.stddev = std::sqrt(var);
  agg.valid = true;
  return agg;
}

}  // namespace

Aggregate EvalReport::aggregate_metric(const std::string& dataset,
                                       MetricCell ResultRow::* cell) const {
  std::vector<double> values;
  int insignificant = 0;
  for (const ResultRow& row : rows) {
    if (row.dataset != dataset) continue;
    const MetricCell& c = row.*cell;
    if (!c.valid) continue;
    values.push_back(c.value);
    if (c.insignificant) ++insignificant;
  }
  return aggregate_values(values, folds, insignificant, "");
}

Aggregate EvalReport::aggregate_accuracy(const std::string& dataset,
                                         AccuracyCell ResultRow::* cell) const {
  std::vector<double> values;
  std::string classes;
  bool consistent = true;
  for (const ResultRow& row : rows) {
    if (row.dataset != dataset) continue;
    const AccuracyCell& c = row.*cell;
    if (!c.valid) continue;
    if (classes.empty())
      classes = c.classes;
    else if (classes != c.classes)
      consistent = false;
    values.push_back(c.value);
  }
  if (!consistent) return Aggregate{};
  return aggregate_values(values, folds, 0, classes);
}

namespace {

std::string metric_cell_csv(const MetricCell& c) {
  if (!c.valid) return "NA,NA";
  return g17(c.value) + "," + g17(c.p_value);
}

std::string accuracy_cell_csv(const AccuracyCell& c) {
  if (!c.valid) return "NA,NA";
  return g17(c.value) + "," + c.classes;
}

ordered_json metric_cell_json(const MetricCell& c) {
  if (!c.valid) return nullptr;
  return ordered_json{{"value", c.value},
                      {"p_value", c.p_value},
                      {"insignificant", c.insignificant}};
}

ordered_json accuracy_cell_json(const AccuracyCell& c) {
  if (!c.valid) return nullptr;
  return ordered_json{{"value", c.value}, {"classes", c.classes}};
}

MetricCell metric_cell_from_json(const json& j) {
  MetricCell c;
  if (j.is_null()) return c;
  c.valid = true;
  c.value = j.at("value").get<double>();
  c.p_value = j.at("p_value").get<double>();
  c.insignificant = j.at("insignificant").get<bool>();
  return c;
}

AccuracyCell accuracy_cell_from_json(const json& j) {
  AccuracyCell c;
  if (j.is_null()) return c;
  c.valid = true;
  c.value = j.at("value").get<double>();
  c.classes = j.at("classes").get<std::string>();
  return c;
}

ordered_json aggregate_json(const Aggregate& a) {
  if (!a.valid) return nullptr;
  ordered_json j{{"mean", a.mean}, {"stddev", a.stddev}, {"count", a.count}};
  if (a.insignificant > 0) j["insignificant_folds"] = a.insignificant;
  if (!a.classes.empty()) j["classes"] = a.classes;
  return j;
}

std::string format_metric_aggregate(const Aggregate& a) {
  if (!a.valid) return "NA";
  std::string s = f3(a.mean) + " +- " + f3(a.stddev);
  if (2 * a.insignificant >= a.count) s += " *";
  return s;
}

std::string format_accuracy_aggregate(const Aggregate& a) {
  if (!a.valid) return "NA";
  std::string s = f3(a.mean) + " +- " + f3(a.stddev);
  if (!a.classes.empty()) s += " (" + a.classes + ")";
  return s;
}

constexpr const char* kCsvHeader =
    "dataset,fold,eval_count,r2adj_act,p_act,r2adj_val,p_val,dist_r2adj_act,dist_p_act,"
    "dist_r2adj_val,dist_p_val,ba3,ba3_classes,ba4,ba4_classes";

}  // namespace

std::string render_report(const EvalReport& report) {
  std::ostringstream out;
  out << "experiment results\n";
  out << "seed " << report.seed << ", " << report.folds << "-fold cross-validation\n";
  out << "note: metric supervision sees min-max normalized labels; regressions use raw "
         "label scales\n";
  out << "\n";
  out << "latent -> label regression, adjusted R^2 (mean +- std over folds; * = F-test p > "
         "0.05 in half or more folds)\n";
  out << pad("dataset", 20) << pad("R2-Act", 22) << pad("R2-Val", 22) << "\n";
  for (const std::string& ds : report.dataset_order) {
    out << pad(ds, 20)
        << pad(format_metric_aggregate(report.aggregate_metric(ds, &ResultRow::act_label)), 22)
        << pad(format_metric_aggregate(report.aggregate_metric(ds, &ResultRow::val_label)), 22)
        << "\n";
  }
  out << "\n";
  out << "pairwise-distance regression, adjusted R^2 of label distances on latent distances\n";
  out << pad("dataset", 20) << pad("R2-Act", 22) << pad("R2-Val", 22) << "\n";
  for (const std::string& ds : report.dataset_order) {
    out << pad(ds, 20)
        << pad(format_metric_aggregate(report.aggregate_metric(ds, &ResultRow::act_dist)), 22)
        << pad(format_metric_aggregate(report.aggregate_metric(ds, &ResultRow::val_dist)), 22)
        << "\n";
  }
  out << "\n";
  out << "balanced accuracy, linear SVC on embeddings\n";
  out << pad("dataset", 20) << pad("3-class", 28) << pad("4-class", 28) << "\n";
  for (const std::string& ds : report.dataset_order) {
    out << pad(ds, 20)
        << pad(format_accuracy_aggregate(report.aggregate_accuracy(ds, &ResultRow::ba3)), 28)
        << pad(format_accuracy_aggregate(report.aggregate_accuracy(ds, &ResultRow::ba4)), 28)
        << "\n";
  }
  return out.str();
}

namespace {

ordered_json report_to_json(const EvalReport& report) {
  ordered_json j;
  j["seed"] = report.seed;
  j["folds"] = report.folds;
  j["datasets"] = report.dataset_order;
  j["rows"] = ordered_json::array();
  for (const ResultRow& row : report.rows) {
    j["rows"].push_back({{"dataset", row.dataset},
                         {"fold", row.fold},
                         {"eval_count", row.eval_count},
                         {"act_label", metric_cell_json(row.act_label)},
                         {"val_label", metric_cell_json(row.val_label)},
                         {"act_dist", metric_cell_json(row.act_dist)},
                         {"val_dist", metric_cell_json(row.val_dist)},
                         {"ba3", accuracy_cell_json(row.ba3)},
                         {"ba4", accuracy_cell_json(row.ba4)}});
  }
  j["aggregates"] = ordered_json::object();
  for (const std::string& ds : report.dataset_order) {
    j["aggregates"][ds] = {
        {"act_label", aggregate_json(report.aggregate_metric(ds, &ResultRow::act_label))},
        {"val_label", aggregate_json(report.aggregate_metric(ds, &ResultRow::val_label))},
        {"act_dist", aggregate_json(report.aggregate_metric(ds, &ResultRow::act_dist))},
        {"val_dist", aggregate_json(report.aggregate_metric(ds, &ResultRow::val_dist))},
        {"ba3", aggregate_json(report.aggregate_accuracy(ds, &ResultRow::ba3))},
        {"ba4", aggregate_json(report.aggregate_accuracy(ds, &ResultRow::ba4))}};
  }
  return j;
}

}  // namespace

EvalReport report_from_json_file(const std::string& path);

void write_report_files(const EvalReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);

  std::ofstream csv(fs::path(out_dir) / "results.csv");
  if (!csv) throw std::runtime_error("write_report_files: cannot write results.csv");
  csv << kCsvHeader << "\n";
  for (const ResultRow& row : report.rows) {
    csv << row.dataset << "," << row.fold << "," << row.eval_count << ","
        << metric_cell_csv(row.act_label) << "," << metric_cell_csv(row.val_label) << ","
        << metric_cell_csv(row.act_dist) << "," << metric_cell_csv(row.val_dist) << ","
        << accuracy_cell_csv(row.ba3) << "," << accuracy_cell_csv(row.ba4) << "\n";
  }
  csv.close();

  std::ofstream js(fs::path(out_dir) / "results.json");
  if (!js) throw std::runtime_error("write_report_files: cannot write results.json");
  js << report_to_json(report).dump(2) << "\n";
  js.close();

  std::ofstream txt(fs::path(out_dir) / "report.txt");
  if (!txt) throw std::runtime_error("write_report_files: cannot write report.txt");
  txt << render_report(report);
}

EvalReport report_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file " + path);
  json j;
  in >> j;
  EvalReport report;
  report.seed = j.at("seed").get<std::uint64_t>();
  report.folds = j.at("folds").get<int>();
  report.dataset_order = j.at("datasets").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    ResultRow row;
    row.dataset = r.at("dataset").get<std::string>();
    row.fold = r.at("fold").get<int>();
    row.eval_count = r.at("eval_count").get<std::size_t>();
    row.act_label = metric_cell_from_json(r.at("act_label"));
    row.val_label = metric_cell_from_json(r.at("val_label"));
    row.act_dist = metric_cell_from_json(r.at("act_dist"));
    row.val_dist = metric_cell_from_json(r.at("val_dist"));
    row.ba3 = accuracy_cell_from_json(r.at("ba3"));
    row.ba4 = accuracy_cell_from_json(r.at("ba4"));
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string render_combined_report(
    const std::vector<std::pair<std::string, std::string>>& labeled_result_files) {
  std::vector<std::pair<std::string, EvalReport>> reports;
  for (const auto& [label, path] : labeled_result_files)
    reports.emplace_back(label, report_from_json_file(path));

  std::vector<std::string> datasets;
  for (const auto& [label, report] : reports)
    for (const std::string& ds : report.dataset_order)
      if (std::find(datasets.begin(), datasets.end(), ds) == datasets.end())
        datasets.push_back(ds);

  std::ostringstream out;
  auto metric_block = [&](const std::string& title, MetricCell ResultRow::* cell) {
    out << title << "\n";
    for (const std::string& ds : datasets) {
      out << "dataset: " << ds << "\n";
      for (const auto& [label, report] : reports) {
        out << "  " << pad(label, 26)
            << format_metric_aggregate(report.aggregate_metric(ds, cell)) << "\n";
      }
    }
    out << "\n";
  };

  out << "combined experiment results\n\n";
  metric_block("latent -> label regression, adjusted R^2-Act", &ResultRow::act_label);
  metric_block("latent -> label regression, adjusted R^2-Val", &ResultRow::val_label);
  metric_block("pairwise-distance regression, adjusted R^2-Act", &ResultRow::act_dist);
  metric_block("pairwise-distance regression, adjusted R^2-Val", &ResultRow::val_dist);

  auto accuracy_block = [&](const std::string& title, AccuracyCell ResultRow::* cell) {
    out << title << "\n";
    for (const std::string& ds : datasets) {
      out << "dataset: " << ds << "\n";
      for (const auto& [label, report] : reports) {
        out << "  " << pad(label, 26)
            << format_accuracy_aggregate(report.aggregate_accuracy(ds, cell)) << "\n";
      }
    }
    out << "\n";
  };
  accuracy_block("balanced accuracy, 3-class", &ResultRow::ba3);
  accuracy_block("balanced accuracy, 4-class", &ResultRow::ba4);
  return out.str();
}

// ---------------------------------------------------------------------------
// entry points

EvalReport run_experiment(const ExperimentConfig& config, std::ostream* log) {
  Context ctx = prepare(config, log);

  std::vector<FoldOutcome> outcomes(ctx.folds);
  std::vector<std::exception_ptr> errors(ctx.folds);
#pragma omp parallel for schedule(dynamic, 1) if (config.parallel_folds)
  for (int fold = 0; fold < ctx.folds; ++fold) {
    try {
      outcomes[fold] = run_fold(ctx, fold);
    } catch (...) {
      errors[fold] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  EvalReport report;
  report.seed = ctx.seed;
  report.folds = ctx.folds;
  report.dataset_order = ctx.dataset_order;
  for (FoldOutcome& outcome : outcomes) {
    if (log && !outcome.log.empty()) *log << outcome.log;
    report.rows.insert(report.rows.end(), outcome.rows.begin(), outcome.rows.end());
  }
  sort_rows(report);

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    ExperimentConfig echo = config;
    echo.seed = ctx.seed;
    echo.folds = ctx.folds;
    echo.manifest_path = fs::absolute(config.manifest_path).string();
    echo.out_dir.clear();
    save_config(echo, (fs::path(config.out_dir) / "run_config.json").string());
    for (const FoldOutcome& outcome : outcomes)
      for (const auto& ckpt : outcome.checkpoints)
        dae::save_checkpoint((fs::path(config.out_dir) / (ckpt.label + ".ckpt")).string(),
                             ckpt.model, ckpt.scaler);
    if (config.export_embeddings) {
      const fs::path emb_dir = fs::path(config.out_dir) / "embeddings";
      fs::create_directories(emb_dir);
      for (const FoldOutcome& outcome : outcomes)
        for (const EmbeddingDump& dump : outcome.embeddings)
          data::export_embeddings(dump.z, dump.classes,
                                  dump.activation.empty() ? nullptr : &dump.activation,
                                  dump.valence.empty() ? nullptr : &dump.valence,
                                  (emb_dir / dump.file_name).string());
    }
    write_report_files(report, config.out_dir);
  }
  return report;
}

RawReport run_raw_classification(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const data::Manifest manifest = data::load_manifest(config.manifest_path);
  const std::uint64_t seed = config.seed.value_or(manifest.seed);
  const int folds = config.folds.value_or(manifest.folds);

  const fs::path manifest_dir = fs::path(config.manifest_path).parent_path();
  RawReport report;
  report.seed = seed;
  report.folds = folds;

  for (const data::ManifestEntry& entry : manifest.datasets) {
    fs::path p(entry.path);
    if (p.is_relative()) p = manifest_dir / p;
    data::LabeledDataset raw = data::load_csv(p.string());
    raw.name = entry.name;
    const prep::OutlierResult kept_rows =
        prep::remove_outliers(raw.features, config.outlier_threshold);
    const data::LabeledDataset kept = subset_dataset(raw, kept_rows.kept_indices);
    report.dataset_order.push_back(entry.name);

    const std::vector<FoldSplit> splits = stratified_folds(
        kept.class_ids, folds, mix_seed(seed, fnv1a(entry.name) ^ 0xC1A5ULL));
    for (int fold = 0; fold < folds; ++fold) {
      const FoldSplit& split = splits[fold];
      const Matrix train_raw_rows = take_rows(kept.features, split.train_indices);
      const prep::Scaler scaler = prep::fit_scaler(train_raw_rows);
      const Matrix x_train = prep::apply_scaler(scaler, train_raw_rows);
      const Matrix x_val =
          prep::apply_scaler(scaler, take_rows(kept.features, split.validation_indices));
      const std::vector<int> train_classes = take(kept.class_ids, split.train_indices);
      const std::vector<int> val_classes = take(kept.class_ids, split.validation_indices);

      SvcCache cache;
      RawClassificationRow row;
      row.dataset = entry.name;
      row.fold = fold;
      row.ba3 = accuracy_for(kThreeClass, x_train, train_classes, x_val, val_classes,
                             config.svc_c, cache);
      row.ba4 = accuracy_for(kFourClass, x_train, train_classes, x_val, val_classes,
                             config.svc_c, cache);
      report.rows.push_back(std::move(row));
      if (log)
        *log << entry.name << " fold " << fold << " raw SVC done\n";
    }
  }
  return report;
}

std::string render_raw_report(const RawReport& report) {
  std::ostringstream out;
  out << "supervised SVC reference on raw features\n";
  out << "seed " << report.seed << ", " << report.folds << "-fold cross-validation per dataset\n";
  out << "\n";
  out << pad("dataset", 20) << pad("3-class", 28) << pad("4-class", 28) << "\n";
  for (const std::string& ds : report.dataset_order) {
    auto collect = [&](AccuracyCell RawClassificationRow::* cell) {
      std::vector<double> values;
      std::string classes;
      for (const RawClassificationRow& row : report.rows) {
        if (row.dataset != ds || !(row.*cell).valid) continue;
        values.push_back((row.*cell).value);
        classes = (row.*cell).classes;
      }
      return format_accuracy_aggregate(aggregate_values(values, report.folds, 0, classes));
    };
    out << pad(ds, 20) << pad(collect(&RawClassificationRow::ba3), 28)
        << pad(collect(&RawClassificationRow::ba4), 28) << "\n";
  }
  return out.str();
}

void write_raw_report_files(const RawReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "svc_raw_results.csv");
  if (!csv) throw std::runtime_error("write_raw_report_files: cannot write csv");
  csv << "dataset,fold,ba3,ba3_classes,ba4,ba4_classes\n";
  for (const RawClassificationRow& row : report.rows)
    csv << row.dataset << "," << row.fold << "," << accuracy_cell_csv(row.ba3) << ","
        << accuracy_cell_csv(row.ba4) << "\n";
  csv.close();
  std::ofstream txt(fs::path(out_dir) / "svc_raw_report.txt");
  txt << render_raw_report(report);
}

EvalReport evaluate_run(const std::string& run_dir, const std::string& manifest_override,
                        std::ostream* log) {
  ExperimentConfig cfg = load_config((fs::path(run_dir) / "run_config.json").string());
  if (!manifest_override.empty()) cfg.manifest_path = manifest_override;
  cfg.out_dir.clear();
  Context ctx = prepare(cfg, log);

  EvalReport report;
  report.seed = ctx.seed;
  report.folds = ctx.folds;
  report.dataset_order = ctx.dataset_order;

  for (int fold = 0; fold < ctx.folds; ++fold) {
    const FoldSplit& split = ctx.splits[fold];
    const Matrix train_raw_rows = take_rows(ctx.train.features, split.train_indices);
    const std::vector<int> train_classes = take(ctx.train.class_ids, split.train_indices);

    auto eval_with = [&](const dae::Checkpoint& ckpt,
                         const std::vector<const PreparedTransfer*>& transfers,
                         bool include_validation) {
      const Matrix x_train = prep::apply_scaler(ckpt.scaler, train_raw_rows);
      Matrix x_val;
      std::vector<int> val_classes;
      std::vector<double> val_act, val_val;
      if (include_validation) {
        x_val = prep::apply_scaler(ckpt.scaler,
                                   take_rows(ctx.train.features, split.validation_indices));
        val_classes = take(ctx.train.class_ids, split.validation_indices);
        if (ctx.train.has_activation())
          val_act = take(ctx.train.activation, split.validation_indices);
        if (ctx.train.has_valence())
          val_val = take(ctx.train.valence, split.validation_indices);
      }
      return evaluate_model(cfg, ckpt.model, fold, x_train, train_classes, ctx.train.name,
                            include_validation ? &x_val : nullptr,
                            include_validation ? &val_classes : nullptr,
                            val_act.empty() ? nullptr : &val_act,
                            val_val.empty() ? nullptr : &val_val, transfers, nullptr);
    };

    if (!mode_is_supervised(cfg.mode)) {
      const dae::Checkpoint ckpt = dae::load_checkpoint(
          (fs::path(run_dir) / ("fold_" + std::to_string(fold) + ".ckpt")).string());
      std::vector<const PreparedTransfer*> transfers;
      for (const PreparedTransfer& t : ctx.transfers) transfers.push_back(&t);
      const std::vector<ResultRow> rows = eval_with(ckpt, transfers, true);
      report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    } else {
      for (const PreparedTransfer& t : ctx.transfers) {
        const dae::Checkpoint ckpt = dae::load_checkpoint(
            (fs::path(run_dir) /
             ("fold_" + std::to_string(fold) + "_" + sanitize(t.name) + ".ckpt"))
                .string());
        const std::vector<ResultRow> rows = eval_with(ckpt, {&t}, false);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
      }
    }
  }
  sort_rows(report);
  return report;
}

void embed_run(const std::string& run_dir, std::optional<int> fold, bool full_training,
               const std::string& out_dir, std::ostream* log) {
  ExperimentConfig cfg = load_config((fs::path(run_dir) / "run_config.json").string());
  cfg.out_dir.clear();
  Context ctx = prepare(cfg, log);
  fs::create_directories(out_dir);

  auto export_transfers = [&](const dae::DaeModel& model, const std::string& suffix) {
    for (const PreparedTransfer& t : ctx.transfers) {
      const Matrix z = dae::encode(model, t.eval_features);
      data::export_embeddings(z, t.eval_classes,
                              t.eval_activation.empty() ? nullptr : &t.eval_activation,
                              t.eval_valence.empty() ? nullptr : &t.eval_valence,
                              (fs::path(out_dir) / (sanitize(t.name) + suffix)).string());
    }
  };

  if (full_training) {
    if (mode_is_supervised(cfg.mode))
      throw std::runtime_error("embed --full is not defined for the supervised reference modes");
    const prep::Scaler scaler = prep::fit_scaler(ctx.train.features);
    const Matrix x_all = prep::apply_scaler(scaler, ctx.train.features);
    TrainSpec spec;
    spec.x_train = &x_all;
    spec.tag = "full";
    if (mode_is_metric(cfg.mode)) spec.row_labels = &ctx.train_metric_labels;
    Rng rng(mix_seed(ctx.seed, 0xF111ULL));
    const dae::DaeModel model = train_model(cfg, spec, rng, log);

    const Matrix z = dae::encode(model, x_all);
    data::export_embeddings(
        z, ctx.train.class_ids,
        ctx.train.has_activation() ? &ctx.train.activation : nullptr,
        ctx.train.has_valence() ? &ctx.train.valence : nullptr,
        (fs::path(out_dir) / (sanitize(ctx.train.name) + "_full.csv")).string());
    export_transfers(model, "_full.csv");
    return;
  }

  const int f = fold.value_or(0);
  if (f < 0 || f >= ctx.folds)
    throw std::runtime_error("embed: fold " + std::to_string(f) + " out of range");
  const FoldSplit& split = ctx.splits[f];

  if (!mode_is_supervised(cfg.mode)) {
    const dae::Checkpoint ckpt = dae::load_checkpoint(
        (fs::path(run_dir) / ("fold_" + std::to_string(f) + ".ckpt")).string());
    const Matrix x_val =
        prep::apply_scaler(ckpt.scaler, take_rows(ctx.train.features, split.validation_indices));
    const Matrix z = dae::encode(ckpt.model, x_val);
    std::vector<double> val_act, val_val;
    if (ctx.train.has_activation()) val_act = take(ctx.train.activation, split.validation_indices);
    if (ctx.train.has_valence()) val_val = take(ctx.train.valence, split.validation_indices);
    data::export_embeddings(
        z, take(ctx.train.class_ids, split.validation_indices),
        val_act.empty() ? nullptr : &val_act, val_val.empty() ? nullptr : &val_val,
        (fs::path(out_dir) / (sanitize(ctx.train.name) + "_fold" + std::to_string(f) + ".csv"))
            .string());
    export_transfers(ckpt.model, "_fold" + std::to_string(f) + ".csv");
  } else {
    for (const PreparedTransfer& t : ctx.transfers) {
      const dae::Checkpoint ckpt = dae::load_checkpoint(
          (fs::path(run_dir) / ("fold_" + std::to_string(f) + "_" + sanitize(t.name) + ".ckpt"))
              .string());
      const Matrix z = dae::encode(ckpt.model, t.eval_features);
      data::export_embeddings(
          z, t.eval_classes, t.eval_activation.empty() ? nullptr : &t.eval_activation,
          t.eval_valence.empty() ? nullptr : &t.eval_valence,
          (fs::path(out_dir) / (sanitize(t.name) + "_fold" + std::to_string(f) + ".csv"))
              .string());
    }
  }
}

}  // namespace sermet::harness
