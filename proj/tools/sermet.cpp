#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sermet/data.hpp"
#include "sermet/gradsuite.hpp"
#include "sermet/harness.hpp"

namespace {

struct SynthArgs {
  std::size_t n = 512;
  std::uint64_t seed = 1;
  std::string out;
  sermet::data::SyntheticConfig cfg;
};

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool export_embeddings = false;
};

struct EvalArgs {
  std::string run;
  std::string config;
  std::string manifest;
  std::string out;
  bool raw = false;
  bool quiet = false;
};

struct EmbedArgs {
  std::string run;
  std::string out;
  std::optional<int> fold;
  bool full = false;
  bool quiet = false;
};

struct GradcheckArgs {
  int seeds = 100;
  double tolerance = 1e-5;
};

struct ReportArgs {
  std::vector<std::string> add;
  std::string out;
};

int do_synth(const SynthArgs& a) {
  const sermet::data::LabeledDataset ds = sermet::data::generate_synthetic(a.n, a.seed, a.cfg);
  sermet::data::save_csv(ds, a.out);
  std::cout << "wrote " << ds.size() << " rows to " << a.out << "\n";
  return 0;
}

int do_train(const TrainArgs& a) {
  sermet::harness::ExperimentConfig cfg = sermet::harness::load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.export_embeddings) cfg.export_embeddings = true;
  cfg.out_dir = a.out;
  std::ostream* log = a.quiet ? nullptr : &std::cout;
  const sermet::harness::EvalReport report = sermet::harness::run_experiment(cfg, log);
  std::cout << sermet::harness::render_report(report);
  if (!a.out.empty()) std::cout << "report files written to " << a.out << "\n";
  return 0;
}

int do_eval(const EvalArgs& a) {
  std::ostream* log = a.quiet ? nullptr : &std::cout;
  if (a.raw) {
    if (a.config.empty())
      throw CLI::ValidationError("eval", "--raw requires --config");
    sermet::harness::ExperimentConfig cfg = sermet::harness::load_config(a.config);
    const sermet::harness::RawReport report = sermet::harness::run_raw_classification(cfg, log);
    std::cout << sermet::harness::render_raw_report(report);
    if (!a.out.empty()) sermet::harness::write_raw_report_files(report, a.out);
    return 0;
  }
  if (a.run.empty()) throw CLI::ValidationError("eval", "--run or --raw required");
  const sermet::harness::EvalReport report =
      sermet::harness::evaluate_run(a.run, a.manifest, log);
  std::cout << sermet::harness::render_report(report);
  if (!a.out.empty()) sermet::harness::write_report_files(report, a.out);
  return 0;
}

int do_embed(const EmbedArgs& a) {
  if (a.full && a.fold)
    throw CLI::ValidationError("embed", "--fold and --full are mutually exclusive");
  std::ostream* log = a.quiet ? nullptr : &std::cout;
  sermet::harness::embed_run(a.run, a.fold, a.full, a.out, log);
  std::cout << "embeddings written to " << a.out << "\n";
  return 0;
}

int do_gradcheck(const GradcheckArgs& a) {
  const double rec = sermet::gradsuite::reconstruction_suite(a.seeds);
  const double met = sermet::gradsuite::metric_suite(a.seeds);
  const double joint = sermet::gradsuite::joint_suite(a.seeds);
  std::printf("reconstruction loss: max relative error %.3e (%d seeds)\n", rec, a.seeds);
  std::printf("metric loss:         max relative error %.3e (%d seeds)\n", met, a.seeds);
  std::printf("joint objective:     max relative error %.3e (%d seeds)\n", joint, a.seeds);
  const double worst = std::max({rec, met, joint});
  if (worst > a.tolerance) {
    std::fprintf(stderr, "gradcheck FAILED: %.3e exceeds tolerance %.3e\n", worst, a.tolerance);
    return 1;
  }
  std::printf("gradcheck passed (tolerance %.3e)\n", a.tolerance);
  return 0;
}

int do_report(const ReportArgs& a) {
  std::vector<std::pair<std::string, std::string>> labeled;
  for (const std::string& spec : a.add) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("report", "--add expects label=run_dir, got '" + spec + "'");
    std::string label = spec.substr(0, eq);
    std::string path = spec.substr(eq + 1);
    if (path.size() < 5 || path.substr(path.size() - 5) != ".json")
      path += "/results.json";
    labeled.emplace_back(label, path);
  }
  const std::string rendered = sermet::harness::render_combined_report(labeled);
  if (a.out.empty()) {
    std::cout << rendered;
  } else {
    std::FILE* f = std::fopen(a.out.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open " + a.out);
    std::fputs(rendered.c_str(), f);
    std::fclose(f);
    std::cout << "combined report written to " << a.out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised denoising autoencoder embeddings for speech-emotion features"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic feature corpus");
  synth->add_option("--n", synth_args.n, "number of samples")->default_val(512);
  synth->add_option("--seed", synth_args.seed, "sample seed")->default_val(1);
  synth->add_option("--out", synth_args.out, "output CSV path")->required();
  synth->add_option("--label-noise", synth_args.cfg.label_noise, "label noise sigma");
  synth->add_option("--feature-noise", synth_args.cfg.feature_noise, "feature noise sigma");
  synth->add_option("--nuisance-dims", synth_args.cfg.nuisance_dims, "hidden nuisance factors");
  synth->add_option("--nuisance-scale", synth_args.cfg.nuisance_scale, "nuisance factor scale");
  synth->add_option("--shift", synth_args.cfg.latent_shift, "latent distribution shift");
  synth->add_option("--map-seed", synth_args.cfg.map_seed, "seed of the fixed lift map");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "run the cross-validated experiment");
  train->add_option("--config", train_args.config, "experiment config JSON")->required();
  train->add_option("--out", train_args.out, "run directory for reports and checkpoints");
  std::uint64_t seed_override = 0;
  CLI::Option* seed_opt = train->add_option("--seed", seed_override, "override the seed");
  train->add_flag("--quiet", train_args.quiet, "suppress progress logging");
  train->add_flag("--export-embeddings", train_args.export_embeddings,
                  "write per-fold embedding CSVs");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "re-evaluate a run, or run the raw-SVC reference");
  eval->add_option("--run", eval_args.run, "run directory produced by train");
  eval->add_option("--config", eval_args.config, "experiment config (for --raw)");
  eval->add_option("--manifest", eval_args.manifest, "override the manifest");
  eval->add_option("--out", eval_args.out, "directory for report files");
  eval->add_flag("--raw", eval_args.raw, "supervised SVC on raw features, per dataset");
  eval->add_flag("--quiet", eval_args.quiet, "suppress progress logging");

  EmbedArgs embed_args;
  CLI::App* embed = app.add_subcommand("embed", "export embedding CSVs from a run");
  embed->add_option("--run", embed_args.run, "run directory produced by train")->required();
  embed->add_option("--out", embed_args.out, "output directory")->required();
  int fold_value = 0;
  CLI::Option* fold_opt = embed->add_option("--fold", fold_value, "use this fold's checkpoint");
  embed->add_flag("--full", embed_args.full, "train on the full training set, then embed");
  embed->add_flag("--quiet", embed_args.quiet, "suppress progress logging");

  GradcheckArgs grad_args;
  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  grad->add_option("--seeds", grad_args.seeds, "random cases per loss")->default_val(100);
  grad->add_option("--tolerance", grad_args.tolerance, "max relative error")->default_val(1e-5);

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "merge runs into side-by-side tables");
  report->add_option("--add", report_args.add, "label=run_dir (repeatable)")->required();
  report->add_option("--out", report_args.out, "output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) return do_synth(synth_args);
    if (*train) {
      if (seed_opt->count() > 0) train_args.seed = seed_override;
      return do_train(train_args);
    }
    if (*eval) return do_eval(eval_args);
    if (*embed) {
      if (fold_opt->count() > 0) embed_args.fold = fold_value;
      return do_embed(embed_args);
    }
    if (*grad) return do_gradcheck(grad_args);
    if (*report) return do_report(report_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
