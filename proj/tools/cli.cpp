#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "essc/edf.hpp"
#include "essc/error.hpp"
#include "essc/io.hpp"
#include "essc/model_store.hpp"
#include "essc/pipeline.hpp"
#include "essc/rng.hpp"

namespace essc::cli {

namespace {

namespace fs = std::filesystem;
using pipeline::TrainConfig;

struct Globals {
  std::uint64_t seed = 0;
  int verbosity = 0;
  std::string out_dir = ".";
  bool force = false;
  bool record_timing = false;
};

// Training flags shared by train and kfold. Optional overrides stay empty
// unless given so --mode can supply its defaults.
struct TrainFlags {
  std::string mode = "proposed";
  double alpha = 0.1;
  std::string activation;
  std::string optimizer;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double sgd_lr = 0.01;
  double ortho_lambda = 1e-4;
  bool no_se = false;
  bool no_oversample = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--mode", f.mode, "proposed (LeakyReLU+Adam+leaky gate) or baseline (Sigmoid+SGD+sigmoid gate)")
      ->check(CLI::IsMember({"proposed", "baseline"}));
  cmd->add_option("--alpha", f.alpha, "LeakyReLU negative slope")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--activation", f.activation, "override the mode's activation")
      ->check(CLI::IsMember({"sigmoid", "relu", "leaky_relu"}));
  cmd->add_option("--optimizer", f.optimizer, "override the mode's optimizer")
      ->check(CLI::IsMember({"adam", "sgd", "none"}));
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "minibatch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", f.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--beta1", f.beta1, "Adam first-moment decay")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--beta2", f.beta2, "Adam second-moment decay")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--eps", f.eps, "Adam denominator guard")->check(CLI::PositiveNumber);
  cmd->add_option("--sgd-lr", f.sgd_lr, "gradient descent step for sgd/none")->check(CLI::PositiveNumber);
  cmd->add_option("--ortho-lambda", f.ortho_lambda, "orthogonal regularization weight")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--no-se", f.no_se, "disable the squeeze-and-excitation blocks");
  cmd->add_flag("--no-oversample", f.no_oversample, "do not balance classes in the training set");
}

TrainConfig make_train_config(const TrainFlags& f, std::uint64_t seed) {
  TrainConfig c = f.mode == "baseline" ? TrainConfig::baseline() : TrainConfig::proposed(f.alpha);
  if (f.activation == "sigmoid") c.activation = nn::Activation::sigmoid();
  if (f.activation == "relu") c.activation = nn::Activation::relu();
  if (f.activation == "leaky_relu") c.activation = nn::Activation::leaky_relu(f.alpha);
  if (!f.optimizer.empty()) c.optimizer = *pipeline::parse_optimizer(f.optimizer);
  c.epochs = f.epochs;
  c.batch_size = f.batch_size;
  c.adam = {f.lr, f.beta1, f.beta2, f.eps};
  c.sgd_lr = f.sgd_lr;
  c.ortho_lambda = f.ortho_lambda;
  c.se_enabled = !f.no_se;
  c.oversample = !f.no_oversample;
  c.seed = seed;
  c.validate();
  return c;
}

class Outputs {
 public:
  Outputs(const Globals& g) : g_(g) {}

  // Resolves an output path and refuses to clobber unless --force.
  std::string claim(const std::string& path) {
    fs::path p(path);
    if (p.is_relative()) p = fs::path(g_.out_dir) / p;
    const std::string s = p.lexically_normal().string();
    if (!g_.force && fs::exists(p)) fail(ErrorKind::IoError, s + " already exists (pass --force to overwrite)");
    return s;
  }

  void prepare() const {
    std::error_code ec;
    fs::create_directories(g_.out_dir, ec);
    if (ec) fail(ErrorKind::IoError, "cannot create output directory " + g_.out_dir + ": " + ec.message());
  }

 private:
  const Globals& g_;
};

std::string with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

std::string alpha_tag(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", a);
  return buf;
}

std::vector<SleepStage> parse_stage_list(const std::vector<std::string>& names) {
  std::vector<SleepStage> out;
  for (const auto& n : names) {
    const auto s = parse_stage(n);
    if (!s) fail(ErrorKind::InvalidSpec, "unknown stage '" + n + "' in --stages");
    out.push_back(*s);
  }
  if (out.empty()) fail(ErrorKind::InvalidSpec, "--stages is empty");
  return out;
}

void log_counts(std::ostream& out, const pipeline::Dataset& ds) {
  if (!ds.labeled()) {
    out << "epochs: " << ds.size() << " (unlabeled)\n";
    return;
  }
  const auto counts = ds.class_counts();
  out << "epochs: " << ds.size() << " |";
  for (auto s : kAllStages) out << ' ' << stage_name(s) << '=' << counts[stage_index(s)];
  out << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sleep stage classification from single-channel EEG", "essc"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a key = value file (command line wins)");
  app.allow_config_extras(false);

  Globals g;
  app.add_option("--seed", g.seed, "seed for every random choice");
  app.add_flag("-v,--verbose", g.verbosity, "more progress output (repeatable)");
  app.add_option("--out-dir", g.out_dir, "directory relative output paths are placed in");
  app.add_flag("--force", g.force, "overwrite existing output files");
  app.add_flag("--record-timing", g.record_timing, "include wall-clock timings in reports");

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic EEG recording and its hypnogram");
  std::vector<std::string> stages{"W", "S1", "S2", "SWS", "REM"};
  std::size_t per_stage = 8;
  double synth_fs = 128.0;
  int synth_channels = 1;
  double noise = 0.5;
  std::string edf_out = "synth.edf", hyp_out = "synth.hyp";
  synth->add_option("--stages", stages, "stage order, each repeated --epochs-per-stage times")->delimiter(',');
  synth->add_option("--epochs-per-stage", per_stage, "30 s epochs per listed stage")->check(CLI::PositiveNumber);
  synth->add_option("--fs", synth_fs, "sample rate in Hz (integer, >= 64)");
  synth->add_option("--channels", synth_channels, "EEG channel count")->check(CLI::PositiveNumber);
  synth->add_option("--noise", noise, "white-noise level (sigma in units of 10 uV)")->check(CLI::NonNegativeNumber);
  synth->add_option("--out-edf", edf_out, "EDF output");
  synth->add_option("--out-hypnogram", hyp_out, "hypnogram output");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "filter, epoch and transform a recording into a dataset cache");
  std::string edf_in, hyp_in, cache_out = "dataset.essc", ae_in, ae_out;
  std::size_t channel = 0;
  pipeline::FeatureConfig feat;
  bool no_ae = false;
  prep->add_option("--edf", edf_in, "input EDF recording")->required()->check(CLI::ExistingFile);
  prep->add_option("--hypnogram", hyp_in, "stage labels, one per line (omit for an unlabeled cache)")
      ->check(CLI::ExistingFile);
  prep->add_option("--channel", channel, "EEG channel index");
  prep->add_option("--out", cache_out, "dataset cache output");
  prep->add_option("--target-fs", feat.preprocess.target_fs, "resampling rate in Hz")->check(CLI::PositiveNumber);
  prep->add_option("--mains", feat.preprocess.mains_hz, "notch frequency in Hz (0 disables)")
      ->check(CLI::NonNegativeNumber);
  prep->add_option("--band-lo", feat.preprocess.band_lo, "bandpass lower edge in Hz")->check(CLI::PositiveNumber);
  prep->add_option("--band-hi", feat.preprocess.band_hi, "bandpass upper edge in Hz")->check(CLI::PositiveNumber);
  prep->add_option("--band-order", feat.preprocess.band_order, "Butterworth bandpass order (even)");
  prep->add_option("--time-bins", feat.tfi.time_bins, "image time bins")->check(CLI::PositiveNumber);
  prep->add_option("--freq-bins", feat.tfi.freq_bins, "image frequency bins")->check(CLI::PositiveNumber);
  prep->add_option("--max-imfs", feat.tfi.emd.max_imfs, "EMD mode limit")->check(CLI::PositiveNumber);
  prep->add_flag("--no-autoencoder", no_ae, "store full-resolution images");
  prep->add_option("--latent-dim", feat.latent_dim, "autoencoder code size (0 = time-bins*freq-bins/8)");
  prep->add_option("--ae-epochs", feat.autoencoder_epochs, "autoencoder training epochs");
  prep->add_option("--ae-in", ae_in, "apply this trained autoencoder instead of training one")
      ->check(CLI::ExistingFile);
  prep->add_option("--ae-out", ae_out, "autoencoder output (default: cache path with .ae)");
  prep->add_option("--jobs", feat.jobs, "parallel EMD workers")->check(CLI::PositiveNumber);

  // train
  auto* trn = app.add_subcommand("train", "train a network on a labeled cache");
  TrainFlags tf;
  std::string cache_in, model_out = "model.essm", history_out = "history.csv";
  bool sweep = false, plot = false;
  trn->add_option("--cache", cache_in, "labeled dataset cache")->required()->check(CLI::ExistingFile);
  add_train_flags(trn, tf);
  trn->add_option("--out", model_out, "model output");
  trn->add_option("--history", history_out, "per-epoch loss/accuracy CSV");
  trn->add_flag("--alpha-sweep", sweep, "train once per alpha in {0.1, 0.2, 0.3}");
  trn->add_flag("--emit-plot-data", plot, "also write gnuplot-ready TSV files");

  // eval
  auto* ev = app.add_subcommand("eval", "score a model on a labeled cache");
  std::string model_in, json_out = "metrics.json", csv_out = "metrics.csv";
  ev->add_option("--model", model_in, "model file")->required()->check(CLI::ExistingFile);
  ev->add_option("--cache", cache_in, "labeled dataset cache")->required()->check(CLI::ExistingFile);
  ev->add_option("--out-json", json_out, "metrics JSON output");
  ev->add_option("--out-csv", csv_out, "metrics CSV output");
  ev->add_flag("--emit-plot-data", plot, "also write per-stage accuracy TSV");

  // kfold
  auto* kf = app.add_subcommand("kfold", "cross-validate or hold-out evaluate on a labeled cache");
  std::string split = "kfold", kjson = "kfold.json", kcsv = "kfold.csv";
  std::size_t k = 20, jobs = 1;
  double test_fraction = 0.15;
  kf->add_option("--cache", cache_in, "labeled dataset cache")->required()->check(CLI::ExistingFile);
  kf->add_option("--split", split, "kfold or holdout")->check(CLI::IsMember({"kfold", "holdout"}));
  kf->add_option("--k", k, "number of folds");
  kf->add_option("--test-fraction", test_fraction, "hold-out test share")->check(CLI::Range(0.0, 1.0));
  kf->add_option("--jobs", jobs, "folds trained in parallel")->check(CLI::PositiveNumber);
  add_train_flags(kf, tf);
  kf->add_option("--out-json", kjson, "report JSON output");
  kf->add_option("--out-csv", kcsv, "report CSV output (one row per fold, then mean and std)");
  kf->add_flag("--emit-plot-data", plot, "also write history and per-stage TSV files");

  // classify
  auto* cls = app.add_subcommand("classify", "predict stages for every epoch of a cache");
  std::string pred_out = "predictions.csv";
  cls->add_option("--model", model_in, "model file")->required()->check(CLI::ExistingFile);
  cls->add_option("--cache", cache_in, "dataset cache (labels ignored)")->required()->check(CLI::ExistingFile);
  cls->add_option("--out", pred_out, "per-epoch predictions CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    // Subcommand help is raised from the subcommand itself.
    if (e.get_exit_code() == 0) {
      std::ostringstream o, eo;
      app.exit(e, o, eo);
      out << o.str() << eo.str();
      return 0;
    }
    err << "error[" << to_string(ErrorKind::InvalidArgument) << "]: " << e.what() << '\n';
    return 2;
  }

  try {
    Outputs outs(g);
    std::ostringstream quiet;
    auto log = [&](int level) -> std::ostream& { return g.verbosity >= level ? out : quiet; };

    if (*synth) {
      edf::SynthSpec spec;
      spec.channels = synth_channels;
      spec.fs = synth_fs;
      spec.noise_level = noise;
      spec.seed = g.seed;
      for (auto s : parse_stage_list(stages)) spec.stage_sequence.insert(spec.stage_sequence.end(), per_stage, s);
      if (synth_fs < 64.0) fail(ErrorKind::InvalidSpec, "--fs must be at least 64 Hz");
      const auto edf_path = outs.claim(edf_out);
      const auto hyp_path = outs.claim(hyp_out);
      const auto [rec, hyp] = edf::generate_synthetic_recording(spec);
      outs.prepare();
      io::write_file(edf_path, edf::write_edf(rec));
      io::write_text(hyp_path, edf::format_hypnogram(hyp));
      out << "wrote " << edf_path << " (" << hyp.stages.size() << " epochs, " << rec.channels.size()
          << " channel(s) at " << synth_fs << " Hz) and " << hyp_path << '\n';
      return 0;
    }

    if (*prep) {
      feat.use_autoencoder = !no_ae && ae_in.empty();
      if (feat.preprocess.band_order <= 0 || feat.preprocess.band_order % 2) {
        fail(ErrorKind::InvalidArgument, "--band-order must be a positive even number");
      }
      const auto cache_path = outs.claim(cache_out);
      std::string ae_path;
      if (feat.use_autoencoder) ae_path = outs.claim(ae_out.empty() ? fs::path(cache_out).replace_extension(".ae").string() : ae_out);

      edf::Recording rec;
      try {
        rec = edf::parse_edf(io::read_file(edf_in));
      } catch (const Error& e) {
        fail(e.kind(), edf_in + ": " + e.what());
      }
      std::optional<edf::Hypnogram> hyp;
      if (!hyp_in.empty()) {
        try {
          hyp = edf::load_hypnogram(io::read_text(hyp_in));
        } catch (const Error& e) {
          fail(e.kind(), hyp_in + ": " + e.what());
        }
      }
      std::optional<hht::Autoencoder> reuse;
      if (!ae_in.empty() && !no_ae) reuse = model_store::load_autoencoder_file(ae_in);

      auto built = pipeline::build_features(rec, hyp ? &*hyp : nullptr, channel, feat, g.seed,
                                            reuse ? &*reuse : nullptr);
      built.dataset.provenance = fs::path(edf_in).filename().string() + " channel " + std::to_string(channel);
      outs.prepare();
      pipeline::save_dataset(cache_path, built.dataset);
      if (!ae_path.empty()) model_store::save_autoencoder_file(ae_path, *built.autoencoder);
      log_counts(out, built.dataset);
      if (built.epochs_dropped) out << "dropped " << built.epochs_dropped << " hypnogram epochs past end of signal\n";
      out << "wrote " << cache_path << " (" << built.dataset.height << "x" << built.dataset.width
          << (built.dataset.reduced ? " reduced" : " full") << " images)";
      if (!ae_path.empty()) out << " and " << ae_path;
      out << '\n';
      return 0;
    }

    if (*trn) {
      const auto base = make_train_config(tf, g.seed);
      std::vector<double> alphas;
      if (sweep) alphas = {0.1, 0.2, 0.3};
      struct Job {
        TrainConfig cfg;
        std::string model, history, tsv, label;
      };
      std::vector<Job> jobs_list;
      if (alphas.empty()) {
        jobs_list.push_back({base, outs.claim(model_out), outs.claim(history_out),
                             plot ? outs.claim(fs::path(history_out).replace_extension(".tsv").string()) : "",
                             ""});
      } else {
        for (double a : alphas) {
          TrainConfig c = base;
          c.activation = nn::Activation::leaky_relu(a);
          const std::string tag = "_alpha" + alpha_tag(a);
          std::string tsv;
          if (plot) tsv = outs.claim(fs::path(with_suffix(history_out, tag)).replace_extension(".tsv").string());
          jobs_list.push_back({c, outs.claim(with_suffix(model_out, tag)), outs.claim(with_suffix(history_out, tag)),
                               tsv, alpha_tag(a)});
        }
      }
      std::string sweep_path;
      if (sweep) sweep_path = outs.claim("alpha_sweep.csv");

      const auto ds = pipeline::load_dataset(cache_in);
      log_counts(log(1), ds);
      std::vector<std::size_t> idx;
      if (base.oversample && ds.labeled()) {
        std::vector<std::size_t> all(ds.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        idx = pipeline::oversampled_training_indices(ds, all, derive_seed(g.seed, 7));
      }
      outs.prepare();
      std::string sweep_csv = "alpha,final_loss,train_accuracy,overall_accuracy,macro_f1,cohen_kappa\n";
      for (const auto& job : jobs_list) {
        auto result = pipeline::train(ds, job.cfg, idx);
        model_store::save_file(job.model, result.network, result.adam ? &*result.adam : nullptr);
        io::write_text(job.history, pipeline::history_to_csv(result.history));
        if (!job.tsv.empty()) io::write_text(job.tsv, pipeline::history_to_tsv(result.history));
        std::string msg = "wrote " + job.model;
        if (!result.history.loss.empty()) {
          char buf[96];
          std::snprintf(buf, sizeof buf, " (final loss %.4f, train accuracy %.1f%%)", result.history.loss.back(),
                        result.history.accuracy.back());
          msg += buf;
        }
        out << msg << '\n';
        if (g.record_timing) out << "train_time_s " << result.train_time_s << '\n';
        if (sweep) {
          const auto m = pipeline::evaluate(result.network, ds);
          char buf[256];
          std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g,%.10g\n", job.label.c_str(),
                        result.history.loss.empty() ? 0.0 : result.history.loss.back(),
                        result.history.accuracy.empty() ? 0.0 : result.history.accuracy.back(), m.overall_accuracy,
                        m.macro_f1, m.cohen_kappa);
          sweep_csv += buf;
        }
      }
      if (sweep) {
        io::write_text(sweep_path, sweep_csv);
        out << "wrote " << sweep_path << '\n';
      }
      return 0;
    }

    if (*ev) {
      const auto json_path = outs.claim(json_out);
      const auto csv_path = outs.claim(csv_out);
      const auto tsv_path = plot ? outs.claim(fs::path(csv_out).replace_extension(".tsv").string()) : "";
      const auto model = model_store::load_file(model_in);
      const auto ds = pipeline::load_dataset(cache_in);
      auto m = pipeline::evaluate(model.network, ds);
      pipeline::ReportOptions ro{g.record_timing};
      outs.prepare();
      io::write_text(json_path, pipeline::metrics_to_json(m, ro));
      io::write_text(csv_path, pipeline::metrics_to_csv(m, ro));
      if (plot) io::write_text(tsv_path, pipeline::per_stage_to_tsv(m));
      char buf[128];
      std::snprintf(buf, sizeof buf, "accuracy %.2f%%  macro F1 %.4f  kappa %.4f\n", m.overall_accuracy, m.macro_f1,
                    m.cohen_kappa);
      out << buf;
      return 0;
    }

    if (*kf) {
      pipeline::ExperimentConfig ec;
      ec.mode = split == "holdout" ? pipeline::SplitMode::Holdout : pipeline::SplitMode::KFold;
      ec.k = k;
      ec.test_fraction = test_fraction;
      ec.jobs = jobs;
      ec.train = make_train_config(tf, g.seed);
      const auto json_path = outs.claim(kjson);
      const auto csv_path = outs.claim(kcsv);
      std::string hist_tsv, stage_tsv;
      if (plot) {
        hist_tsv = outs.claim(with_suffix(fs::path(kcsv).replace_extension(".tsv").string(), "_history"));
        stage_tsv = outs.claim(with_suffix(fs::path(kcsv).replace_extension(".tsv").string(), "_stages"));
      }
      const auto ds = pipeline::load_dataset(cache_in);
      if (ec.mode == pipeline::SplitMode::KFold && ds.size() < ec.k) {
        fail(ErrorKind::TooFewItems, "cache holds " + std::to_string(ds.size()) + " epochs but --k is " +
                                         std::to_string(ec.k));
      }
      log_counts(log(1), ds);
      const auto report = pipeline::run_experiment(ds, ec);
      pipeline::ReportOptions ro{g.record_timing};
      outs.prepare();
      io::write_text(json_path, pipeline::experiment_to_json(report, ro));
      io::write_text(csv_path, pipeline::experiment_to_csv(report, ro));
      if (plot) {
        std::string h = "# fold\tepoch\tloss\taccuracy\n";
        for (const auto& f : report.folds) {
          for (std::size_t e = 0; e < f.history.loss.size(); ++e) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.10g\t%.10g\n", f.fold, e + 1, f.history.loss[e],
                          f.history.accuracy[e]);
            h += buf;
          }
          h += "\n\n";
        }
        io::write_text(hist_tsv, h);
        std::string s = "# stage\tmean_accuracy\tstd_dev\n";
        for (auto st : kAllStages) {
          const auto& sum = report.aggregate.per_stage_accuracy[stage_index(st)];
          char buf[96];
          std::snprintf(buf, sizeof buf, "%s\t%.10g\t%.10g\n", std::string(stage_name(st)).c_str(), sum.mean,
                        sum.std_dev);
          s += buf;
        }
        io::write_text(stage_tsv, s);
      }
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s over %zu fold(s): accuracy %.2f%% (std %.2f)  kappa %.4f\n",
                    report.mode.c_str(), report.folds.size(), report.aggregate.overall_accuracy.mean,
                    report.aggregate.overall_accuracy.std_dev, report.aggregate.cohen_kappa.mean);
      out << buf;
      if (g.record_timing) out << "total_time_s " << report.total_time_s << '\n';
      return 0;
    }

    if (*cls) {
      const auto pred_path = outs.claim(pred_out);
      const auto model = model_store::load_file(model_in);
      const auto ds = pipeline::load_dataset(cache_in);
      const auto preds = pipeline::predict(model.network, ds);
      outs.prepare();
      io::write_text(pred_path, pipeline::predictions_to_csv(preds));
      out << "wrote " << pred_path << " (" << preds.size() << " epochs)\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error[" << to_string(ErrorKind::IoError) << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace essc::cli
