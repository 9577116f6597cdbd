#include "essc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "essc/error.hpp"
#include "essc/rng.hpp"

namespace essc::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first error.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

std::vector<std::size_t> all_or(std::span<const std::size_t> indices, std::size_t n) {
  if (!indices.empty()) return {indices.begin(), indices.end()};
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

std::size_t argmax(std::span<const double> p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

// ---------------------------------------------------------- feature build

void standardize(std::vector<float>& image) {
  if (image.empty()) return;
  double mu = 0.0;
  for (float v : image) mu += v;
  mu /= static_cast<double>(image.size());
  double var = 0.0;
  for (float v : image) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / static_cast<double>(image.size()));
  for (auto& v : image) v = sd > 0.0 ? static_cast<float>((v - mu) / sd) : 0.0f;
}

std::vector<hht::TimeFrequencyImage> epochs_to_tfis(const dsp::EpochSet& epochs, double fs,
                                                    const hht::TfiConfig& cfg, std::size_t jobs) {
  std::vector<hht::TimeFrequencyImage> out(epochs.epochs.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) { out[i] = hht::epoch_to_tfi(epochs.epochs[i], fs, cfg); });
  return out;
}

Dataset images_to_dataset(std::span<const hht::TimeFrequencyImage> tfis, std::span<const SleepStage> labels,
                          const hht::Autoencoder* ae) {
  if (tfis.empty()) fail(ErrorKind::EmptyDataset, "no epochs to convert");
  if (!labels.empty() && labels.size() != tfis.size()) {
    fail(ErrorKind::DimensionMismatch, "labels do not align with images");
  }
  Dataset ds;
  ds.channels = 1;
  if (ae) {
    ds.height = ae->latent_height();
    ds.width = ae->latent_width();
    ds.reduced = true;
  } else {
    ds.height = tfis.front().time_bins();
    ds.width = tfis.front().freq_bins();
  }
  ds.images.reserve(tfis.size());
  for (const auto& img : tfis) {
    if (ae) {
      const auto z = hht::encode(*ae, img);
      ds.images.emplace_back(z.begin(), z.end());
    } else {
      if (img.time_bins() != ds.height || img.freq_bins() != ds.width) {
        fail(ErrorKind::DimensionMismatch, "time-frequency images differ in shape");
      }
      ds.images.emplace_back(img.cells().begin(), img.cells().end());
    }
  }
  for (auto& img : ds.images) standardize(img);
  ds.labels.assign(labels.begin(), labels.end());
  return ds;
}

FeatureResult build_features(const edf::Recording& rec, const edf::Hypnogram* hyp, std::size_t channel,
                             const FeatureConfig& cfg, std::uint64_t seed, const hht::Autoencoder* reuse) {
  if (channel >= rec.channels.size()) {
    fail(ErrorKind::IndexOutOfRange, "channel " + std::to_string(channel) + " requested but the recording has " +
                                         std::to_string(rec.channels.size()));
  }
  dsp::TimeSeries raw{rec.channels[channel], rec.sample_rate(channel)};
  const auto clean = dsp::preprocess(raw, cfg.preprocess);
  const auto epochs = dsp::segment_epochs(clean, hyp, cfg.preprocess.epoch_s);
  const auto tfis = epochs_to_tfis(epochs, clean.fs, cfg.tfi, cfg.jobs);

  FeatureResult result;
  if (hyp && hyp->stages.size() > epochs.epochs.size()) result.epochs_dropped = hyp->stages.size() - epochs.epochs.size();
  if (reuse) {
    result.autoencoder = *reuse;
  } else if (cfg.use_autoencoder) {
    const std::size_t latent =
        cfg.latent_dim ? cfg.latent_dim : hht::default_latent_dim(cfg.tfi.time_bins, cfg.tfi.freq_bins);
    result.autoencoder =
        hht::train_autoencoder(tfis, latent, cfg.autoencoder_epochs, derive_seed(seed, 11), cfg.autoencoder);
  }
  std::span<const SleepStage> labels;
  if (epochs.labels) labels = *epochs.labels;
  result.dataset = images_to_dataset(tfis, labels, result.autoencoder ? &*result.autoencoder : nullptr);
  result.dataset.seed = seed;
  return result;
}

// --------------------------------------------------------------- training

std::string optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::None: return "none";
  }
  return "?";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "none") return OptimizerKind::None;
  return std::nullopt;
}

TrainConfig TrainConfig::proposed(double alpha) {
  TrainConfig c;
  c.activation = nn::Activation::leaky_relu(alpha);
  c.optimizer = OptimizerKind::Adam;
  c.gate = nn::GateType::ClampedLeaky;
  return c;
}

TrainConfig TrainConfig::baseline() {
  TrainConfig c;
  c.activation = nn::Activation::sigmoid();
  c.optimizer = OptimizerKind::Sgd;
  c.gate = nn::GateType::Sigmoid;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size == 0) fail(ErrorKind::InvalidArgument, "batch size must be >= 1");
  if (!(sgd_lr > 0.0) || !std::isfinite(sgd_lr)) fail(ErrorKind::InvalidArgument, "sgd learning rate must be > 0");
  if (!(ortho_lambda >= 0.0) || !std::isfinite(ortho_lambda)) {
    fail(ErrorKind::InvalidArgument, "orthogonal regularization weight must be >= 0");
  }
  if (activation.type == nn::ActivationType::LeakyReLU && !(activation.alpha > 0.0 && activation.alpha < 1.0)) {
    fail(ErrorKind::InvalidArgument, "leaky_relu alpha must be in (0, 1)");
  }
  optim::AdamState check(adam);
}

nn::NetworkConfig network_config_for(const Dataset& ds, const TrainConfig& cfg) {
  nn::NetworkConfig nc;
  nc.input_channels = ds.channels;
  nc.input_height = ds.height;
  nc.input_width = ds.width;
  nc.activation = cfg.activation;
  nc.se_enabled = cfg.se_enabled;
  nc.gate = cfg.gate;
  return nc;
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg, std::span<const std::size_t> indices) {
  cfg.validate();
  ds.validate();
  if (ds.size() == 0) fail(ErrorKind::EmptyDataset, "cannot train on an empty dataset");
  if (!ds.labeled()) fail(ErrorKind::MissingLabels, "training needs a labeled dataset");
  auto order = all_or(indices, ds.size());
  for (auto i : order) {
    if (i >= ds.size()) fail(ErrorKind::IndexOutOfRange, "training index out of range");
  }

  TrainResult result{nn::Network(network_config_for(ds, cfg), derive_seed(cfg.seed, 1)), std::nullopt, {}, 0.0};
  if (cfg.optimizer == OptimizerKind::Adam) result.adam.emplace(cfg.adam);
  if (cfg.epochs == 0) return result;

  const auto start = Clock::now();
  auto& net = result.network;
  auto params = net.parameters();
  Rng rng(derive_seed(cfg.seed, 2));
  std::vector<nn::Tensor> cache(ds.size());
  for (auto i : order) {
    if (cache[i].values.empty()) cache[i] = ds.tensor(i);
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      net.zero_grad();
      for (std::size_t b = b0; b < b1; ++b) {
        const std::size_t i = order[b];
        const auto label = stage_index(ds.labels[i]);
        const auto probs = net.forward(cache[i]);
        loss_sum += nn::cross_entropy(probs, label);
        if (argmax(probs) == label) ++correct;
        auto g = nn::cross_entropy_grad(probs, label);
        for (auto& v : g) v *= inv;
        net.backward(g);
      }
      if (cfg.ortho_lambda > 0.0) net.apply_orthogonal_regularization(cfg.ortho_lambda);
      if (cfg.optimizer == OptimizerKind::Adam) {
        optim::adam_step(params, *result.adam);
      } else {
        optim::sgd_step(params, cfg.sgd_lr);
      }
    }
    const double loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(loss)) fail(ErrorKind::NonFinite, "training loss is not finite at epoch " + std::to_string(epoch));
    result.history.loss.push_back(loss);
    result.history.accuracy.push_back(100.0 * static_cast<double>(correct) / static_cast<double>(order.size()));
  }
  result.train_time_s = seconds_since(start);
  return result;
}

// ------------------------------------------------------------- evaluation

void check_compatible(const nn::Network& net, const Dataset& ds) {
  const auto s = net.input_shape();
  if (s.c != ds.channels || s.h != ds.height || s.w != ds.width) {
    fail(ErrorKind::DimensionMismatch,
         "model expects " + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w) +
             " inputs but the cache holds " + std::to_string(ds.channels) + "x" + std::to_string(ds.height) + "x" +
             std::to_string(ds.width) + (ds.reduced ? " (autoencoder-reduced)" : " (full time-frequency)") +
             " images");
  }
}

std::vector<Prediction> predict(const nn::Network& net, const Dataset& ds, std::span<const std::size_t> indices) {
  check_compatible(net, ds);
  const auto idx = all_or(indices, ds.size());
  std::vector<Prediction> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    const auto probs = net.predict(ds.tensor(i));
    Prediction p;
    std::copy(probs.begin(), probs.end(), p.probabilities.begin());
    p.stage = *stage_from_index(argmax(probs));
    out.push_back(p);
  }
  return out;
}

MetricsReport evaluate(const nn::Network& net, const Dataset& ds, std::span<const std::size_t> indices) {
  if (ds.size() == 0) fail(ErrorKind::EmptyDataset, "cannot evaluate on an empty dataset");
  if (!ds.labeled()) fail(ErrorKind::MissingLabels, "evaluation needs a labeled dataset");
  const auto idx = all_or(indices, ds.size());
  const auto preds = predict(net, ds, idx);
  Confusion c{};
  for (std::size_t j = 0; j < idx.size(); ++j) ++c[stage_index(ds.labels[idx[j]])][stage_index(preds[j].stage)];
  return metrics_from_confusion(c);
}

// ----------------------------------------------------------------- splits

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::InvalidArgument, "k must be >= 2");
  if (n < k) {
    fail(ErrorKind::TooFewItems,
         std::to_string(k) + "-fold split needs at least " + std::to_string(k) + " items, got " + std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);
  FoldPlan plan;
  plan.k = k;
  plan.fold_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) plan.fold_of[perm[i]] = i % k;
  return plan;
}

HoldoutSplit holdout_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorKind::InvalidArgument, "test fraction must be in (0, 1)");
  }
  if (n < 2) fail(ErrorKind::TooFewItems, "hold-out split needs at least 2 items, got " + std::to_string(n));
  auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  m = std::clamp<std::size_t>(m, 1, n - 1);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);
  HoldoutSplit s;
  s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(m), perm.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<std::size_t> oversampled_training_indices(const Dataset& ds, std::span<const std::size_t> train,
                                                      std::uint64_t seed) {
  if (!ds.labeled()) fail(ErrorKind::MissingLabels, "oversampling requires labels");
  std::vector<SleepStage> sub;
  sub.reserve(train.size());
  for (auto i : train) sub.push_back(ds.labels.at(i));
  const auto picks = dsp::oversample_indices(sub, seed);
  std::vector<std::size_t> out;
  out.reserve(picks.size());
  for (auto p : picks) out.push_back(train[p]);
  return out;
}

// ------------------------------------------------------------- experiment

AggregateReport aggregate_folds(std::span<const FoldReport> folds) {
  if (folds.empty()) fail(ErrorKind::EmptyInput, "no folds to aggregate");
  AggregateReport a;
  auto summarize = [&](auto get) {
    std::vector<double> xs;
    for (const auto& f : folds) xs.push_back(get(f.metrics));
    return Summary{mean(xs), std_dev(xs)};
  };
  a.overall_accuracy = summarize([](const MetricsReport& m) { return m.overall_accuracy; });
  a.macro_f1 = summarize([](const MetricsReport& m) { return m.macro_f1; });
  a.cohen_kappa = summarize([](const MetricsReport& m) { return m.cohen_kappa; });
  a.processing_time_s = summarize([](const MetricsReport& m) { return m.processing_time_s; });
  for (std::size_t c = 0; c < kNumStages; ++c) {
    a.per_stage_accuracy[c] = summarize([c](const MetricsReport& m) { return m.per_stage_accuracy[c]; });
  }
  for (const auto& f : folds) {
    for (std::size_t i = 0; i < kNumStages; ++i) {
      for (std::size_t j = 0; j < kNumStages; ++j) a.confusion[i][j] += f.metrics.confusion[i][j];
    }
  }
  return a;
}

ExperimentReport run_experiment(const Dataset& ds, const ExperimentConfig& cfg) {
  cfg.train.validate();
  ds.validate();
  if (ds.size() == 0) fail(ErrorKind::EmptyDataset, "experiment dataset is empty");
  if (!ds.labeled()) fail(ErrorKind::MissingLabels, "experiment needs a labeled dataset");
  const auto start = Clock::now();

  std::vector<std::vector<std::size_t>> train_sets, test_sets;
  ExperimentReport report;
  if (cfg.mode == SplitMode::KFold) {
    report.mode = "kfold";
    const auto plan = kfold_split(ds.size(), cfg.k, cfg.train.seed);
    for (std::size_t f = 0; f < plan.k; ++f) {
      train_sets.push_back(plan.train_indices(f));
      test_sets.push_back(plan.test_indices(f));
    }
  } else {
    report.mode = "holdout";
    auto split = holdout_split(ds.size(), cfg.test_fraction, cfg.train.seed);
    train_sets.push_back(std::move(split.train));
    test_sets.push_back(std::move(split.test));
  }

  report.folds.resize(train_sets.size());
  parallel_for(train_sets.size(), cfg.jobs, [&](std::size_t f) {
    const auto fold_start = Clock::now();
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, 1000 + f);
    const auto train_idx =
        tc.oversample ? oversampled_training_indices(ds, train_sets[f], derive_seed(tc.seed, 7)) : train_sets[f];
    auto trained = train(ds, tc, train_idx);
    FoldReport& fr = report.folds[f];
    fr.fold = f;
    fr.train_size = train_idx.size();
    fr.test_size = test_sets[f].size();
    fr.metrics = evaluate(trained.network, ds, test_sets[f]);
    fr.history = std::move(trained.history);
    fr.metrics.processing_time_s = seconds_since(fold_start);
  });
  report.aggregate = aggregate_folds(report.folds);
  report.total_time_s = seconds_since(start);
  return report;
}

ExperimentReport run_experiment(const edf::SynthSpec& spec, const FeatureConfig& features,
                                const ExperimentConfig& cfg) {
  const auto [rec, hyp] = edf::generate_synthetic_recording(spec);
  FeatureConfig fc = features;
  if (cfg.train.bypass_autoencoder) fc.use_autoencoder = false;
  auto built = build_features(rec, &hyp, 0, fc, spec.seed);
  built.dataset.provenance = "synthetic";
  return run_experiment(built.dataset, cfg);
}

}  // namespace essc::pipeline
