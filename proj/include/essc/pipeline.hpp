#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "essc/dsp.hpp"
#include "essc/edf.hpp"
#include "essc/hht.hpp"
#include "essc/nn.hpp"
#include "essc/optim.hpp"
#include "essc/stage.hpp"

namespace essc::pipeline {

// ------------------------------------------------------------------ dataset

struct Dataset {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::vector<float>> images;  // each channels*height*width
  std::vector<SleepStage> labels;          // empty for unlabeled caches
  bool reduced = false;                    // images are autoencoder latents
  std::string provenance;
  std::uint64_t seed = 0;

  std::size_t size() const { return images.size(); }
  bool labeled() const { return !labels.empty(); }
  std::size_t image_size() const { return channels * height * width; }
  nn::Tensor tensor(std::size_t i) const;
  std::array<std::size_t, kNumStages> class_counts() const;
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

inline constexpr char kDatasetMagic[8] = {'E', 'S', 'S', 'C', 'D', 'S', '0', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

// ----------------------------------------------------------- feature build

struct FeatureConfig {
  dsp::PreprocessConfig preprocess;
  hht::TfiConfig tfi;
  bool use_autoencoder = true;
  std::size_t latent_dim = 0;  // 0 selects T*F/8
  std::size_t autoencoder_epochs = 20;
  hht::AutoencoderOptions autoencoder;
  std::size_t jobs = 1;  // parallel EMD workers
};

std::vector<hht::TimeFrequencyImage> epochs_to_tfis(const dsp::EpochSet& epochs, double fs,
                                                    const hht::TfiConfig& cfg, std::size_t jobs = 1);

// Zero mean, unit variance in place; constant images become all zeros.
void standardize(std::vector<float>& image);

// Raw images, or latents laid out on the autoencoder's reduced grid. Every
// image is standardized.
Dataset images_to_dataset(std::span<const hht::TimeFrequencyImage> tfis, std::span<const SleepStage> labels,
                          const hht::Autoencoder* ae);

struct FeatureResult {
  Dataset dataset;
  std::optional<hht::Autoencoder> autoencoder;  // trained or reused
  std::size_t epochs_dropped = 0;
};

// Preprocess one channel, epoch it, build TFIs and optionally reduce them.
// When `reuse` is given the autoencoder is applied rather than trained.
FeatureResult build_features(const edf::Recording& rec, const edf::Hypnogram* hyp, std::size_t channel,
                             const FeatureConfig& cfg, std::uint64_t seed, const hht::Autoencoder* reuse = nullptr);

// --------------------------------------------------------------- training

enum class OptimizerKind : std::uint8_t { Adam = 0, Sgd = 1, None = 2 };
std::string optimizer_name(OptimizerKind k);
std::optional<OptimizerKind> parse_optimizer(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  OptimizerKind optimizer = OptimizerKind::Adam;
  optim::AdamConfig adam;
  double sgd_lr = 0.01;
  nn::Activation activation = nn::Activation::leaky_relu(0.1);
  nn::GateType gate = nn::GateType::ClampedLeaky;
  double ortho_lambda = 1e-4;
  std::uint64_t seed = 0;
  bool se_enabled = true;
  bool bypass_autoencoder = false;
  bool oversample = true;

  // LeakyReLU + Adam + clamped leaky gate.
  static TrainConfig proposed(double alpha = 0.1);
  // Sigmoid + plain gradient descent + sigmoid gate.
  static TrainConfig baseline();
  void validate() const;
};

nn::NetworkConfig network_config_for(const Dataset& ds, const TrainConfig& cfg);

struct History {
  std::vector<double> loss;      // mean cross-entropy per epoch
  std::vector<double> accuracy;  // running training accuracy per epoch, %
};

struct TrainResult {
  nn::Network network;
  std::optional<optim::AdamState> adam;
  History history;
  double train_time_s = 0.0;
};

// Trains on `indices` of the dataset (all items when empty).
TrainResult train(const Dataset& ds, const TrainConfig& cfg, std::span<const std::size_t> indices = {});

// ---------------------------------------------------------------- metrics

using Confusion = std::array<std::array<std::uint64_t, kNumStages>, kNumStages>;

struct MetricsReport {
  Confusion confusion{};
  std::array<double, kNumStages> per_stage_accuracy{};  // one-vs-rest, %
  double overall_accuracy = 0.0;                        // trace / total, %
  double macro_f1 = 0.0;
  double cohen_kappa = 0.0;
  double processing_time_s = 0.0;

  std::uint64_t total() const;
  bool operator==(const MetricsReport&) const = default;
};

MetricsReport metrics_from_confusion(const Confusion& confusion);
MetricsReport metrics_from_predictions(std::span<const SleepStage> truth, std::span<const SleepStage> predicted);

double std_dev(std::span<const double> xs);
double mean(std::span<const double> xs);

struct Prediction {
  SleepStage stage = SleepStage::Wake;
  std::array<double, kNumStages> probabilities{};
};

std::vector<Prediction> predict(const nn::Network& net, const Dataset& ds, std::span<const std::size_t> indices = {});
MetricsReport evaluate(const nn::Network& net, const Dataset& ds, std::span<const std::size_t> indices = {});

// Explains a model/cache geometry mismatch; throws DimensionMismatch.
void check_compatible(const nn::Network& net, const Dataset& ds);

// ----------------------------------------------------------------- splits

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;  // per item

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

FoldPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

HoldoutSplit holdout_split(std::size_t n, double test_fraction, std::uint64_t seed);

// Training indices after class balancing (original order, then duplicates).
std::vector<std::size_t> oversampled_training_indices(const Dataset& ds, std::span<const std::size_t> train,
                                                      std::uint64_t seed);

// ------------------------------------------------------------- experiment

enum class SplitMode : std::uint8_t { KFold = 0, Holdout = 1 };

struct ExperimentConfig {
  SplitMode mode = SplitMode::KFold;
  std::size_t k = 20;
  double test_fraction = 0.15;
  TrainConfig train;
  std::size_t jobs = 1;
};

struct FoldReport {
  std::size_t fold = 0;
  std::size_t train_size = 0;  // after oversampling
  std::size_t test_size = 0;
  MetricsReport metrics;
  History history;
};

struct Summary {
  double mean = 0.0;
  double std_dev = 0.0;
};

struct AggregateReport {
  Summary overall_accuracy;
  Summary macro_f1;
  Summary cohen_kappa;
  std::array<Summary, kNumStages> per_stage_accuracy{};
  Summary processing_time_s;
  Confusion confusion{};  // summed over folds
};

struct ExperimentReport {
  std::string mode;
  std::vector<FoldReport> folds;
  AggregateReport aggregate;
  double total_time_s = 0.0;
};

AggregateReport aggregate_folds(std::span<const FoldReport> folds);

ExperimentReport run_experiment(const Dataset& ds, const ExperimentConfig& cfg);
ExperimentReport run_experiment(const edf::SynthSpec& spec, const FeatureConfig& features,
                                const ExperimentConfig& cfg);

// ---------------------------------------------------------------- reports

struct ReportOptions {
  bool include_timing = false;  // wall-clock values break byte-identical reruns
};

std::string metrics_to_json(const MetricsReport& m, const ReportOptions& opt = {});
std::string metrics_to_csv(const MetricsReport& m, const ReportOptions& opt = {});
std::string experiment_to_json(const ExperimentReport& r, const ReportOptions& opt = {});
// One row per fold plus a mean row and a std row.
std::string experiment_to_csv(const ExperimentReport& r, const ReportOptions& opt = {});
std::string history_to_csv(const History& h);
std::string history_to_tsv(const History& h);
std::string per_stage_to_tsv(const MetricsReport& m);
std::string predictions_to_csv(std::span<const Prediction> preds);

}  // namespace essc::pipeline
