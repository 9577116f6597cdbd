#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "essc/nn.hpp"
#include "essc/optim.hpp"

namespace essc::hht {

struct Imf {
  std::vector<double> samples;
  std::size_t index = 0;
};

struct EmdOptions {
  std::size_t max_imfs = 6;
  double sift_tol = 0.05;      // Cauchy-type stop on consecutive sifts
  std::size_t max_sifts = 50;  // hard cap per IMF
};

struct EmdResult {
  std::vector<Imf> imfs;
  std::vector<double> residue;
  // Set when the input had no oscillatory mode (fewer than two extrema).
  bool degenerate = false;
};

EmdResult emd(std::span<const double> signal, const EmdOptions& options = {});

struct Extrema {
  std::vector<std::size_t> maxima;
  std::vector<std::size_t> minima;
};
Extrema find_extrema(std::span<const double> x);

// Natural cubic spline through (knots, values), evaluated at 0..n-1. Knots must
// be strictly increasing.
std::vector<double> natural_spline(std::span<const double> knots, std::span<const double> values, std::size_t n);

struct AnalyticSignal {
  std::vector<double> real;
  std::vector<double> imag;
};

AnalyticSignal hilbert_analytic(std::span<const double> x);

struct InstantaneousAttrs {
  std::vector<double> amplitude;
  std::vector<double> frequency;  // Hz, clamped to [0, fs/2]
};

InstantaneousAttrs instantaneous_attrs(const AnalyticSignal& analytic, double fs);

// T x F amplitude raster, row-major by time bin.
class TimeFrequencyImage {
 public:
  TimeFrequencyImage() = default;
  TimeFrequencyImage(std::size_t time_bins, std::size_t freq_bins, double max_freq);

  std::size_t time_bins() const { return time_bins_; }
  std::size_t freq_bins() const { return freq_bins_; }
  double max_freq() const { return max_freq_; }
  std::size_t size() const { return cells_.size(); }

  double& at(std::size_t t, std::size_t f) { return cells_[t * freq_bins_ + f]; }
  double at(std::size_t t, std::size_t f) const { return cells_[t * freq_bins_ + f]; }
  std::span<const double> cells() const { return cells_; }
  std::span<double> cells() { return cells_; }

 private:
  std::size_t time_bins_ = 0;
  std::size_t freq_bins_ = 0;
  double max_freq_ = 0.0;
  std::vector<double> cells_;
};

TimeFrequencyImage build_tfi(std::span<const Imf> imfs, double fs, std::size_t time_bins = 64,
                             std::size_t freq_bins = 32);

struct TfiConfig {
  std::size_t time_bins = 64;
  std::size_t freq_bins = 32;
  EmdOptions emd;
};

// EMD followed by the Hilbert spectrum raster.
TimeFrequencyImage epoch_to_tfi(std::span<const double> epoch, double fs, const TfiConfig& config = {});

struct AutoencoderOptions {
  std::size_t batch_size = 16;
  double leaky_alpha = 0.1;
  optim::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
};

// Dense encoder (LeakyReLU) to a latent code and dense linear decoder back.
class Autoencoder {
 public:
  Autoencoder() = default;
  Autoencoder(std::size_t time_bins, std::size_t freq_bins, std::size_t latent_dim, double leaky_alpha,
              std::uint64_t seed);

  std::size_t input_dim() const { return time_bins_ * freq_bins_; }
  std::size_t latent_dim() const { return encoder.out(); }
  std::size_t time_bins() const { return time_bins_; }
  std::size_t freq_bins() const { return freq_bins_; }

  // Reduced 2-D grid the latent vector is laid out on for the CNN.
  std::size_t latent_height() const;
  std::size_t latent_width() const { return latent_dim() / latent_height(); }

  std::vector<double> reconstruct(std::span<const double> image) const;
  double reconstruction_mse(std::span<const double> image) const;

  nn::DenseLayer encoder;
  nn::DenseLayer decoder;
  std::vector<double> loss_history;

 private:
  std::size_t time_bins_ = 0;
  std::size_t freq_bins_ = 0;
};

// Default latent size: one eighth of the image.
std::size_t default_latent_dim(std::size_t time_bins, std::size_t freq_bins);

Autoencoder train_autoencoder(std::span<const TimeFrequencyImage> images, std::size_t latent_dim,
                              std::size_t epochs, std::uint64_t seed, const AutoencoderOptions& options = {});

std::vector<double> encode(const Autoencoder& ae, const TimeFrequencyImage& image);

}  // namespace essc::hht
