#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "essc/edf.hpp"
#include "essc/stage.hpp"

namespace essc::dsp {

struct TimeSeries {
  std::vector<double> samples;
  double fs = 0.0;

  double duration_s() const { return static_cast<double>(samples.size()) / fs; }
};

// Direct-form second-order section: b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(double omega) const;
  bool stable() const { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }
};

class IirFilter {
 public:
  IirFilter(std::vector<Biquad> sections, double fs);

  static IirFilter identity(double fs) { return IirFilter({Biquad{}}, fs); }

  std::span<const Biquad> sections() const { return sections_; }
  double fs() const { return fs_; }

  // Frequency response at f Hz.
  std::complex<double> response(double f) const;
  double magnitude(double f) const { return std::abs(response(f)); }
  double magnitude_db(double f) const;
  bool stable() const;

  void reset();
  double process(double x);

 private:
  std::vector<Biquad> sections_;
  std::vector<std::array<double, 2>> state_;  // transposed direct form II
  double fs_;
};

TimeSeries resample(const TimeSeries& ts, double target_fs = 64.0);

IirFilter design_notch(double fs, double f0, double q = 30.0);

// `order` is the total bandpass order (twice the lowpass prototype order).
IirFilter design_butterworth_bandpass(double fs, double lo = 0.5, double hi = 30.0, int order = 8);

// Causal cascade; continues from the filter's current state.
TimeSeries filter_apply(IirFilter& filter, const TimeSeries& ts);

struct EpochSet {
  std::vector<std::vector<double>> epochs;
  std::optional<std::vector<SleepStage>> labels;
  std::size_t epoch_len_samples = 0;
};

EpochSet segment_epochs(const TimeSeries& ts, const edf::Hypnogram* hypnogram, double epoch_s = 30.0);

// Indices into `labels` after balancing every present class up to the largest
// class count: all original indices in order, then the drawn duplicates.
std::vector<std::size_t> oversample_indices(std::span<const SleepStage> labels, std::uint64_t seed);

EpochSet oversample_classes(const EpochSet& epochs, std::uint64_t seed);

struct PreprocessConfig {
  double target_fs = 64.0;
  double mains_hz = 50.0;
  double notch_q = 30.0;
  double band_lo = 0.5;
  double band_hi = 30.0;
  int band_order = 8;
  double epoch_s = 30.0;
};

// Notch at the source rate (when the mains frequency is representable there),
// resample, then bandpass.
TimeSeries preprocess(const TimeSeries& raw, const PreprocessConfig& cfg);

}  // namespace essc::dsp
