#include <algorithm>
#include <cmath>
#include <numbers>

#include "essc/edf.hpp"
#include "essc/error.hpp"
#include "essc/rng.hpp"

namespace essc::edf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void add_band_components(std::vector<double>& out, double fs, Rng& rng, int count, double f_lo,
                         double f_hi, double amplitude) {
  for (int c = 0; c < count; ++c) {
    const double f = rng.uniform(f_lo, f_hi);
    const double phase = rng.uniform(0.0, kTwoPi);
    const double a = amplitude * rng.uniform(0.7, 1.3);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += a * std::sin(kTwoPi * f * static_cast<double>(i) / fs + phase);
    }
  }
}

// Gaussian-windowed 12-14 Hz burst, roughly 1.5 s at half height.
void add_spindle(std::vector<double>& out, double fs, Rng& rng, double center_s) {
  const double f = rng.uniform(12.0, 14.0);
  const double phase = rng.uniform(0.0, kTwoPi);
  const double sigma = 0.6;
  const double amplitude = 60.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = static_cast<double>(i) / fs;
    const double d = (t - center_s) / sigma;
    if (std::fabs(d) > 6.0) continue;
    out[i] += amplitude * std::exp(-0.5 * d * d) * std::sin(kTwoPi * f * t + phase);
  }
}

}  // namespace

std::uint64_t template_seed(std::uint64_t seed, int channel, std::size_t epoch) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(channel)), epoch);
}

std::vector<double> stage_template(SleepStage stage, double fs, std::size_t n,
                                   std::uint64_t seed) {
  std::vector<double> out(n, 0.0);
  Rng rng(seed);
  switch (stage) {
    case SleepStage::Wake:
      add_band_components(out, fs, rng, 3, 8.0, 12.0, 25.0);
      // Low-level broadband activity on top of the alpha rhythm.
      add_band_components(out, fs, rng, 12, 1.0, 30.0, 4.0);
      break;
    case SleepStage::S1:
      add_band_components(out, fs, rng, 3, 4.0, 7.0, 30.0);
      break;
    case SleepStage::S2: {
      add_band_components(out, fs, rng, 3, 4.0, 7.0, 20.0);
      // One spindle per quarter epoch.
      const double quarter = static_cast<double>(n) / fs / 4.0;
      for (int q = 0; q < 4; ++q) {
        add_spindle(out, fs, rng, quarter * (q + rng.uniform(0.2, 0.8)));
      }
      break;
    }
    case SleepStage::SWS:
      add_band_components(out, fs, rng, 3, 0.5, 2.0, 80.0);
      break;
    case SleepStage::REM:
      add_band_components(out, fs, rng, 5, 4.0, 10.0, 12.0);
      break;
  }
  return out;
}

std::pair<Recording, Hypnogram> generate_synthetic_recording(const SynthSpec& spec) {
  if (spec.stage_sequence.empty()) fail(ErrorKind::InvalidSpec, "stage sequence is empty");
  if (!(spec.fs > 0.0) || !std::isfinite(spec.fs)) fail(ErrorKind::InvalidSpec, "fs must be positive");
  if (spec.fs < 64.0) fail(ErrorKind::InvalidSpec, "fs must be at least 64 Hz");
  if (spec.fs != std::floor(spec.fs)) fail(ErrorKind::InvalidSpec, "fs must be a whole number of Hz");
  if (spec.channels < 1) fail(ErrorKind::InvalidSpec, "at least one channel is required");
  if (spec.noise_level < 0.0 || !std::isfinite(spec.noise_level)) {
    fail(ErrorKind::InvalidSpec, "noise level must be >= 0");
  }
  const double staged = static_cast<double>(spec.stage_sequence.size()) * kSynthEpochSeconds;
  const double duration = spec.duration_s == 0.0 ? staged : spec.duration_s;
  if (!(duration > 0.0)) fail(ErrorKind::InvalidSpec, "duration must be positive");
  if (duration != std::floor(duration)) fail(ErrorKind::InvalidSpec, "duration must be a whole number of seconds");
  if (duration < staged) {
    fail(ErrorKind::InvalidSpec, "duration is shorter than the stage sequence (" +
                                     std::to_string(staged) + " s)");
  }

  const auto spr = static_cast<int>(spec.fs);
  const auto records = static_cast<long>(duration);
  const auto total = static_cast<std::size_t>(records) * static_cast<std::size_t>(spr);
  const auto epoch_len = static_cast<std::size_t>(kSynthEpochSeconds * spec.fs);

  Recording rec;
  auto& h = rec.header;
  h.patient_id = "X X X synthetic";
  h.recording_id = "Startdate X essc-synth seed=" + std::to_string(spec.seed);
  h.num_data_records = records;
  h.record_duration_s = 1.0;
  h.header_bytes = 256 + 256 * spec.channels;
  for (int c = 0; c < spec.channels; ++c) {
    SignalSpec s;
    s.label = "EEG C" + std::to_string(c + 1);
    s.transducer = "synthetic electrode";
    s.physical_dim = "uV";
    s.physical_min = -kSynthPhysicalRange;
    s.physical_max = kSynthPhysicalRange;
    s.digital_min = -32768;
    s.digital_max = 32767;
    s.prefiltering = "none";
    s.samples_per_record = spr;
    h.signals.push_back(s);
  }

  rec.channels.assign(static_cast<std::size_t>(spec.channels), std::vector<double>(total, 0.0));
  for (int c = 0; c < spec.channels; ++c) {
    auto& channel = rec.channels[static_cast<std::size_t>(c)];
    Rng noise(derive_seed(spec.seed, 0x6E6F697365ULL + static_cast<std::uint64_t>(c)));
    for (std::size_t start = 0, e = 0; start < total; start += epoch_len, ++e) {
      const std::size_t len = std::min(epoch_len, total - start);
      const auto stage = spec.stage_sequence[std::min(e, spec.stage_sequence.size() - 1)];
      auto wave = stage_template(stage, spec.fs, len, template_seed(spec.seed, c, e));
      std::copy(wave.begin(), wave.end(), channel.begin() + static_cast<std::ptrdiff_t>(start));
    }
    if (spec.noise_level > 0.0) {
      const double sigma = spec.noise_level * kSynthNoiseScale;
      for (auto& x : channel) x += sigma * noise.normal();
    }
    for (auto& x : channel) x = std::clamp(x, -kSynthPhysicalRange, kSynthPhysicalRange);
  }

  Hypnogram hyp;
  hyp.epoch_duration_s = kSynthEpochSeconds;
  hyp.stages = spec.stage_sequence;
  return {std::move(rec), std::move(hyp)};
}

}  // namespace essc::edf
