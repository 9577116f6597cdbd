#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "essc/stage.hpp"

namespace essc::edf {

struct DateTime {
  int day = 1;
  int month = 1;
  int year = 0;  // two-digit EDF year field, 0..99
  int hour = 0;
  int minute = 0;
  int second = 0;

  bool operator==(const DateTime&) const = default;
};

struct SignalSpec {
  std::string label;         // 16 chars
  std::string transducer;    // 80 chars
  std::string physical_dim;  // 8 chars
  double physical_min = -1000.0;
  double physical_max = 1000.0;
  int digital_min = -32768;
  int digital_max = 32767;
  std::string prefiltering;  // 80 chars
  int samples_per_record = 0;

  // Physical units per digital step.
  double gain() const {
    return (physical_max - physical_min) / static_cast<double>(digital_max - digital_min);
  }
  double to_physical(int digital) const {
    return (digital - digital_min) * gain() + physical_min;
  }
};

struct EdfHeader {
  std::string version_tag = "0";
  std::string patient_id;
  std::string recording_id;
  DateTime start;
  int header_bytes = 256;
  long num_data_records = 0;  // -1 in a file means "unknown"
  double record_duration_s = 1.0;
  std::vector<SignalSpec> signals;
};

struct Recording {
  EdfHeader header;
  std::vector<std::vector<double>> channels;

  double sample_rate(std::size_t channel) const;
  double duration_s() const {
    return static_cast<double>(header.num_data_records) * header.record_duration_s;
  }
};

struct Hypnogram {
  double epoch_duration_s = 30.0;
  std::vector<SleepStage> stages;
};

// Throws MalformedHeader or TruncatedData. "EDF Annotations" signals are
// dropped from the returned recording.
Recording parse_edf(std::span<const std::uint8_t> bytes);

// Throws RangeOverflow when a sample does not fit the digital range, and
// InvalidSpec when the recording violates its own header.
std::vector<std::uint8_t> write_edf(const Recording& recording);

// Throws UnknownLabel naming the 1-based line number.
Hypnogram load_hypnogram(std::string_view text);
std::string format_hypnogram(const Hypnogram& hypnogram);

void validate(const Recording& recording);

struct SynthSpec {
  int channels = 1;
  double duration_s = 0.0;  // 0 means stage_sequence.size() * 30 s
  double fs = 128.0;
  std::vector<SleepStage> stage_sequence;
  double noise_level = 0.5;  // white-noise sigma in units of 10 uV
  std::uint64_t seed = 0;
};

inline constexpr double kSynthEpochSeconds = 30.0;
inline constexpr double kSynthPhysicalRange = 1000.0;  // +/- uV
inline constexpr double kSynthNoiseScale = 10.0;       // uV per unit noise_level

// Noise-free stage waveform for one 30 s epoch of one channel; all randomness
// (component frequencies, phases, spindle positions) is drawn from
// template_seed.
std::vector<double> stage_template(SleepStage stage, double fs, std::size_t n,
                                   std::uint64_t template_seed);

// Seed used for the template of (channel, epoch) under a given spec seed.
std::uint64_t template_seed(std::uint64_t seed, int channel, std::size_t epoch);

std::pair<Recording, Hypnogram> generate_synthetic_recording(const SynthSpec& spec);

}  // namespace essc::edf
