#include "essc/dsp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "essc/error.hpp"
#include "essc/rng.hpp"

namespace essc::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

// Resampler kernel: zero crossings of the cutoff sinc on each side and the
// Kaiser shape parameter.
constexpr double kResampleZeroCrossings = 32.0;
constexpr double kKaiserBeta = 8.0;
constexpr double kResampleCutoffFraction = 0.45;

double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// Kaiser window sampled on [0, 1]; evaluated by linear interpolation.
class KaiserTable {
 public:
  explicit KaiserTable(double beta) : values_(kSize + 1) {
    const double norm = bessel_i0(beta);
    for (std::size_t i = 0; i <= kSize; ++i) {
      const double r = static_cast<double>(i) / kSize;
      values_[i] = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    }
  }

  double operator()(double r) const {
    const double pos = std::fabs(r) * kSize;
    const auto i = static_cast<std::size_t>(pos);
    if (i >= kSize) return values_[kSize];
    const double frac = pos - static_cast<double>(i);
    return values_[i] + frac * (values_[i + 1] - values_[i]);
  }

 private:
  static constexpr std::size_t kSize = 16384;
  std::vector<double> values_;
};

double sinc(double x) {
  if (std::fabs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

void require_finite(const TimeSeries& ts) {
  if (!(ts.fs > 0.0) || !std::isfinite(ts.fs)) fail(ErrorKind::InvalidArgument, "sample rate must be positive");
  for (double x : ts.samples) {
    if (!std::isfinite(x)) fail(ErrorKind::NonFinite, "time series contains a non-finite sample");
  }
}

}  // namespace

std::complex<double> Biquad::response(double omega) const {
  const std::complex<double> z1 = std::polar(1.0, -omega);
  const std::complex<double> z2 = z1 * z1;
  return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

IirFilter::IirFilter(std::vector<Biquad> sections, double fs)
    : sections_(std::move(sections)), state_(sections_.size(), {0.0, 0.0}), fs_(fs) {
  if (!(fs > 0.0)) fail(ErrorKind::InvalidArgument, "filter sample rate must be positive");
}

std::complex<double> IirFilter::response(double f) const {
  const double omega = 2.0 * kPi * f / fs_;
  std::complex<double> h = 1.0;
  for (const auto& s : sections_) h *= s.response(omega);
  return h;
}

double IirFilter::magnitude_db(double f) const { return 20.0 * std::log10(magnitude(f)); }

bool IirFilter::stable() const {
  return std::all_of(sections_.begin(), sections_.end(), [](const Biquad& s) { return s.stable(); });
}

void IirFilter::reset() {
  for (auto& st : state_) st = {0.0, 0.0};
}

double IirFilter::process(double x) {
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const auto& s = sections_[i];
    auto& st = state_[i];
    const double y = s.b0 * x + st[0];
    st[0] = s.b1 * x - s.a1 * y + st[1];
    st[1] = s.b2 * x - s.a2 * y;
    x = y;
  }
  return x;
}

TimeSeries resample(const TimeSeries& ts, double target_fs) {
  if (ts.samples.empty()) fail(ErrorKind::EmptyInput, "cannot resample an empty series");
  require_finite(ts);
  if (!(target_fs > 0.0)) fail(ErrorKind::InvalidArgument, "target rate must be positive");
  if (ts.fs == target_fs) return ts;

  const std::size_t n_in = ts.samples.size();
  const auto n_out = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * target_fs / ts.fs)));
  const double cutoff = kResampleCutoffFraction * std::min(ts.fs, target_fs);
  const double half_width_s = kResampleZeroCrossings / (2.0 * cutoff);
  const KaiserTable window(kKaiserBeta);

  TimeSeries out;
  out.fs = target_fs;
  out.samples.resize(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double t = static_cast<double>(j) / target_fs;
    const double center = t * ts.fs;
    const double reach = half_width_s * ts.fs;
    const auto k_lo = static_cast<long>(std::max(0.0, std::ceil(center - reach)));
    const auto k_hi = static_cast<long>(std::min(static_cast<double>(n_in - 1), std::floor(center + reach)));
    double acc = 0.0;
    double norm = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) {
      const double dt = static_cast<double>(k) / ts.fs - t;
      const double r = dt / half_width_s;
      if (std::fabs(r) > 1.0) continue;
      const double h = sinc(2.0 * cutoff * dt) * window(r);
      acc += ts.samples[static_cast<std::size_t>(k)] * h;
      norm += h;
    }
    out.samples[j] = norm != 0.0 ? acc / norm : 0.0;
  }
  return out;
}

IirFilter design_notch(double fs, double f0, double q) {
  if (!(fs > 0.0)) fail(ErrorKind::InvalidArgument, "fs must be positive");
  if (!(f0 > 0.0) || !(f0 < fs / 2.0)) {
    fail(ErrorKind::FrequencyOutOfRange,
         "notch frequency " + std::to_string(f0) + " Hz is not below Nyquist (" + std::to_string(fs / 2.0) + " Hz)");
  }
  if (!(q > 0.0)) fail(ErrorKind::InvalidArgument, "quality factor must be positive");
  const double w0 = 2.0 * kPi * f0 / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad s;
  s.b0 = 1.0 / a0;
  s.b1 = -2.0 * std::cos(w0) / a0;
  s.b2 = 1.0 / a0;
  s.a1 = -2.0 * std::cos(w0) / a0;
  s.a2 = (1.0 - alpha) / a0;
  return IirFilter({s}, fs);
}

IirFilter design_butterworth_bandpass(double fs, double lo, double hi, int order) {
  if (!(fs > 0.0)) fail(ErrorKind::InvalidArgument, "fs must be positive");
  if (!(lo > 0.0) || !(lo < hi) || !(hi < fs / 2.0)) {
    fail(ErrorKind::FrequencyOutOfRange, "bandpass edges must satisfy 0 < lo < hi < fs/2");
  }
  if (order < 2 || order % 2 != 0) fail(ErrorKind::InvalidArgument, "bandpass order must be even and >= 2");
  const int n = order / 2;

  // Pre-warped analog band edges.
  const double k = 2.0 * fs;
  const double w_lo = k * std::tan(kPi * lo / fs);
  const double w_hi = k * std::tan(kPi * hi / fs);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;

  // Lowpass prototype poles -> bandpass poles (s^2 - p*bw*s + w0^2 = 0).
  std::vector<std::complex<double>> poles;
  for (int i = 0; i < n; ++i) {
    const double theta = kPi * (2.0 * i + n + 1) / (2.0 * n);
    const std::complex<double> p = std::polar(1.0, theta);
    const std::complex<double> disc = std::sqrt(p * p * bw * bw - 4.0 * w0_sq);
    poles.push_back((p * bw + disc) / 2.0);
    poles.push_back((p * bw - disc) / 2.0);
  }

  std::vector<std::complex<double>> upper;
  std::vector<double> real_poles;
  for (auto s : poles) {
    const auto z = (k + s) / (k - s);
    if (z.imag() > 1e-12) {
      upper.push_back(z);
    } else if (std::fabs(z.imag()) <= 1e-12) {
      real_poles.push_back(z.real());
    }
  }
  std::sort(real_poles.begin(), real_poles.end());

  std::vector<Biquad> sections;
  for (auto z : upper) {
    Biquad b;
    b.b0 = 1.0;
    b.b1 = 0.0;
    b.b2 = -1.0;
    b.a1 = -2.0 * z.real();
    b.a2 = std::norm(z);
    sections.push_back(b);
  }
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    Biquad b;
    b.b0 = 1.0;
    b.b1 = 0.0;
    b.b2 = -1.0;
    b.a1 = -(real_poles[i] + real_poles[i + 1]);
    b.a2 = real_poles[i] * real_poles[i + 1];
    sections.push_back(b);
  }

  // Unit gain per section at the digital image of the analog centre frequency.
  const double omega_c = 2.0 * std::atan(std::sqrt(w0_sq) / k);
  for (auto& b : sections) {
    const double g = std::abs(b.response(omega_c));
    b.b0 /= g;
    b.b1 /= g;
    b.b2 /= g;
  }
  return IirFilter(std::move(sections), fs);
}

TimeSeries filter_apply(IirFilter& filter, const TimeSeries& ts) {
  if (std::fabs(filter.fs() - ts.fs) > 1e-9 * ts.fs) {
    fail(ErrorKind::SampleRateMismatch, "filter designed for " + std::to_string(filter.fs()) +
                                            " Hz applied to a " + std::to_string(ts.fs) + " Hz series");
  }
  TimeSeries out;
  out.fs = ts.fs;
  out.samples.resize(ts.samples.size());
  for (std::size_t i = 0; i < ts.samples.size(); ++i) out.samples[i] = filter.process(ts.samples[i]);
  return out;
}

EpochSet segment_epochs(const TimeSeries& ts, const edf::Hypnogram* hypnogram, double epoch_s) {
  if (!(epoch_s > 0.0)) fail(ErrorKind::InvalidArgument, "epoch length must be positive");
  if (!(ts.fs > 0.0)) fail(ErrorKind::InvalidArgument, "sample rate must be positive");
  const auto len = static_cast<std::size_t>(std::llround(epoch_s * ts.fs));
  if (len == 0 || ts.samples.size() < len) {
    fail(ErrorKind::TooShort, "series of " + std::to_string(ts.duration_s()) + " s is shorter than one " +
                                  std::to_string(epoch_s) + " s epoch");
  }
  std::size_t count = ts.samples.size() / len;
  EpochSet out;
  out.epoch_len_samples = len;
  if (hypnogram != nullptr) {
    if (std::fabs(hypnogram->epoch_duration_s - epoch_s) > 1e-9) {
      fail(ErrorKind::InvalidArgument, "hypnogram epoch length differs from segmentation epoch length");
    }
    // Epochs past the end of the scoring carry no label and are dropped.
    count = std::min(count, hypnogram->stages.size());
    out.labels.emplace(hypnogram->stages.begin(),
                       hypnogram->stages.begin() + static_cast<std::ptrdiff_t>(count));
  }
  out.epochs.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    auto first = ts.samples.begin() + static_cast<std::ptrdiff_t>(e * len);
    out.epochs.emplace_back(first, first + static_cast<std::ptrdiff_t>(len));
  }
  return out;
}

std::vector<std::size_t> oversample_indices(std::span<const SleepStage> labels, std::uint64_t seed) {
  if (labels.empty()) fail(ErrorKind::EmptyClass, "no labelled epochs to balance");
  std::array<std::vector<std::size_t>, kNumStages> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[stage_index(labels[i])].push_back(i);
  std::size_t target = 0;
  for (const auto& m : members) target = std::max(target, m.size());

  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = i;
  Rng rng(seed);
  for (const auto& m : members) {
    if (m.empty()) continue;
    for (std::size_t extra = m.size(); extra < target; ++extra) out.push_back(m[rng.uniform_index(m.size())]);
  }
  return out;
}

EpochSet oversample_classes(const EpochSet& es, std::uint64_t seed) {
  if (!es.labels) fail(ErrorKind::MissingLabels, "oversampling requires labelled epochs");
  if (es.labels->size() != es.epochs.size()) fail(ErrorKind::ShapeMismatch, "labels do not align with epochs");
  auto indices = oversample_indices(*es.labels, seed);
  EpochSet out;
  out.epoch_len_samples = es.epoch_len_samples;
  out.labels.emplace();
  out.epochs.reserve(indices.size());
  out.labels->reserve(indices.size());
  for (auto i : indices) {
    out.epochs.push_back(es.epochs[i]);
    out.labels->push_back((*es.labels)[i]);
  }
  return out;
}

TimeSeries preprocess(const TimeSeries& raw, const PreprocessConfig& cfg) {
  if (raw.samples.empty()) fail(ErrorKind::EmptyInput, "cannot preprocess an empty series");
  require_finite(raw);
  TimeSeries current = raw;
  // Mains interference is only removable while it is below Nyquist, i.e.
  // before the series is brought down to the target rate.
  if (cfg.mains_hz > 0.0 && cfg.mains_hz < raw.fs / 2.0) {
    auto notch = design_notch(raw.fs, cfg.mains_hz, cfg.notch_q);
    current = filter_apply(notch, current);
  }
  current = resample(current, cfg.target_fs);
  auto band = design_butterworth_bandpass(current.fs, cfg.band_lo, cfg.band_hi, cfg.band_order);
  return filter_apply(band, current);
}

}  // namespace essc::dsp
