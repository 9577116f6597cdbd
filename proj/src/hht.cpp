#include "essc/hht.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "essc/error.hpp"
#include "essc/fft.hpp"

namespace essc::hht {

namespace {

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, std::string(what) + " contains a non-finite sample");
  }
}

double energy(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

// Knot list for one envelope: the extrema plus two mirrored extrema at each end.
void mirrored_knots(std::span<const double> x, const std::vector<std::size_t>& idx, std::vector<double>& knots,
                    std::vector<double>& values) {
  const double last = static_cast<double>(x.size() - 1);
  const std::size_t m = std::min<std::size_t>(2, idx.size());
  knots.clear();
  values.clear();
  for (std::size_t j = m; j-- > 0;) {
    knots.push_back(-static_cast<double>(idx[j]));
    values.push_back(x[idx[j]]);
  }
  for (std::size_t i : idx) {
    knots.push_back(static_cast<double>(i));
    values.push_back(x[i]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = idx[idx.size() - 1 - j];
    knots.push_back(2.0 * last - static_cast<double>(i));
    values.push_back(x[i]);
  }
}

// One sifting pass; returns false when h no longer has envelopes.
bool envelope_mean(std::span<const double> h, std::vector<double>& mean) {
  const Extrema ex = find_extrema(h);
  if (ex.maxima.empty() || ex.minima.empty()) return false;
  std::vector<double> knots, values;
  mirrored_knots(h, ex.maxima, knots, values);
  const auto upper = natural_spline(knots, values, h.size());
  mirrored_knots(h, ex.minima, knots, values);
  const auto lower = natural_spline(knots, values, h.size());
  mean.resize(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) mean[i] = 0.5 * (upper[i] + lower[i]);
  return true;
}

std::vector<double> sift(std::span<const double> r, const EmdOptions& opt) {
  std::vector<double> h(r.begin(), r.end());
  std::vector<double> mean;
  for (std::size_t it = 0; it < opt.max_sifts; ++it) {
    if (!envelope_mean(h, mean)) break;
    const double e = energy(h);
    double diff = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      h[i] -= mean[i];
      diff += mean[i] * mean[i];
    }
    if (e == 0.0 || diff / e < opt.sift_tol) break;
  }
  return h;
}

}  // namespace

Extrema find_extrema(std::span<const double> x) {
  Extrema ex;
  const std::size_t n = x.size();
  if (n < 3) return ex;
  std::size_t i = 1;
  while (i + 1 < n) {
    if (x[i] == x[i - 1]) {
      ++i;
      continue;
    }
    // Walk over a plateau and classify it by the slopes on either side.
    std::size_t j = i;
    while (j + 1 < n && x[j + 1] == x[i]) ++j;
    if (j + 1 >= n) break;
    const std::size_t mid = (i + j) / 2;
    if (x[i] > x[i - 1] && x[i] > x[j + 1]) ex.maxima.push_back(mid);
    if (x[i] < x[i - 1] && x[i] < x[j + 1]) ex.minima.push_back(mid);
    i = j + 1;
  }
  return ex;
}

std::vector<double> natural_spline(std::span<const double> knots, std::span<const double> values, std::size_t n) {
  const std::size_t m = knots.size();
  if (m == 0 || values.size() != m) fail(ErrorKind::InvalidArgument, "spline needs matching knots and values");
  std::vector<double> out(n);
  if (m == 1) {
    std::fill(out.begin(), out.end(), values[0]);
    return out;
  }
  for (std::size_t i = 1; i < m; ++i) {
    if (!(knots[i] > knots[i - 1])) fail(ErrorKind::InvalidArgument, "spline knots must increase");
  }
  // Second derivatives by the Thomas algorithm; natural ends have M = 0.
  std::vector<double> M(m, 0.0);
  if (m > 2) {
    const std::size_t k = m - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t j = 0; j < k; ++j) {
      const double h0 = knots[j + 1] - knots[j];
      const double h1 = knots[j + 2] - knots[j + 1];
      diag[j] = 2.0 * (h0 + h1);
      upper[j] = h1;
      rhs[j] = 6.0 * ((values[j + 2] - values[j + 1]) / h1 - (values[j + 1] - values[j]) / h0);
    }
    for (std::size_t j = 1; j < k; ++j) {
      const double lower = knots[j + 1] - knots[j];
      const double w = lower / diag[j - 1];
      diag[j] -= w * upper[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    M[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t j = k - 1; j-- > 0;) M[j + 1] = (rhs[j] - upper[j] * M[j + 2]) / diag[j];
  }
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    while (seg + 2 < m && t > knots[seg + 1]) ++seg;
    const double x0 = knots[seg], x1 = knots[seg + 1];
    const double h = x1 - x0;
    const double a = (x1 - t) / h, b = (t - x0) / h;
    out[i] = a * values[seg] + b * values[seg + 1] +
             ((a * a * a - a) * M[seg] + (b * b * b - b) * M[seg + 1]) * h * h / 6.0;
  }
  return out;
}

EmdResult emd(std::span<const double> signal, const EmdOptions& options) {
  if (signal.size() < 8) fail(ErrorKind::TooShort, "EMD needs at least 8 samples");
  require_finite(signal, "EMD input");
  EmdResult result;
  result.residue.assign(signal.begin(), signal.end());
  const double scale = std::sqrt(energy(signal));
  for (std::size_t k = 0; k < options.max_imfs; ++k) {
    const Extrema ex = find_extrema(result.residue);
    if (ex.maxima.size() + ex.minima.size() < 2 || ex.maxima.empty() || ex.minima.empty()) break;
    // Residue already at rounding level.
    if (std::sqrt(energy(result.residue)) <= 1e-12 * scale) break;
    auto imf = sift(result.residue, options);
    for (std::size_t i = 0; i < imf.size(); ++i) result.residue[i] -= imf[i];
    result.imfs.push_back({std::move(imf), k});
  }
  result.degenerate = result.imfs.empty();
  return result;
}

AnalyticSignal hilbert_analytic(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorKind::TooShort, "analytic signal needs at least 2 samples");
  require_finite(x, "Hilbert input");
  std::vector<std::complex<double>> spec(x.begin(), x.end());
  fft::transform(spec, false);
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (n % 2 == 0 && k == half) continue;
    spec[k] *= (k <= (n - 1) / 2) ? 2.0 : 0.0;
  }
  fft::transform(spec, true);
  AnalyticSignal a;
  a.real.assign(x.begin(), x.end());
  a.imag.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.imag[i] = spec[i].imag();
  return a;
}

InstantaneousAttrs instantaneous_attrs(const AnalyticSignal& analytic, double fs) {
  const std::size_t n = analytic.real.size();
  if (analytic.imag.size() != n) fail(ErrorKind::DimensionMismatch, "analytic parts differ in length");
  if (!(fs > 0.0)) fail(ErrorKind::InvalidArgument, "sample rate must be positive");
  InstantaneousAttrs out;
  out.amplitude.resize(n);
  out.frequency.assign(n, 0.0);
  std::vector<double> phase(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.amplitude[i] = std::hypot(analytic.real[i], analytic.imag[i]);
    if (!std::isfinite(out.amplitude[i])) fail(ErrorKind::NonFinite, "analytic signal is not finite");
    phase[i] = std::atan2(analytic.imag[i], analytic.real[i]);
    peak = std::max(peak, out.amplitude[i]);
  }
  if (n < 2 || peak == 0.0) return out;
  for (std::size_t i = 1; i < n; ++i) {
    double d = phase[i] - phase[i - 1];
    d -= 2.0 * std::numbers::pi * std::round(d / (2.0 * std::numbers::pi));
    phase[i] = phase[i - 1] + d;
  }
  const double to_hz = fs / (2.0 * std::numbers::pi);
  const double floor_amp = 1e-12 * peak;
  for (std::size_t i = 0; i < n; ++i) {
    if (out.amplitude[i] <= floor_amp) continue;
    double dphi;
    if (i == 0) dphi = phase[1] - phase[0];
    else if (i + 1 == n) dphi = phase[i] - phase[i - 1];
    else dphi = 0.5 * (phase[i + 1] - phase[i - 1]);
    out.frequency[i] = std::clamp(dphi * to_hz, 0.0, fs / 2.0);
  }
  return out;
}

TimeFrequencyImage::TimeFrequencyImage(std::size_t time_bins, std::size_t freq_bins, double max_freq)
    : time_bins_(time_bins), freq_bins_(freq_bins), max_freq_(max_freq), cells_(time_bins * freq_bins, 0.0) {
  if (time_bins == 0 || freq_bins == 0) fail(ErrorKind::InvalidArgument, "image dimensions must be >= 1");
}

TimeFrequencyImage build_tfi(std::span<const Imf> imfs, double fs, std::size_t time_bins, std::size_t freq_bins) {
  if (!(fs > 0.0)) fail(ErrorKind::InvalidArgument, "sample rate must be positive");
  TimeFrequencyImage img(time_bins, freq_bins, fs / 2.0);
  if (imfs.empty()) return img;
  const std::size_t n = imfs.front().samples.size();
  for (const auto& imf : imfs) {
    if (imf.samples.size() != n) fail(ErrorKind::DimensionMismatch, "IMFs differ in length");
  }
  if (n < time_bins) {
    fail(ErrorKind::InvalidArgument,
         "image has " + std::to_string(time_bins) + " time bins but IMFs only " + std::to_string(n) + " samples");
  }
  const double nyquist = fs / 2.0;
  for (const auto& imf : imfs) {
    const auto attrs = instantaneous_attrs(hilbert_analytic(imf.samples), fs);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t t = i * time_bins / n;
      // Small offset so tones sitting on a bin edge do not straddle it.
      const double pos = attrs.frequency[i] / nyquist * static_cast<double>(freq_bins) + 1e-9;
      const auto f = std::min(static_cast<std::size_t>(std::max(pos, 0.0)), freq_bins - 1);
      img.at(t, f) += attrs.amplitude[i];
    }
  }
  double peak = 0.0;
  for (double v : img.cells()) peak = std::max(peak, v);
  if (peak > 0.0) {
    for (double& v : img.cells()) v /= peak;
  }
  return img;
}

TimeFrequencyImage epoch_to_tfi(std::span<const double> epoch, double fs, const TfiConfig& config) {
  const auto dec = emd(epoch, config.emd);
  return build_tfi(dec.imfs, fs, config.time_bins, config.freq_bins);
}

}  // namespace essc::hht
