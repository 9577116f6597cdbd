#pragma once

// Independent reference computations used as test oracles. Nothing here calls
// into the library's numerical code.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

inline std::vector<std::complex<double>> dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

// Fraction of (one-sided) spectral energy with bin frequency in [lo, hi] Hz.
inline double band_energy_fraction(const std::vector<double>& x, double fs, double lo, double hi) {
  const auto X = dft(x);
  double in = 0.0, total = 0.0;
  for (std::size_t k = 1; k <= x.size() / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(x.size());
    const double e = std::norm(X[k]);
    total += e;
    if (f >= lo && f <= hi) in += e;
  }
  return total > 0.0 ? in / total : 0.0;
}

// Index of the largest one-sided DFT magnitude (excluding DC).
inline std::size_t dominant_bin(const std::vector<double>& x) {
  const auto X = dft(x);
  std::size_t best = 1;
  for (std::size_t k = 1; k <= x.size() / 2; ++k) {
    if (std::abs(X[k]) > std::abs(X[best])) best = k;
  }
  return best;
}

inline double rms(const std::vector<double>& x, std::size_t from = 0, std::size_t to = 0) {
  if (to == 0) to = x.size();
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(to - from));
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Least-squares fit of a*cos(wt) + b*sin(wt) + c on [from, to); returns amplitude.
inline double sine_fit_amplitude(const std::vector<double>& x, double fs, double f, std::size_t from, std::size_t to) {
  double m[3][4] = {};
  for (std::size_t i = from; i < to; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double basis[3] = {std::cos(2 * std::numbers::pi * f * t), std::sin(2 * std::numbers::pi * f * t), 1.0};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += basis[r] * basis[c];
      m[r][3] += basis[r] * x[i];
    }
  }
  for (int p = 0; p < 3; ++p) {
    for (int r = p + 1; r < 3; ++r) {
      const double k = m[r][p] / m[p][p];
      for (int c = p; c < 4; ++c) m[r][c] -= k * m[p][c];
    }
  }
  double sol[3];
  for (int r = 2; r >= 0; --r) {
    double s = m[r][3];
    for (int c = r + 1; c < 3; ++c) s -= m[r][c] * sol[c];
    sol[r] = s / m[r][r];
  }
  return std::hypot(sol[0], sol[1]);
}

// Direct-form I evaluation of one biquad over a sequence.
inline std::vector<double> biquad_df1(const std::vector<double>& x, double b0, double b1, double b2, double a1,
                                      double a2) {
  std::vector<double> y(x.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x[i];
    y2 = y1;
    y1 = y[i];
  }
  return y;
}

// Central finite difference of f with respect to *p.
inline double central_diff(const std::function<double()>& f, double& p, double h = 1e-5) {
  const double keep = p;
  p = keep + h;
  const double up = f();
  p = keep - h;
  const double down = f();
  p = keep;
  return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / scale;
}

struct Counts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
};

// One-vs-rest counts recounted pair by pair.
inline Counts recount(const std::vector<int>& truth, const std::vector<int>& pred, int cls) {
  Counts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == cls, p = pred[i] == cls;
    if (t && p) ++c.tp;
    else if (!t && !p) ++c.tn;
    else if (!t && p) ++c.fp;
    else ++c.fn;
  }
  return c;
}

// Cohen's kappa from raw pairs via observed and expected agreement.
inline double kappa(const std::vector<int>& truth, const std::vector<int>& pred, int classes) {
  const double n = static_cast<double>(truth.size());
  double agree = 0;
  std::vector<double> rt(classes, 0), rp(classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    agree += truth[i] == pred[i];
    rt[truth[i]] += 1;
    rp[pred[i]] += 1;
  }
  const double po = agree / n;
  double pe = 0;
  for (int c = 0; c < classes; ++c) pe += (rt[c] / n) * (rp[c] / n);
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

// Scalar Adam recurrence, written out independently of the library.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0, v = 0;
  long t = 0;
  double step(double w, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    return w - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace oracle
