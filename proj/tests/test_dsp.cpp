#include <doctest.h>

#include <cmath>
#include <numbers>

#include "essc/dsp.hpp"
#include "essc/rng.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace essc;
using namespace essc::dsp;
using testing::kind_of;

namespace {

TimeSeries tone(double f, double fs, double seconds, double amp = 1.0) {
  TimeSeries ts;
  ts.fs = fs;
  ts.samples.resize(static_cast<std::size_t>(seconds * fs));
  for (std::size_t i = 0; i < ts.samples.size(); ++i) {
    ts.samples[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
  }
  return ts;
}

// Cascade response evaluated directly from the coefficients on the unit circle.
double oracle_gain(const IirFilter& filt, double f) {
  const double w = 2.0 * std::numbers::pi * f / filt.fs();
  const std::complex<double> z1 = std::polar(1.0, -w), z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : filt.sections()) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return std::abs(h);
}

double db(double g) { return 20.0 * std::log10(g); }

std::vector<double> cascade_df1(const IirFilter& filt, std::vector<double> x) {
  for (const auto& s : filt.sections()) x = oracle::biquad_df1(x, s.b0, s.b1, s.b2, s.a1, s.a2);
  return x;
}

}  // namespace

TEST_CASE("resample keeps DC") {
  TimeSeries ts{std::vector<double>(128 * 10, 3.0), 128.0};
  const auto out = resample(ts, 64.0);
  CHECK(out.fs == 64.0);
  CHECK(out.samples.size() == 640);
  for (std::size_t i = 64; i < out.samples.size() - 64; ++i) CHECK(out.samples[i] == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("resample 10 Hz tone from 250 Hz keeps its amplitude") {
  const auto out = resample(tone(10.0, 250.0, 20.0), 64.0);
  CHECK(std::fabs(out.duration_s() - 20.0) <= 1.0 / 64.0);
  const double a = oracle::sine_fit_amplitude(out.samples, 64.0, 10.0, 128, out.samples.size() - 128);
  CHECK(a == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("resample rejects content above the new Nyquist") {
  const auto in = tone(40.0, 250.0, 20.0);
  const auto out = resample(in, 64.0);
  const double ratio = oracle::rms(out.samples, 128, out.samples.size() - 128) / oracle::rms(in.samples);
  CHECK(db(ratio) <= -20.0);
}

TEST_CASE("resample upsampling and errors") {
  const auto out = resample(tone(5.0, 64.0, 10.0), 128.0);
  CHECK(out.samples.size() == 1280);
  CHECK(oracle::sine_fit_amplitude(out.samples, 128.0, 5.0, 128, 1152) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(kind_of([] { resample(TimeSeries{{}, 64.0}, 32.0); }) == ErrorKind::EmptyInput);
}

TEST_CASE("notch design") {
  const auto n = design_notch(256.0, 50.0, 30.0);
  CHECK(oracle_gain(n, 50.0) <= 0.1);
  CHECK(n.magnitude(50.0) == doctest::Approx(oracle_gain(n, 50.0)).epsilon(1e-9));
  CHECK(oracle_gain(n, 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::fabs(db(oracle_gain(n, 40.0))) <= 1.0);
  CHECK(n.stable());
  CHECK(kind_of([] { design_notch(64.0, 50.0); }) == ErrorKind::FrequencyOutOfRange);
}

TEST_CASE("notch removes a 50 Hz tone in steady state") {
  auto n = design_notch(256.0, 50.0);
  const auto in = tone(50.0, 256.0, 10.0);
  const auto out = filter_apply(n, in);
  const double ratio = oracle::rms(out.samples, 1280, 2560) / oracle::rms(in.samples, 1280, 2560);
  CHECK(db(ratio) <= -20.0);
}

TEST_CASE("butterworth bandpass response") {
  const auto bp = design_butterworth_bandpass(64.0, 0.5, 30.0, 8);
  CHECK(bp.sections().size() == 4);
  CHECK(bp.stable());
  for (const auto& s : bp.sections()) CHECK((std::fabs(s.a2) < 1.0 && std::fabs(s.a1) < 1.0 + s.a2));
  CHECK(std::fabs(db(oracle_gain(bp, 30.0)) + 3.0103) <= 0.5);
  CHECK(std::fabs(db(oracle_gain(bp, 0.5)) + 3.0103) <= 0.5);
  CHECK(db(oracle_gain(bp, 0.05)) <= -30.0);
  CHECK(std::fabs(db(oracle_gain(bp, 4.0))) <= 0.5);
  CHECK(std::fabs(db(oracle_gain(bp, std::sqrt(0.5 * 30.0)))) <= 0.5);
  // Monotonic decay below the lower edge.
  double prev = oracle_gain(bp, 0.5);
  for (double f = 0.45; f > 0.01; f -= 0.05) {
    const double g = oracle_gain(bp, f);
    CHECK(g < prev);
    prev = g;
  }
  CHECK(kind_of([] { design_butterworth_bandpass(64.0, 0.5, 40.0); }) == ErrorKind::FrequencyOutOfRange);
  CHECK(kind_of([] { design_butterworth_bandpass(64.0, 0.5, 30.0, 3); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("sections are stable across designs") {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const double fs = rng.uniform(64.0, 512.0);
    const double lo = rng.uniform(0.1, 5.0);
    const double hi = rng.uniform(lo + 1.0, 0.45 * fs);
    const int order = 2 * (1 + static_cast<int>(rng.uniform_index(5)));
    CHECK(design_butterworth_bandpass(fs, lo, hi, order).stable());
    CHECK(design_notch(fs, rng.uniform(1.0, 0.49 * fs), rng.uniform(1.0, 50.0)).stable());
  }
}

TEST_CASE("filter_apply matches a direct-form I cascade") {
  auto bp = design_butterworth_bandpass(64.0);
  Rng rng(4);
  TimeSeries x{std::vector<double>(2000), 64.0};
  for (auto& v : x.samples) v = rng.normal();
  const auto got = filter_apply(bp, x);
  const auto want = cascade_df1(bp, x.samples);
  REQUIRE(got.samples.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.samples[i] == doctest::Approx(want[i]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("filter_apply identity, zero and linearity") {
  Rng rng(5);
  TimeSeries x{std::vector<double>(500), 64.0}, y{std::vector<double>(500), 64.0};
  for (auto& v : x.samples) v = rng.normal();
  for (auto& v : y.samples) v = rng.normal();

  auto id = IirFilter::identity(64.0);
  CHECK(filter_apply(id, x).samples == x.samples);

  auto bp = design_butterworth_bandpass(64.0);
  const auto z = filter_apply(bp, TimeSeries{std::vector<double>(300, 0.0), 64.0});
  for (double v : z.samples) CHECK(v == 0.0);

  const double a = 2.5, b = -0.7;
  TimeSeries mix{std::vector<double>(500), 64.0};
  for (std::size_t i = 0; i < 500; ++i) mix.samples[i] = a * x.samples[i] + b * y.samples[i];
  bp.reset();
  const auto fm = filter_apply(bp, mix);
  bp.reset();
  const auto fx = filter_apply(bp, x);
  bp.reset();
  const auto fy = filter_apply(bp, y);
  for (std::size_t i = 0; i < 500; ++i) {
    const double want = a * fx.samples[i] + b * fy.samples[i];
    CHECK(std::fabs(fm.samples[i] - want) <= 1e-9 * std::max(1.0, std::fabs(want)));
  }

  CHECK(kind_of([&] { filter_apply(bp, TimeSeries{{1.0}, 128.0}); }) == ErrorKind::SampleRateMismatch);
}

TEST_CASE("segment_epochs") {
  TimeSeries ts{std::vector<double>(95 * 64, 1.0), 64.0};
  auto es = segment_epochs(ts, nullptr);
  CHECK(es.epochs.size() == 3);
  CHECK(es.epoch_len_samples == 1920);
  for (const auto& e : es.epochs) CHECK(e.size() == 1920);
  CHECK(!es.labels);

  TimeSeries two{std::vector<double>(60 * 64), 64.0};
  for (std::size_t i = 0; i < two.samples.size(); ++i) two.samples[i] = static_cast<double>(i);
  edf::Hypnogram h;
  h.stages = {SleepStage::Wake, SleepStage::S2};
  es = segment_epochs(two, &h);
  REQUIRE(es.labels);
  CHECK(*es.labels == std::vector<SleepStage>{SleepStage::Wake, SleepStage::S2});
  CHECK(es.epochs[1][0] == 1920.0);

  h.stages.push_back(SleepStage::REM);
  es = segment_epochs(two, &h);
  CHECK(es.labels->size() == 2);

  CHECK(kind_of([] { segment_epochs(TimeSeries{std::vector<double>(29 * 64), 64.0}, nullptr); }) ==
        ErrorKind::TooShort);
}

namespace {

EpochSet labelled(const std::vector<SleepStage>& labels) {
  EpochSet es;
  es.epoch_len_samples = 2;
  for (std::size_t i = 0; i < labels.size(); ++i) es.epochs.push_back({static_cast<double>(i), 0.0});
  es.labels = labels;
  return es;
}

}  // namespace

TEST_CASE("oversampling") {
  using S = SleepStage;
  std::vector<S> balanced;
  for (auto s : kAllStages) balanced.insert(balanced.end(), 4, s);
  const auto same = oversample_classes(labelled(balanced), 1);
  CHECK(same.epochs.size() == 20);

  const auto wr = oversample_classes(labelled({S::Wake, S::Wake, S::Wake, S::REM}), 3);
  REQUIRE(wr.epochs.size() == 6);
  int rem = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    if ((*wr.labels)[i] == S::REM) {
      ++rem;
      CHECK(wr.epochs[i][0] == 3.0);
    }
  }
  CHECK(rem == 3);

  const std::vector<S> uneven = {S::Wake, S::Wake, S::Wake, S::Wake, S::Wake, S::S1, S::S1, S::S2, S::S2, S::S2};
  const auto a = oversample_classes(labelled(uneven), 1);
  const auto b = oversample_classes(labelled(uneven), 1);
  CHECK(a.epochs == b.epochs);
  CHECK(*a.labels == *b.labels);
  CHECK(a.epochs.size() == 15);
  // Originals retained in order, then duplicates of the right class.
  for (std::size_t i = 0; i < uneven.size(); ++i) CHECK(a.epochs[i][0] == static_cast<double>(i));
  for (std::size_t i = uneven.size(); i < a.epochs.size(); ++i) {
    const auto src = static_cast<std::size_t>(a.epochs[i][0]);
    CHECK(uneven[src] == (*a.labels)[i]);
  }

  EpochSet unl = labelled({S::Wake});
  unl.labels.reset();
  CHECK(kind_of([&] { oversample_classes(unl, 1); }) == ErrorKind::MissingLabels);
}

TEST_CASE("preprocess chain") {
  auto raw = tone(10.0, 256.0, 60.0);
  const auto hum = tone(50.0, 256.0, 60.0, 2.0);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) raw.samples[i] += hum.samples[i];
  const auto out = preprocess(raw, PreprocessConfig{});
  CHECK(out.fs == 64.0);
  CHECK(out.samples.size() == 60 * 64);
  const double a = oracle::sine_fit_amplitude(out.samples, 64.0, 10.0, 640, out.samples.size());
  CHECK(a == doctest::Approx(1.0).epsilon(0.03));
}
