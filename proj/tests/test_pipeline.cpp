#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "essc/pipeline.hpp"
#include "essc/rng.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace essc;
using namespace essc::pipeline;
using testing::kind_of;

namespace {

std::vector<int> as_ints(const std::vector<SleepStage>& s) {
  std::vector<int> out;
  for (auto x : s) out.push_back(static_cast<int>(stage_index(x)));
  return out;
}

// Tiny labelled dataset whose class is readable from a bright pixel.
Dataset toy_dataset(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.height = 8;
  ds.width = 8;
  for (std::size_t i = 0; i < per_class * kNumStages; ++i) {
    const auto cls = i % kNumStages;
    std::vector<float> img(64);
    for (auto& v : img) v = static_cast<float>(0.1 * rng.normal());
    for (std::size_t r = 0; r < 8; ++r) img[r * 8 + cls] += 2.0f;
    ds.images.push_back(img);
    ds.labels.push_back(kAllStages[cls]);
  }
  return ds;
}

}  // namespace

TEST_CASE("kfold examples") {
  const auto all = kfold_split(20, 20, 1);
  for (std::size_t f = 0; f < 20; ++f) CHECK(all.test_indices(f).size() == 1);

  const auto p = kfold_split(23, 20, 1);
  std::vector<std::size_t> sizes;
  for (std::size_t f = 0; f < 20; ++f) sizes.push_back(p.test_indices(f).size());
  CHECK(std::count(sizes.begin(), sizes.end(), 2) == 3);
  CHECK(std::count(sizes.begin(), sizes.end(), 1) == 17);

  CHECK(kind_of([] { kfold_split(5, 20, 1); }) == ErrorKind::TooFewItems);
  CHECK(kind_of([] { kfold_split(5, 1, 1); }) == ErrorKind::InvalidArgument);
  CHECK(kfold_split(50, 7, 9).fold_of == kfold_split(50, 7, 9).fold_of);
}

TEST_CASE("kfold properties over random triples") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(20);
    const std::size_t n = k + rng.uniform_index(200);
    const auto plan = kfold_split(n, k, rng.next_u64());
    std::set<std::size_t> seen;
    std::size_t lo = n, hi = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const auto test = plan.test_indices(f);
      const auto train = plan.train_indices(f);
      CHECK(test.size() + train.size() == n);
      for (auto i : test) CHECK(seen.insert(i).second);
      std::set<std::size_t> tr(train.begin(), train.end());
      for (auto i : test) CHECK(!tr.count(i));
      lo = std::min(lo, test.size());
      hi = std::max(hi, test.size());
    }
    CHECK(seen.size() == n);
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("holdout split") {
  const auto s = holdout_split(100, 0.15, 3);
  CHECK(s.test.size() == 15);
  CHECK(s.train.size() == 85);
  std::set<std::size_t> u(s.train.begin(), s.train.end());
  u.insert(s.test.begin(), s.test.end());
  CHECK(u.size() == 100);
  CHECK(holdout_split(2, 0.15, 1).test.size() == 1);
  const auto a = holdout_split(57, 0.15, 8), b = holdout_split(57, 0.15, 8);
  CHECK(a.test == b.test);
  CHECK(a.train == b.train);
  CHECK(kind_of([] { holdout_split(1, 0.15, 1); }) == ErrorKind::TooFewItems);
}

TEST_CASE("std_dev and mean") {
  const std::vector<double> xs = {2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(std::fabs(std_dev(xs) - 2.0) <= 1e-12);
  CHECK(mean(xs) == 5.0);
  CHECK(std_dev(std::vector<double>(6, 3.3)) == doctest::Approx(0.0).scale(1));
  CHECK(std_dev(std::vector<double>{4.2}) == 0.0);
  CHECK(kind_of([] { std_dev(std::vector<double>{}); }) == ErrorKind::EmptyInput);
}

TEST_CASE("metrics against a brute-force recount") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(60);
    std::vector<SleepStage> truth, pred;
    for (std::size_t i = 0; i < n; ++i) {
      truth.push_back(kAllStages[rng.uniform_index(kNumStages)]);
      pred.push_back(rng.uniform() < 0.5 ? truth.back() : kAllStages[rng.uniform_index(kNumStages)]);
    }
    const auto m = metrics_from_predictions(truth, pred);
    const auto t = as_ints(truth), p = as_ints(pred);
    CHECK(m.total() == n);
    std::uint64_t diag = 0;
    double f1_sum = 0;
    int f1_classes = 0;
    for (int c = 0; c < static_cast<int>(kNumStages); ++c) {
      const auto cnt = oracle::recount(t, p, c);
      CHECK(cnt.tp == m.confusion[c][c]);
      diag += cnt.tp;
      const double acc = 100.0 * static_cast<double>(cnt.tp + cnt.tn) / static_cast<double>(n);
      CHECK(std::fabs(m.per_stage_accuracy[c] - acc) <= 1e-12);
      const auto denom = 2 * cnt.tp + cnt.fp + cnt.fn;
      if (denom > 0) {
        f1_sum += 2.0 * static_cast<double>(cnt.tp) / static_cast<double>(denom);
        ++f1_classes;
      }
    }
    CHECK(std::fabs(m.overall_accuracy - 100.0 * static_cast<double>(diag) / static_cast<double>(n)) <= 1e-12);
    CHECK(std::fabs(m.macro_f1 - f1_sum / f1_classes) <= 1e-12);
    CHECK(std::fabs(m.cohen_kappa - oracle::kappa(t, p, kNumStages)) <= 1e-12);
  }
}

TEST_CASE("metric edge cases") {
  using S = SleepStage;
  const std::vector<S> truth = {S::Wake, S::S1, S::S2, S::SWS, S::REM, S::Wake};
  const auto perfect = metrics_from_predictions(truth, truth);
  CHECK(perfect.overall_accuracy == 100.0);
  CHECK(perfect.cohen_kappa == 1.0);
  for (std::size_t i = 0; i < kNumStages; ++i) {
    for (std::size_t j = 0; j < kNumStages; ++j) {
      if (i != j) CHECK(perfect.confusion[i][j] == 0);
    }
  }

  // Constant predictor on a balanced set.
  std::vector<S> bal, constant;
  for (auto s : kAllStages) {
    bal.insert(bal.end(), 3, s);
    constant.insert(constant.end(), 3, S::S2);
  }
  CHECK(std::fabs(metrics_from_predictions(bal, constant).cohen_kappa) <= 1e-12);

  // TP=3, TN=5, FP=1, FN=1 for Wake.
  const std::vector<S> t2 = {S::Wake, S::Wake, S::Wake, S::Wake, S::S1, S::S1, S::S1, S::S1, S::S1, S::S1};
  const std::vector<S> p2 = {S::Wake, S::Wake, S::Wake, S::S1, S::Wake, S::S1, S::S1, S::S1, S::S1, S::S1};
  CHECK(metrics_from_predictions(t2, p2).per_stage_accuracy[0] == doctest::Approx(80.0));

  CHECK(kind_of([] { metrics_from_predictions({}, {}); }) == ErrorKind::EmptyDataset);
}

TEST_CASE("oversampled training indices stay inside the training fold") {
  const auto ds = [] {
    Dataset d = toy_dataset(4, 1);
    d.labels.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) d.labels[i] = i < 12 ? SleepStage::Wake : kAllStages[i % kNumStages];
    return d;
  }();
  const auto split = holdout_split(ds.size(), 0.25, 2);
  const auto idx = oversampled_training_indices(ds, split.train, 5);
  const std::set<std::size_t> train(split.train.begin(), split.train.end());
  for (auto i : idx) CHECK(train.count(i));
  std::array<std::size_t, kNumStages> counts{};
  for (auto i : idx) ++counts[stage_index(ds.labels[i])];
  std::size_t mx = 0;
  for (auto c : counts) mx = std::max(mx, c);
  for (auto c : counts) CHECK((c == 0 || c == mx));
  CHECK(std::equal(split.train.begin(), split.train.end(), idx.begin()));
}

TEST_CASE("dataset cache round trip and corruption") {
  Dataset ds = toy_dataset(2, 3);
  ds.provenance = "toy";
  ds.seed = 99;
  ds.reduced = true;
  const auto bytes = serialize_dataset(ds);
  CHECK(std::equal(kDatasetMagic, kDatasetMagic + 8, bytes.begin()));
  CHECK(deserialize_dataset(bytes) == ds);
  CHECK(serialize_dataset(deserialize_dataset(bytes)) == bytes);

  for (std::size_t pos = 8; pos < bytes.size(); pos += 7) {
    auto bad = bytes;
    bad[pos] ^= 0x20;
    CHECK_THROWS_AS(deserialize_dataset(bad), Error);
  }
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(kind_of([&] { deserialize_dataset(magic); }) == ErrorKind::BadMagic);
  CHECK(kind_of([&] { deserialize_dataset(std::span(bytes).first(40)); }) != ErrorKind::BadMagic);

  Dataset unl = ds;
  unl.labels.clear();
  CHECK(deserialize_dataset(serialize_dataset(unl)) == unl);

  testing::TempDir dir("cache");
  save_dataset(dir / "a.essc", ds);
  CHECK(load_dataset(dir / "a.essc") == ds);
  CHECK(kind_of([&] { load_dataset(dir / "missing.essc"); }) == ErrorKind::IoError);
}

TEST_CASE("standardize") {
  std::vector<float> img = {1, 2, 3, 4};
  standardize(img);
  double m = 0, v = 0;
  for (float x : img) m += x;
  for (float x : img) v += x * x;
  CHECK(std::fabs(m) < 1e-6);
  CHECK(v / 4 == doctest::Approx(1.0).epsilon(1e-6));
  std::vector<float> flat(5, 2.0f);
  standardize(flat);
  for (float x : flat) CHECK(x == 0.0f);
}

TEST_CASE("training contract") {
  const auto ds = toy_dataset(4, 7);
  auto cfg = TrainConfig::proposed();
  cfg.epochs = 0;
  const auto none = train(ds, cfg);
  CHECK(none.history.loss.empty());
  nn::Network fresh(network_config_for(ds, cfg), derive_seed(cfg.seed, 1));
  const auto a = none.network.parameter_tensors();
  const auto b = fresh.parameter_tensors();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->values == b[i]->values);

  cfg.epochs = 2;
  const auto r1 = train(ds, cfg), r2 = train(ds, cfg);
  CHECK(r1.history.loss == r2.history.loss);
  const auto p1 = r1.network.parameter_tensors(), p2 = r2.network.parameter_tensors();
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->values == p2[i]->values);
  for (double l : r1.history.loss) CHECK(std::isfinite(l));
  CHECK(r1.adam.has_value());

  Dataset empty;
  empty.height = empty.width = 8;
  CHECK(kind_of([&] { train(empty, cfg); }) == ErrorKind::EmptyDataset);
}

TEST_CASE("toy problem is learned under the proposed configuration") {
  const auto ds = toy_dataset(8, 11);
  auto cfg = TrainConfig::proposed();
  cfg.epochs = 30;
  cfg.adam.lr = 1e-3;
  const auto r = train(ds, cfg);
  CHECK(evaluate(r.network, ds).overall_accuracy == 100.0);
  CHECK(r.history.loss.back() < r.history.loss.front());
}

TEST_CASE("experiment aggregation and reports") {
  const auto ds = toy_dataset(4, 5);
  ExperimentConfig cfg;
  cfg.k = 4;
  cfg.train.epochs = 1;
  cfg.jobs = 2;
  const auto rep = run_experiment(ds, cfg);
  REQUIRE(rep.folds.size() == 4);
  std::vector<double> acc;
  std::uint64_t total = 0;
  for (const auto& f : rep.folds) {
    acc.push_back(f.metrics.overall_accuracy);
    total += f.metrics.total();
  }
  CHECK(total == ds.size());
  CHECK(rep.aggregate.overall_accuracy.mean == doctest::Approx(mean(acc)).epsilon(1e-12));
  CHECK(rep.aggregate.overall_accuracy.std_dev == doctest::Approx(std_dev(acc)).epsilon(1e-12).scale(1));

  const auto again = run_experiment(ds, cfg);
  CHECK(experiment_to_json(rep) == experiment_to_json(again));
  CHECK(experiment_to_csv(rep) == experiment_to_csv(again));
  CHECK(experiment_to_json(rep).find("time") == std::string::npos);
  CHECK(experiment_to_json(rep, ReportOptions{true}).find("processing_time_s") != std::string::npos);

  const auto csv = experiment_to_csv(rep);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 + 2);
}

TEST_CASE("synthetic end-to-end holdout is deterministic") {
  edf::SynthSpec spec;
  for (auto s : kAllStages) spec.stage_sequence.insert(spec.stage_sequence.end(), 3, s);
  spec.seed = 4;
  FeatureConfig fc;
  fc.use_autoencoder = true;
  fc.autoencoder_epochs = 2;
  fc.jobs = 2;
  ExperimentConfig ec;
  ec.mode = SplitMode::Holdout;
  ec.train.epochs = 2;
  const auto a = run_experiment(spec, fc, ec);
  const auto b = run_experiment(spec, fc, ec);
  CHECK(a.mode == "holdout");
  CHECK(experiment_to_json(a) == experiment_to_json(b));
}
